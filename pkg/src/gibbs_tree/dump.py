"""CSV and JSON dumps of grids, fields, vertex fields and configurations.

Every float is written with 17 significant digits so that a dump read back
reproduces the arrays bit for bit.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path as FsPath

import numpy as np

from .constructions import VertexField, field_to_vertexfield
from .errors import ConfigurationError
from .grid import Grid, interpolate
from .tree import format_vertex, parse_vertex

FLOAT_FMT = "%.17g"


def fmt(x: float) -> str:
    return FLOAT_FMT % float(x)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_grid(path, g: Grid) -> None:
    _write_rows(path, ["node", "weight"], [(fmt(t), fmt(w)) for t, w in zip(g.nodes, g.weights)])


def write_field(path, g: Grid, values) -> None:
    _write_rows(path, ["t", "value"], [(fmt(t), fmt(v)) for t, v in zip(g.nodes, values)])


def write_fields(path, g: Grid, named: dict[str, np.ndarray]) -> None:
    """Several fields side by side: columns t, name_1, name_2, ..."""
    names = list(named)
    rows = [[fmt(t)] + [fmt(named[n][i]) for n in names] for i, t in enumerate(g.nodes)]
    _write_rows(path, ["t"] + names, rows)


def write_vertexfield(path, g: Grid, vf: VertexField) -> None:
    rows = []
    for x in vf.vertices():
        name = format_vertex(x)
        rows.extend((name, fmt(t), fmt(v)) for t, v in zip(g.nodes, vf[x]))
    _write_rows(path, ["vertex", "t", "value"], rows)


def write_configurations(path, order, spins: np.ndarray) -> None:
    names = [format_vertex(x) for x in order]
    rows = ((i, names[j], fmt(spins[i, j])) for i in range(spins.shape[0]) for j in range(len(order)))
    _write_rows(path, ["sample", "vertex", "spin"], rows)


def _on_grid(g: Grid, t: np.ndarray, v: np.ndarray, source: str) -> np.ndarray:
    """Values at the grid nodes: taken as is when the abscissae match, else interpolated."""
    if len(t) == g.n_nodes and np.allclose(t, g.nodes, rtol=0, atol=1e-14):
        return v
    if len(t) < 2 or np.any(np.diff(t) <= 0):
        raise ConfigurationError(f"{source}: abscissae must be increasing")
    tmp = Grid(t, np.zeros_like(t), "dump")
    out = interpolate(tmp, v, g.nodes)
    return out - out[0]


def read_field_dump(path, g: Grid, k: int, depth: int, mode: str = "half") -> VertexField:
    """Load a ``t,value`` or ``vertex,t,value`` CSV as a vertex field on ``g``.

    A plain field is spread over every vertex of V_depth.
    """
    path = FsPath(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigurationError(f"cannot read field dump {path}: {exc}") from None
    if not rows:
        raise ConfigurationError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    try:
        body = [[c.strip() for c in r] for r in rows[1:] if r]
        if header[:2] == ["t", "value"]:
            t = np.array([float(r[0]) for r in body])
            v = np.array([float(r[1]) for r in body])
            return field_to_vertexfield(_on_grid(g, t, v, str(path)), k, depth, mode, "manual")
        if header[:3] == ["vertex", "t", "value"]:
            per_vertex: dict = {}
            for r in body:
                per_vertex.setdefault(parse_vertex(r[0]), []).append((float(r[1]), float(r[2])))
        else:
            raise ConfigurationError(f"{path}: expected header 't,value' or 'vertex,t,value'")
    except (ValueError, IndexError) as exc:
        raise ConfigurationError(f"{path}: malformed row ({exc})") from None
    assignment = {}
    for x, pairs in per_vertex.items():
        t, v = (np.array(c) for c in zip(*pairs))
        assignment[x] = _on_grid(g, t, v, str(path))
    file_depth = max(len(x) for x in assignment)
    if file_depth < depth:
        depth = file_depth
    vf = VertexField(k, file_depth, assignment, mode, "manual")
    try:
        vf.check(g)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return vf.restrict(depth)
