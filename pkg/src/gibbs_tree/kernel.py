"""Interaction kernels K(t, u) = exp(J * beta * xi(t, u)) and their checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, InvalidKernelError
from .expr import parse_expression, _root
from .grid import Grid

PRESETS = ("ehr12-k2", "ehr12-k3", "constant")

# Extra abscissae where the preset kernels attain their extrema in u.
_AUGMENT = np.array([0.0, 0.5, 1.0])


class Kernel:
    """A strictly positive kernel on [0, 1]^2.

    ``eval(t, u)`` broadcasts over numpy arrays.  Node matrices are cached per
    grid; row 0 of ``matrix(g)`` is K(0, u_j) because node 0 is t=0.
    """

    def __init__(self, func: Callable, *, J: float = 1.0, beta: float = 1.0,
                 preset_id: str | None = None, config: dict | None = None):
        self._func = func
        self.J = float(J)
        self.beta = float(beta)
        self.preset_id = preset_id
        self.config = dict(config or {})
        self._matrices: dict[tuple, np.ndarray] = {}

    def __repr__(self):
        label = self.preset_id or self.config.get("xi", "custom")
        return f"Kernel({label!r}, J={self.J}, beta={self.beta})"

    def eval(self, t, u) -> np.ndarray:
        with np.errstate(all="ignore"):
            return np.asarray(self._func(np.asarray(t, float), np.asarray(u, float)), dtype=float)

    def xi(self, t, u) -> np.ndarray:
        return np.log(self.eval(t, u)) / (self.J * self.beta)

    def matrix(self, g: Grid) -> np.ndarray:
        mat = self._matrices.get(g.key)
        if mat is None:
            mat = self.eval(g.nodes[:, None], g.nodes[None, :])
            mat = np.broadcast_to(mat, (g.n_nodes, g.n_nodes)).copy()
            _validate(mat, "grid")
            mat.setflags(write=False)
            self._matrices[g.key] = mat
        return mat

    def row0(self, g: Grid) -> np.ndarray:
        return self.matrix(g)[0]

    def row_extrema(self, t, g: Grid) -> tuple[np.ndarray, np.ndarray]:
        """min_u and max_u of K(t, u) over the grid nodes plus u in {0, 1/2, 1}."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        u = np.concatenate([g.nodes, _AUGMENT])
        vals = np.broadcast_to(self.eval(t[:, None], u[None, :]), (len(t), len(u)))
        _validate(vals, "row")
        return vals.min(axis=1), vals.max(axis=1)


def _validate(vals: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(vals)):
        raise InvalidKernelError(f"kernel is not finite at some {where} point")
    if np.any(vals <= 0.0):
        raise InvalidKernelError(f"kernel is not strictly positive at some {where} point")


def kernel_from_xi(xi: Callable | str, J: float = 1.0, beta: float = 1.0) -> Kernel:
    """Kernel exp(J * beta * xi(t, u)); ``xi`` may be a callable or an expression string."""
    if J == 0:
        raise ConfigurationError("coupling J must be non-zero")
    if not beta > 0:
        raise ConfigurationError("inverse temperature beta must be positive")
    config = {"J": float(J), "beta": float(beta)}
    if isinstance(xi, str):
        config["xi"] = xi
        xi = parse_expression(xi)
    jb = float(J) * float(beta)

    def func(t, u):
        return np.exp(jb * np.asarray(xi(t, u), dtype=float))

    return Kernel(func, J=J, beta=beta, config=config)


def _ehr12(coef: float, order: int) -> Callable:
    def func(t, u):
        return 1.0 + coef * _root(order, 4.0 * (t - 0.5) * (u - 0.5))
    return func


def preset_kernel(name: str) -> Kernel:
    """The example kernels ``ehr12-k2``, ``ehr12-k3`` and the free ``constant`` kernel."""
    if name == "ehr12-k2":
        func = _ehr12(14.0 / 15.0, 5)
    elif name == "ehr12-k3":
        func = _ehr12(0.5, 7)
    elif name == "constant":
        def func(t, u):
            return np.ones(np.broadcast(t, u).shape)
    else:
        raise ConfigurationError(f"unknown kernel preset {name!r}; expected one of {PRESETS}")
    return Kernel(func, preset_id=name, config={"preset": name})


def kernel_from_config(cfg: dict) -> Kernel:
    """Build a kernel from ``{"preset": ...}`` or ``{"xi": ..., "J": ..., "beta": ...}``."""
    if not isinstance(cfg, dict):
        raise ConfigurationError("kernel section must be an object")
    if cfg.get("preset"):
        if cfg.get("xi"):
            raise ConfigurationError("kernel: give either 'preset' or 'xi', not both")
        return preset_kernel(cfg["preset"])
    if cfg.get("xi"):
        return kernel_from_xi(str(cfg["xi"]), float(cfg.get("J", 1.0)), float(cfg.get("beta", 1.0)))
    raise ConfigurationError("kernel: need 'preset' or 'xi'")


@dataclass(frozen=True)
class ZeroMeanReport:
    holds: bool
    max_dev: float


def check_zero_mean(kern: Kernel, g: Grid, tol: float = 1e-8) -> ZeroMeanReport:
    """Test whether the integral of K(t,u) - K(0,u) over u vanishes for every node t."""
    mat = kern.matrix(g)
    dev = (mat - mat[0]) @ g.weights
    max_dev = float(np.max(np.abs(dev)))
    return ZeroMeanReport(holds=max_dev < tol, max_dev=max_dev)


def h_bounds_at(kern: Kernel, g: Grid, k: int, t) -> tuple[np.ndarray, np.ndarray]:
    if k < 1:
        raise ConfigurationError("branching order k must be >= 1")
    lo_t, hi_t = kern.row_extrema(t, g)
    lo_0, hi_0 = kern.row_extrema(0.0, g)
    return k * np.log(lo_t / hi_0[0]), k * np.log(hi_t / lo_0[0])


def h_bounds(kern: Kernel, g: Grid, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise band ``h_min <= h(., x) <= h_max`` satisfied by every solution on nodes."""
    return h_bounds_at(kern, g, k, g.nodes)
