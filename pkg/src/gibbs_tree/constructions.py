"""Vertex fields solving the splitting equation, and the three constructions.

A vertex field assigns a grid field h(., x) to every vertex of V_n.  It
solves the equation when, for every non-leaf x,

    h(., x) = sum over successors y of A h(., y),

with the leaves W_n acting as boundary data.  Fields that coincide across
many vertices share one array, so large trees cost little memory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NoConvergenceError, PreconditionError
from .grid import Grid, check_field, sup, sup_dist
from .kernel import Kernel, check_zero_mean, h_bounds
from .operator import apply_A, apply_kA, estimate_contraction, invert_kA
from .tree import Path, Side, Vertex, compare_to_path, level, path_from_r, successors, volume

log = logging.getLogger(__name__)

PROVENANCES = ("art", "bg", "zachary", "constant", "manual")
BAND_MARGIN = 1e-9


@dataclass
class VertexField:
    k: int
    depth: int
    assignment: dict[Vertex, np.ndarray]
    mode: str = "half"
    provenance: str = "manual"
    parameters: dict = field(default_factory=dict)

    def __getitem__(self, x: Vertex) -> np.ndarray:
        return self.assignment[x]

    def vertices(self):
        return volume(self.k, self.depth, self.mode)

    def level_vertices(self, m: int):
        return level(self.k, m, self.mode)

    def successors(self, x: Vertex):
        return successors(x, self.k, self.mode)

    def restrict(self, depth: int) -> "VertexField":
        if depth > self.depth:
            raise ContractViolation("cannot restrict to a deeper volume")
        sub = {x: self.assignment[x] for x in volume(self.k, depth, self.mode)}
        return VertexField(self.k, depth, sub, self.mode, self.provenance, dict(self.parameters))

    def check(self, g: Grid) -> None:
        for x in self.vertices():
            if x not in self.assignment:
                raise ContractViolation(f"vertex {x} has no field")
            f = check_field(g, self.assignment[x], f"h(., {x})")
            if f[0] != 0.0:
                raise ContractViolation(f"h(0, {x}) must be 0")


@dataclass(frozen=True)
class ResidualReport:
    max_res: float
    worst_vertex: Vertex | None


def residual(kern: Kernel, g: Grid, vf: VertexField) -> ResidualReport:
    """Largest sup-norm defect of the splitting equation over non-leaf vertices."""
    cache: dict[int, np.ndarray] = {}

    def A(f):
        key = id(f)
        if key not in cache:
            cache[key] = apply_A(kern, g, f)
        return cache[key]

    worst, worst_x = 0.0, None
    for m in range(vf.depth):
        for x in vf.level_vertices(m):
            total = sum(A(vf[y]) for y in vf.successors(x))
            res = sup_dist(vf[x], total)
            if worst_x is None or res > worst:
                worst, worst_x = res, x
    return ResidualReport(worst, worst_x)


def field_to_vertexfield(levels, k: int, depth: int, mode: str = "half",
                         provenance: str | None = None) -> VertexField:
    """Materialize a level-homogeneous vertex field.

    ``levels`` is one field (translation-invariant assignment) or a list
    with one field per level 0..depth.  In full-tree mode the root has k+1
    successors, so its field is (k+1)/k times the level-0 field; for fixed
    points and Zachary sequences this is exactly the sum of A over the
    root's successors.
    """
    single = isinstance(levels, np.ndarray) and levels.ndim == 1
    if single:
        per_level = [levels] * (depth + 1)
    else:
        per_level = list(levels)
        if len(per_level) < depth + 1:
            raise ContractViolation(f"need {depth + 1} level fields, got {len(per_level)}")
    if mode == "full" and depth >= 1:
        per_level = [per_level[0] * (k + 1) / k] + per_level[1:]
    assignment = {}
    for m in range(depth + 1):
        for x in level(k, m, mode):
            assignment[x] = per_level[m]
    return VertexField(k, depth, assignment, mode, provenance or ("constant" if single else "zachary"))


def in_band(values, lo, hi, margin: float = BAND_MARGIN) -> bool:
    """Strictly inside (lo, hi) at every node but the pinned t=0; where the
    band has collapsed to a point (constant kernel rows) the value must sit on it."""
    v, lo, hi = np.asarray(values)[1:], lo[1:], hi[1:]
    flat = hi - lo <= 2 * margin
    inside = (v > lo + margin) & (v < hi - margin)
    on_point = np.abs(v - 0.5 * (lo + hi)) <= margin
    return bool(np.all(np.where(flat, on_point, inside)))


# ---------------------------------------------------------------- ART lift

def art_lift(kern: Kernel, g: Grid, f_mu: VertexField, k: int, depth: int | None = None,
             tol: float = 1e-8) -> VertexField:
    """Extend a solution on the order-k0 tree to the order-k tree, k > k0.

    Vertices whose digits all lie in {0..k0-1} form the embedded order-k0
    tree and keep the input fields (the same arrays); all other vertices get
    the free field 0.  Requires the zero-mean condition on the kernel, which
    makes the free field a solution for every branching order.
    """
    k0 = f_mu.k
    if f_mu.mode != "half":
        raise ContractViolation("art_lift works on half trees")
    if k <= k0:
        raise ContractViolation("target order k must exceed the source order")
    depth = f_mu.depth if depth is None else depth
    if depth > f_mu.depth:
        raise ContractViolation("lift depth exceeds the depth of the source field")
    zm = check_zero_mean(kern, g)
    if not zm.holds:
        raise PreconditionError(f"zero-mean condition fails (max deviation {zm.max_dev:.3e})")
    res = residual(kern, g, f_mu.restrict(depth)).max_res
    if res >= tol:
        raise PreconditionError(f"source field does not solve the equation (residual {res:.3e})")
    free = g.zeros()
    assignment = {}
    for x in volume(k, depth):
        assignment[x] = f_mu[x] if all(d < k0 for d in x) else free
    return VertexField(k, depth, assignment, "half", "art", {"k0": k0})


# ---------------------------------------------------------------- BG fields

def _check_fixed_point(kern, g, k, f, name, tol):
    res = sup_dist(apply_kA(kern, g, k, f), f)
    if res >= tol:
        raise PreconditionError(f"{name} is not a fixed point of kA (residual {res:.3e})")


def _check_seed(kern, g, k, seed):
    seed = check_field(g, seed, "seed")
    if seed[0] != 0.0:
        raise ContractViolation("seed must vanish at t=0")
    lo, hi = h_bounds(kern, g, k)
    if not in_band(seed, lo, hi):
        raise PreconditionError("seed leaves the open band (h_min, h_max)")
    return seed


def _bg_levels(kern, g, k, h, eta, p: Path, n: int, seed) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """(left, on-path, right) fields for levels 0..n of the BG recursion."""
    if len(p.digits) < n:
        raise ContractViolation(f"path known to depth {len(p.digits)}, need {n}")
    levels = [None] * (n + 1)
    levels[n] = (h, seed, eta)
    for m in range(n - 1, -1, -1):
        left, on, right = levels[m + 1]
        d = p.digits[m]
        a_left, a_right = apply_A(kern, g, left), apply_A(kern, g, right)
        new_on = apply_A(kern, g, on) + d * a_left + (k - 1 - d) * a_right
        levels[m] = (k * a_left, new_on, k * a_right)
    return levels


def bg_field(kern: Kernel, g: Grid, k: int, h, eta, p: Path, n: int, seed=None,
             fixed_point_tol: float = 1e-8) -> VertexField:
    """Glue two translation-invariant solutions along the path ``p``.

    On W_n vertices left of the path carry ``h``, vertices right of it carry
    ``eta`` and the path vertex x_n carries ``seed`` (default (h+eta)/2).
    Lower levels follow from the splitting equation.  Since every successor
    of a left (right) vertex is again left (right), each level carries only
    three distinct fields, which are computed once and shared.
    """
    h, eta = check_field(g, h, "h"), check_field(g, eta, "eta")
    _check_fixed_point(kern, g, k, h, "h", fixed_point_tol)
    _check_fixed_point(kern, g, k, eta, "eta", fixed_point_tol)
    seed = _check_seed(kern, g, k, 0.5 * (h + eta) if seed is None else seed)
    levels = _bg_levels(kern, g, k, h, eta, p, n, seed)
    assignment = {}
    for m in range(n + 1):
        left, on, right = levels[m]
        for x in level(k, m):
            side = compare_to_path(x, p)
            assignment[x] = on if side is Side.ON else (left if side is Side.LEFT else right)
    return VertexField(k, n, assignment, "half", "bg", {"path": list(p.digits[:n]), "r": p.r})


@dataclass(frozen=True)
class SensitivityRow:
    level: int
    sup_diff: float
    bound: float
    ratio: float  # sup_diff at this level over sup_diff one level deeper
    violates: bool


def bg_seed_sensitivity(kern: Kernel, g: Grid, k: int, h, eta, p: Path, n: int, seed_a, seed_b,
                        alpha_hat: float | None = None, margin: float = 0.05,
                        fixed_point_tol: float = 1e-8) -> list[SensitivityRow]:
    """Compare path fields grown from two seeds, level by level.

    ``bound`` is alpha_hat^(n-m) times the seed difference; a row is flagged
    when the observed difference exceeds (alpha_hat + margin)^(n-m) times it.
    When ``alpha_hat`` is omitted it is estimated with amplitude
    sup|h_max|.
    """
    h, eta = check_field(g, h, "h"), check_field(g, eta, "eta")
    _check_fixed_point(kern, g, k, h, "h", fixed_point_tol)
    _check_fixed_point(kern, g, k, eta, "eta", fixed_point_tol)
    seed_a = _check_seed(kern, g, k, seed_a)
    seed_b = _check_seed(kern, g, k, seed_b)
    if alpha_hat is None:
        amp = sup(h_bounds(kern, g, k)[1])
        alpha_hat = estimate_contraction(kern, g, 200, amp, 0).alpha_hat
    run_a = _bg_levels(kern, g, k, h, eta, p, n, seed_a)
    run_b = _bg_levels(kern, g, k, h, eta, p, n, seed_b)
    diffs = [sup_dist(run_a[m][1], run_b[m][1]) for m in range(n + 1)]
    rows = []
    for m in range(n + 1):
        ratio = diffs[m] / diffs[m + 1] if m < n and diffs[m + 1] > 0 else 0.0
        bound = alpha_hat ** (n - m) * diffs[n]
        violates = diffs[m] > (alpha_hat + margin) ** (n - m) * diffs[n] * (1 + 1e-12)
        rows.append(SensitivityRow(m, diffs[m], bound, ratio, violates))
    return rows


def bg_limit_field(kern: Kernel, g: Grid, k: int, h, eta, r: float, depth_m: int, tol: float = 1e-8,
                   seed=None, max_depth: int = 400, fixed_point_tol: float = 1e-8) -> np.ndarray:
    """Limit of the path field at x_m as the boundary level n grows.

    n increases one level at a time until two successive values at x_m are
    within ``tol`` in sup norm.  Only the three per-level classes are
    propagated, so deep boundaries are cheap.
    """
    h, eta = check_field(g, h, "h"), check_field(g, eta, "eta")
    _check_fixed_point(kern, g, k, h, "h", fixed_point_tol)
    _check_fixed_point(kern, g, k, eta, "eta", fixed_point_tol)
    seed = _check_seed(kern, g, k, 0.5 * (h + eta) if seed is None else seed)
    p = path_from_r(r, k, max_depth)
    prev = None
    for n in range(depth_m + 1, max_depth + 1):
        cur = _bg_levels(kern, g, k, h, eta, p, n, seed)[depth_m][1]
        if prev is not None and sup_dist(cur, prev) < tol:
            return cur
        prev_prev, prev = prev, cur
    raise NoConvergenceError(f"path field at depth {depth_m} did not settle by n={max_depth}",
                             best=prev, residual=sup_dist(prev, prev_prev), previous=prev_prev)


# ---------------------------------------------------------------- Zachary

@dataclass
class ZacharyResult:
    levels: list[np.ndarray]
    complete: bool
    failed_level: int | None = None
    reason: str = ""
    residuals: list[float] = field(default_factory=list)

    def vertexfield(self, k: int, mode: str = "half") -> VertexField:
        vf = field_to_vertexfield(self.levels, k, len(self.levels) - 1, mode, "zachary")
        return vf


def zachary_levels(kern: Kernel, g: Grid, k: int, zeta0, N: int, tol: float = 1e-10,
                   max_iter: int = 60) -> ZacharyResult:
    """Levels zeta_0..zeta_N with zeta_n = kA(zeta_{n+1}), built by inverting kA.

    Raises ``PreconditionError`` when ``zeta0`` is not strictly inside the
    band.  If an inversion fails or a level leaves the band the run stops and
    returns the levels computed so far with ``complete=False``.
    """
    zeta0 = check_field(g, zeta0, "zeta0")
    if zeta0[0] != 0.0:
        raise ContractViolation("zeta0 must vanish at t=0")
    lo, hi = h_bounds(kern, g, k)
    if not in_band(zeta0, lo, hi):
        raise PreconditionError("zeta0 leaves the open band (h_min, h_max)")
    levels, residuals = [zeta0], []
    for n in range(N):
        try:
            # start from the current level: slowly varying chains and fixed
            # points are then found without a detour to another preimage
            nxt = invert_kA(kern, g, k, levels[-1], tol=tol, max_iter=max_iter, h0=levels[-1])
        except NoConvergenceError as exc:
            log.info("Zachary inversion failed at level %d: %s", n + 1, exc)
            return ZacharyResult(levels, False, n + 1, f"inversion failed: {exc}", residuals)
        residuals.append(sup_dist(apply_kA(kern, g, k, nxt), levels[-1]))
        if not in_band(nxt, lo, hi):
            return ZacharyResult(levels + [nxt], False, n + 1, "level left the band (h_min, h_max)",
                                 residuals)
        levels.append(nxt)
    return ZacharyResult(levels, True, None, "", residuals)
