"""Finite-volume splitting measures built from a vertex field.

For a vertex field h on V_n the measure on configurations sigma of V_n has
density (with respect to Lebesgue measure on [0,1]^{V_n})

    mu_n(sigma) = Z_n^{-1} prod_{<x,y> in L_n} K(sigma(x), sigma(y))
                  * exp( sum_{x in W_n} h(sigma(x), x) ),

with K(t, u) = exp(J beta xi(t, u)) and the parent spin as first argument.
Partition functions and marginals come from one bottom-up pass over the
tree; products of integrals are accumulated in log space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constructions import VertexField, residual
from .errors import ContractViolation, NumericError
from .grid import Grid, interpolate
from .kernel import Kernel
from .tree import Vertex

Configuration = dict  # Vertex -> spin in [0, 1]


@dataclass
class MessageSet:
    """Bottom-up partial partition functions.

    ``log_z[x]`` is ln z(t, x) at the nodes, where z(., x) = e^{h(., x)} on
    leaves and z(t, x) = prod_y ∫ K(t,u) z(u,y) du otherwise.
    ``log_I[y]`` is ln ∫ K(t,u) z(u,y) du, the factor y contributes to its
    parent.  ``log_Z`` is ln Z_n.
    """

    log_z: dict[Vertex, np.ndarray]
    log_I: dict[Vertex, np.ndarray]
    log_Z: float


def _log_integrals(K: np.ndarray, w: np.ndarray, logz: np.ndarray) -> np.ndarray:
    # rows of logz are children; result[c, i] = ln sum_j K[i, j] w_j e^{logz[c, j]}
    top = logz.max(axis=1, keepdims=True)
    with np.errstate(all="ignore"):
        out = np.log((w * np.exp(logz - top)) @ K.T) + top
    return out


def _log_integral_1d(w: np.ndarray, logf: np.ndarray) -> float:
    top = logf.max()
    return float(np.log(w @ np.exp(logf - top)) + top)


def messages(kern: Kernel, g: Grid, vf: VertexField) -> MessageSet:
    K = kern.matrix(g)
    w = g.weights
    n = vf.depth
    leaves = vf.level_vertices(n)
    log_z = {x: np.asarray(vf[x], dtype=float) for x in leaves}
    log_I: dict[Vertex, np.ndarray] = {}
    current = leaves
    cur_logz = np.stack([log_z[x] for x in leaves])
    for m in range(n - 1, -1, -1):
        parents = vf.level_vertices(m)
        li = _log_integrals(K, w, cur_logz)
        if not np.all(np.isfinite(li)):
            raise NumericError(f"message integrals overflowed at level {m + 1}")
        for x, row in zip(current, li):
            log_I[x] = row
        fan = len(current) // len(parents)
        cur_logz = li.reshape(len(parents), fan, -1).sum(axis=1)
        for x, row in zip(parents, cur_logz):
            log_z[x] = row
        current = parents
    log_Z = _log_integral_1d(w, log_z[()])
    if not np.isfinite(log_Z):
        raise NumericError("partition function is not finite")
    return MessageSet(log_z, log_I, log_Z)


def log_partition(kern: Kernel, g: Grid, vf: VertexField) -> float:
    return messages(kern, g, vf).log_Z


def _normalized(g: Grid, logf: np.ndarray) -> np.ndarray:
    dens = np.exp(logf - logf.max())
    return dens / (g.weights @ dens)


def root_marginal(kern: Kernel, g: Grid, vf: VertexField, msgs: MessageSet | None = None) -> np.ndarray:
    """Density of sigma(root) on the grid nodes, normalized to integrate to 1."""
    msgs = msgs or messages(kern, g, vf)
    return _normalized(g, msgs.log_z[()])


def marginal_at(kern: Kernel, g: Grid, vf: VertexField, x: Vertex,
                msgs: MessageSet | None = None) -> np.ndarray:
    """Single-site density of sigma(x), combining the upward messages with a
    downward pass along the root-to-x path."""
    msgs = msgs or messages(kern, g, vf)
    x = tuple(x)
    if len(x) > vf.depth:
        raise ContractViolation(f"vertex {x} lies outside V_{vf.depth}")
    if x == ():
        return root_marginal(kern, g, vf, msgs)
    K = kern.matrix(g)
    w = g.weights
    outside = np.zeros(g.n_nodes)
    parent: Vertex = ()
    for d in x:
        child = parent + (d,)
        combined = outside + sum(msgs.log_I[s] for s in vf.successors(parent) if s != child)
        top = combined.max()
        outside = np.log((w * np.exp(combined - top)) @ K) + top
        parent = child
    return _normalized(g, outside + msgs.log_z[x])


def _check_sigma(vf: VertexField, sigma) -> None:
    for x in vf.vertices():
        if x not in sigma:
            raise ContractViolation(f"configuration has no spin at {x}")
        s = sigma[x]
        if not 0.0 <= s <= 1.0:
            raise ContractViolation(f"spin {s} at {x} is outside [0, 1]")


def log_density(kern: Kernel, g: Grid, vf: VertexField, sigma: Configuration,
                log_Z: float | None = None) -> float:
    """ln mu_n(sigma); off-grid spins use PCHIP interpolation of the boundary fields."""
    _check_sigma(vf, sigma)
    if log_Z is None:
        log_Z = log_partition(kern, g, vf)
    total = -log_Z
    for m in range(vf.depth):
        for x in vf.level_vertices(m):
            kids = vf.successors(x)
            total += float(np.sum(np.log(kern.eval(sigma[x], np.array([sigma[y] for y in kids])))))
    for x in vf.level_vertices(vf.depth):
        total += float(interpolate(g, vf[x], sigma[x]))
    return total


@dataclass(frozen=True)
class CompatibilityReport:
    n_samples: int
    max_rel_err: float
    passed: bool
    residual: float


def check_compatibility(kern: Kernel, g: Grid, vf: VertexField, n_samples: int = 200,
                        rng_seed: int = 0, tol: float = 1e-6) -> CompatibilityReport:
    """Check that integrating mu_n over the leaf spins reproduces mu_{n-1}.

    Spins on V_{n-1} are drawn uniformly from the grid nodes.  Given them,
    the integral over the W_n spins factorizes into one 1-D quadrature per
    leaf.  The test passes when the largest relative error and the residual
    of the splitting equation are both below ``tol``.
    """
    n = vf.depth
    if n < 1:
        raise ContractViolation("compatibility needs depth >= 1")
    K = kern.matrix(g)
    w = g.weights
    prev = vf.restrict(n - 1)
    log_Z_n = log_partition(kern, g, vf)
    log_Z_prev = log_partition(kern, g, prev)
    parents = vf.level_vertices(n - 1)
    leaf_logI = {}
    for x in parents:
        for y in vf.successors(x):
            h = np.asarray(vf[y], dtype=float)
            top = h.max()
            leaf_logI[y] = np.log(K @ (w * np.exp(h - top))) + top
    rng = np.random.default_rng(rng_seed)
    inner = list(prev.vertices())
    worst = 0.0
    for _ in range(n_samples):
        idx = dict(zip(inner, rng.integers(0, g.n_nodes, size=len(inner))))
        sigma = {x: float(g.nodes[i]) for x, i in idx.items()}
        lhs = -log_Z_n
        for m in range(n - 1):
            for x in prev.level_vertices(m):
                for y in prev.successors(x):
                    lhs += float(np.log(K[idx[x], idx[y]]))
        for x in parents:
            lhs += sum(float(leaf_logI[y][idx[x]]) for y in vf.successors(x))
        rhs = log_density(kern, g, prev, sigma, log_Z=log_Z_prev)
        worst = max(worst, abs(float(np.expm1(lhs - rhs))))
    res = residual(kern, g, vf).max_res
    return CompatibilityReport(n_samples, worst, bool(worst < tol and res < tol), res)


# ---------------------------------------------------------------- sampling

def _inverse_cdf(g: Grid, mass: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Invert the piecewise-linear CDF that spreads mass[:, j] uniformly over cell j.

    ``mass`` is (samples, nodes) and need not be normalized; cell j is
    [b_j, b_{j+1}] with b the cumulative quadrature weights.
    """
    mass = mass / mass.sum(axis=1, keepdims=True)
    cdf = np.cumsum(mass, axis=1)
    j = np.minimum((cdf < u[:, None]).sum(axis=1), g.n_nodes - 1)
    rows = np.arange(len(u))
    start = cdf[rows, j] - mass[rows, j]
    frac = np.clip((u - start) / mass[rows, j], 0.0, 1.0)
    edges = g.cell_edges
    return edges[j] + frac * (edges[j + 1] - edges[j])


def sample_configurations(kern: Kernel, g: Grid, vf: VertexField, n_samples: int,
                          rng_seed: int = 0, msgs: MessageSet | None = None
                          ) -> tuple[list[Vertex], np.ndarray]:
    """Draw ``n_samples`` configurations by top-down sampling.

    Configuration i uses the generator seeded with ``rng_seed + i`` and
    consumes one uniform per vertex in level order, so row i equals
    ``sample_configuration(..., rng_seed + i)``.  Returns the vertex order and
    a (n_samples, |V_n|) array of spins.
    """
    msgs = msgs or messages(kern, g, vf)
    order = list(vf.vertices())
    col = {x: i for i, x in enumerate(order)}
    U = np.stack([np.random.default_rng(rng_seed + i).random(len(order)) for i in range(n_samples)])
    spins = np.empty((n_samples, len(order)))
    w = g.weights
    root = msgs.log_z[()]
    root_mass = np.broadcast_to(w * np.exp(root - root.max()), (n_samples, g.n_nodes))
    spins[:, 0] = _inverse_cdf(g, root_mass, U[:, 0])
    for m in range(vf.depth):
        for x in vf.level_vertices(m):
            k_par = kern.eval(spins[:, col[x]][:, None], g.nodes[None, :])
            for y in vf.successors(x):
                lz = msgs.log_z[y]
                spins[:, col[y]] = _inverse_cdf(g, k_par * (w * np.exp(lz - lz.max())), U[:, col[y]])
    return order, spins


def sample_configuration(kern: Kernel, g: Grid, vf: VertexField, rng_seed: int = 0) -> Configuration:
    order, spins = sample_configurations(kern, g, vf, 1, rng_seed)
    return {x: float(s) for x, s in zip(order, spins[0])}
