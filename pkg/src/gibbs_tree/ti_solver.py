"""Translation-invariant solutions: fixed points of h = k A h."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DivergenceError
from .grid import Grid, check_field, sup, sup_dist
from .kernel import Kernel, h_bounds
from .operator import apply_kA

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TISolution:
    h_star: np.ndarray
    residual: float
    iterations: int
    converged: bool
    cycle_period: int | None = None  # 2 when the iterates alternate instead of settling


def solve_ti(kern: Kernel, g: Grid, k: int, h0, tol: float = 1e-10, max_iter: int = 5000,
             damping: float = 1.0) -> TISolution:
    """Damped Picard iteration h <- (1-d) h + d kA(h).

    The damping factor halves (down to 1/64) whenever the residual
    sup|h - kA h| increases.  A run that exhausts ``max_iter`` is returned
    with ``converged=False``; iterates alternating between two states are
    flagged with ``cycle_period=2``.
    """
    h = check_field(g, h0, "h0").copy()
    if h[0] != 0.0:
        raise ContractViolation("initial field must vanish at t=0")
    if not 0.0 < damping <= 1.0:
        raise ContractViolation("damping must lie in (0, 1]")
    # kA h stays inside the band, so a residual this large means h itself ran away
    limit = 10.0 * max(sup(h_bounds(kern, g, k)[1]), sup(h), 1.0)
    prev_res = np.inf
    history: list[np.ndarray] = []
    for it in range(max_iter + 1):
        image = apply_kA(kern, g, k, h)
        res = sup(image - h)
        if res < tol:
            return TISolution(h, res, it, True)
        if res > limit:
            raise DivergenceError(f"Picard residual {res:.3e} left the admissible band",
                                  best=h, residual=res)
        if it == max_iter:
            break
        if res > prev_res and damping > 1.0 / 64:
            damping *= 0.5
        prev_res = res
        history = (history + [h])[-2:]
        h = (1.0 - damping) * h + damping * image
        h[0] = 0.0
    cycle = None
    if len(history) == 2 and sup_dist(h, history[0]) < 10 * tol:
        cycle = 2
    log.info("solve_ti stopped after %d iterations at residual %.3e", max_iter, res)
    return TISolution(h, res, max_iter, False, cycle)


def standard_inits(kern: Kernel, g: Grid, k: int) -> list[np.ndarray]:
    """Initial fields spanning the admissible band.

    Scalings a*h_max for a in {±1/4, ±1/2, ±0.9}, the same scalings of the
    tilted profile (2t-1)*h_max, and 0.  Every field is shifted to vanish at
    t=0 (A ignores constants).  The tilted profiles matter for kernels that
    are symmetric under t -> 1-t: there the plain scalings are even about
    1/2 and Picard iteration never leaves the even subspace.
    """
    h_max = h_bounds(kern, g, k)[1]
    tilt = (2.0 * g.nodes - 1.0) * h_max
    inits = [g.zeros()]
    for base in (h_max, tilt):
        for a in (0.25, 0.5, 0.9):
            for sign in (1.0, -1.0):
                f = sign * a * base
                inits.append(f - f[0])
    return inits


def find_ti_multi(kern: Kernel, g: Grid, k: int, inits=None, tol: float = 1e-10,
                  distinct_eps: float = 1e-3, max_iter: int = 5000,
                  threads: int = 1) -> list[np.ndarray]:
    """Distinct converged fixed points of kA reached from ``inits``.

    Results are deduplicated by sup distance and sorted by sup norm (ties
    broken by the value at t=1).
    """
    if inits is None:
        inits = standard_inits(kern, g, k)
    inits = list(inits)
    if not inits:
        raise ContractViolation("need at least one initial field")

    def run(h0):
        try:
            return solve_ti(kern, g, k, h0, tol=tol, max_iter=max_iter)
        except DivergenceError:
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, inits))
    else:
        results = [run(h0) for h0 in inits]
    found: list[np.ndarray] = []
    for sol in results:
        if sol is None or not sol.converged:
            continue
        if all(sup_dist(sol.h_star, other) >= distinct_eps for other in found):
            found.append(sol.h_star)
    found.sort(key=lambda f: (round(sup(f), 9), float(f[-1])))
    return found
