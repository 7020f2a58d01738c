"""The normalized log-ratio operator A and its k-fold version.

For a field h on the grid,

    (A h)(t) = ln( ∫ K(t,u) e^{h(u)} du / ∫ K(0,u) e^{h(u)} du ),

so (A h)(0) = 0 and A(h + c) = A(h) for every constant c.  A vertex field
solves the splitting-measure equation when h(., x) is the sum of A h(., y)
over the direct successors y of x.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from scipy.optimize import least_squares

from .errors import ContractViolation, NoConvergenceError, NumericError
from .grid import Grid, check_field, sup
from .kernel import Kernel

log = logging.getLogger(__name__)


def _weights(g: Grid, h: np.ndarray) -> np.ndarray:
    # e^{h - max h}: the shift cancels between numerator and denominator.
    return g.weights * np.exp(h - h.max())


def apply_A(kern: Kernel, g: Grid, h) -> np.ndarray:
    h = check_field(g, h, "h")
    K = kern.matrix(g)
    p = _weights(g, h)
    with np.errstate(all="ignore"):
        num = K @ p
        out = np.log(num) - np.log(num[0])
    if not np.all(np.isfinite(out)):
        raise NumericError("A(h) is not finite; the weights underflowed")
    out[0] = 0.0
    return out


def apply_kA(kern: Kernel, g: Grid, k: int, h) -> np.ndarray:
    return k * apply_A(kern, g, h)


def jacobian_A(kern: Kernel, g: Grid, h) -> np.ndarray:
    """Derivative of A at h: entry (i, j) is d(A h)(t_i) / d h(u_j).

    Row 0 vanishes identically and every row sums to zero (shift invariance).
    """
    h = check_field(g, h, "h")
    K = kern.matrix(g)
    p = _weights(g, h)
    num = K @ p
    return p[None, :] * (K / num[:, None] - K[0][None, :] / num[0])


def _newton(kern, g, k, target, h, tol, max_iter):
    """Damped Newton from h; returns (best iterate, its sup residual, converged)."""
    r = apply_kA(kern, g, k, h) - target
    best, best_res = h, sup(r)
    for _ in range(max_iter):
        if sup(r) < tol:
            return h, sup(r), True
        jac = k * jacobian_A(kern, g, h)[1:, 1:]
        step = np.zeros_like(h)
        step[1:] = np.linalg.lstsq(jac, -r[1:], rcond=None)[0]
        norm0 = np.linalg.norm(r)
        lam = 1.0
        while lam > 1e-9:
            cand = h + lam * step
            try:
                rc = apply_kA(kern, g, k, cand) - target
            except NumericError:
                rc = None
            if rc is not None and np.linalg.norm(rc) < norm0:
                break
            lam *= 0.5
        else:
            return best, best_res, False
        h, r = cand, rc
        if sup(r) < best_res:
            best, best_res = h, sup(r)
    return best, best_res, best_res < tol


def invert_kA(kern: Kernel, g: Grid, k: int, target, tol: float = 1e-10,
              max_iter: int = 60, h0=None) -> np.ndarray:
    """Solve k A(h) = target for h with h(0) = 0.

    Damped Newton on the node values h(t_1), ..., h(t_{n-1}); h(t_0) = h(0)
    stays pinned at zero, which removes the constant direction along which A
    is invariant.  The Newton system is solved in the least-squares sense so
    rank-deficient kernels still take the minimum-norm step, and each step is
    halved until the Euclidean residual decreases.  The initial guess is
    ``h0`` when given, else target/k.  Preimages need not be unique; the
    one returned is the one Newton reaches from the initial guess.  If Newton stagnates (typically near a fold where the Jacobian
    degenerates), a trust-region least-squares solve restarts from target/k
    and from 0, and Newton polishes its result.

    The caller is responsible for checking that ``target`` lies in the
    admissible band; unreachable targets end in ``NoConvergenceError``.
    """
    target = check_field(g, target, "target")
    if target[0] != 0.0:
        raise ContractViolation("target must vanish at t=0: every k*A(h) does")
    h0 = target / k if h0 is None else check_field(g, h0, "h0").copy()
    h0[0] = 0.0
    h, res, ok = _newton(kern, g, k, target, h0, tol, max_iter)
    if ok:
        return h
    best, best_res = h, res

    def fun(z):
        return apply_kA(kern, g, k, np.concatenate([[0.0], z]))[1:] - target[1:]

    def jac(z):
        return k * jacobian_A(kern, g, np.concatenate([[0.0], z]))[1:, 1:]

    for start in (h0, g.zeros()):
        try:
            fit = least_squares(fun, start[1:], jac=jac, method="trf", xtol=1e-15, ftol=1e-15,
                                gtol=1e-15, max_nfev=50 * max_iter)
        except NumericError:
            continue
        cand = np.concatenate([[0.0], fit.x])
        cand, cres, cok = _newton(kern, g, k, target, cand, tol, max_iter)
        if cok:
            return cand
        if cres < best_res:
            best, best_res = cand, cres
    raise NoConvergenceError(f"no preimage found; best residual {best_res:.3e}",
                             best=best, residual=best_res)


def lipschitz_ratio(kern: Kernel, g: Grid, f, h) -> float:
    """sup_t |Af - Ah| / sup_t |f - h| for one pair of fields."""
    den = sup(np.asarray(f) - np.asarray(h))
    if den == 0.0:
        raise ContractViolation("fields must differ")
    return sup(apply_A(kern, g, f) - apply_A(kern, g, h)) / den


@dataclass(frozen=True)
class ContractionEstimate:
    """Empirical Lipschitz constants of A in the sup norm.

    ``alpha_pairs`` is the largest difference quotient over the random pairs,
    ``alpha_local`` the largest infinity-norm of the Jacobian (restricted to
    fields pinned at t=0) at the sampled fields, and ``alpha_hat`` their
    maximum.  ``pointwise_ratio`` is the largest |Af(t)-Ag(t)| / |f(t)-g(t)|
    over nodes with |f(t)-g(t)| > 1e-6.  All are lower estimates of the true
    constant on the sampled box, not certificates.
    """

    alpha_hat: float
    alpha_pairs: float
    alpha_local: float
    pointwise_ratio: float
    n_samples: int
    amplitude: float


def estimate_contraction(kern: Kernel, g: Grid, n_samples: int = 500, amplitude: float = 1.0,
                         rng_seed: int = 0) -> ContractionEstimate:
    if n_samples < 1:
        raise ContractViolation("n_samples must be >= 1")
    rng = np.random.default_rng(rng_seed)
    n = g.n_nodes
    pairs = local = pointwise = 0.0
    for _ in range(n_samples):
        f = rng.uniform(-amplitude, amplitude, n)
        h = rng.uniform(-amplitude, amplitude, n)
        f[0] = h[0] = 0.0
        diff = f - h
        adiff = apply_A(kern, g, f) - apply_A(kern, g, h)
        pairs = max(pairs, sup(adiff) / sup(diff))
        mask = np.abs(diff) > 1e-6
        if mask.any():
            pointwise = max(pointwise, float(np.max(np.abs(adiff[mask]) / np.abs(diff[mask]))))
        for field in (f, h):
            jac = jacobian_A(kern, g, field)[:, 1:]
            local = max(local, float(np.abs(jac).sum(axis=1).max()))
    return ContractionEstimate(alpha_hat=max(pairs, local), alpha_pairs=pairs, alpha_local=local,
                               pointwise_ratio=pointwise, n_samples=n_samples,
                               amplitude=float(amplitude))
