"""Global solver for the nonconvex trust-region subproblem.

Minimizes ``g.d + 1/2 d.(D+T)d`` over ``||d|| <= r`` by an adaptive
implicit-explicit iteration: the reciprocal-space diagonal ``D`` is
treated implicitly, the physical-space part ``T`` explicitly, and a
Lagrange multiplier is re-solved each sweep from the secular equation
``phi(lambda) = r^2`` so every iterate stays feasible.  Started from
``d0 = -r g / ||g||`` the iteration converges to the global minimizer
whenever the gradient has a component along the most negative
eigendirection.

A dense eigendecomposition oracle (More-Sorensen characterization,
including the hard case) is provided for testing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .model import HessianOperator, t_norm_bound
from .spectral import SpectralField

DEFAULT_EPS_SUB = 1e-13
DEFAULT_MAX_OUTER = 5000
SECULAR_RTOL = 1e-13
MAX_NEWTON = 100


class SubproblemError(RuntimeError):
    pass


def _abs2(x: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(x):
        return x.real**2 + x.imag**2
    return x * x


def _inner(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.vdot(v, u).real)


def _l2(u: np.ndarray) -> float:
    return float(np.linalg.norm(u.ravel()))


def phi(lam: float, b: np.ndarray, D: np.ndarray, eta: float):
    """Secular function ``sum |b_i|^2 / (1 + eta (D_i + lam))^2`` and slope.

    Equals the squared norm of the implicit update for multiplier ``lam``;
    continuously differentiable, strictly decreasing and convex for
    ``lam >= 0`` whenever ``b != 0``.
    """
    b2 = _abs2(np.asarray(b))
    return _phi_from_b2(lam, b2, np.asarray(D), eta)


def _phi_from_b2(lam: float, b2: np.ndarray, D: np.ndarray, eta: float):
    w = 1.0 + eta * (D + lam)
    val = float(np.sum(b2 / w**2))
    slope = -2.0 * eta * float(np.sum(b2 / w**3))
    return val, slope


def solve_radius_multiplier(
    b: np.ndarray,
    D: np.ndarray,
    eta: float,
    r: float,
    rtol: float = SECULAR_RTOL,
    iterates: Optional[list] = None,
    warm: float = 0.0,
) -> float:
    """Smallest multiplier placing the implicit update inside the radius.

    Returns 0 when ``phi(0) <= r^2``; otherwise the unique positive root
    of ``phi(lam) = r^2``, found by Newton from ``lam = 0``.  Since
    ``phi - r^2`` is convex and decreasing, the Newton iterates increase
    monotonically toward the root; the analytic bracket
    ``lam <= (||b||/r - 1)/eta`` plus a bisection fallback guarantee
    termination.  ``warm`` restarts Newton from a previous multiplier
    when it still lies left of the root (same monotone behaviour).
    """
    if r <= 0:
        raise ValueError("trust-region radius must be positive")
    b2 = _abs2(np.asarray(b))
    D = np.asarray(D)
    r2 = r * r
    lam = 0.0
    if warm > 0.0:
        val, slope = _phi_from_b2(warm, b2, D, eta)
        if val > r2:
            lam = warm
        else:
            val, slope = _phi_from_b2(0.0, b2, D, eta)
    else:
        val, slope = _phi_from_b2(0.0, b2, D, eta)
    if lam == 0.0 and val <= r2:
        return 0.0

    lam_ub = (np.sqrt(float(np.sum(b2))) / r - 1.0) / eta
    if iterates is not None:
        iterates.append(lam)
    for _ in range(MAX_NEWTON):
        if abs(val - r2) <= rtol * r2:
            return lam
        step = (val - r2) / slope  # slope < 0 here, so lam increases
        lam_next = lam - step
        if not np.isfinite(lam_next) or lam_next <= lam:
            break
        lam = min(lam_next, lam_ub)
        if iterates is not None:
            iterates.append(lam)
        val, slope = _phi_from_b2(lam, b2, D, eta)
    if abs(val - r2) <= 1e-12 * r2:
        return lam

    # Bisection fallback on [lam, lam_ub]; phi(lam) > r^2 >= phi(lam_ub).
    lo, hi = lam, max(lam_ub, lam)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val, _ = _phi_from_b2(mid, b2, D, eta)
        if abs(val - r2) <= 1e-12 * r2:
            if iterates is not None:
                iterates.append(mid)
            return mid
        if val > r2:
            lo = mid
        else:
            hi = mid
    raise SubproblemError("secular equation solve failed to converge")


@dataclass
class SubproblemSpec:
    """Inputs of one trust-region subproblem solve."""

    g: SpectralField
    H: HessianOperator
    r: float
    eta: float
    eps_sub: float = DEFAULT_EPS_SUB
    max_outer: int = DEFAULT_MAX_OUTER
    check_descent: bool = False
    descent_a: float = 1.0

    def __post_init__(self):
        if self.r <= 0 or self.eta <= 0:
            raise ValueError("radius and step size must be positive")


@dataclass
class SubproblemResult:
    """Step, multiplier and KKT diagnostics returned by the solver."""

    d: SpectralField
    lam: float
    kkt_residual: float
    iterations: int
    converged: bool
    f_value: float
    step_norm: float
    descent_violation: float = 0.0


def _imex_iterate(
    g: np.ndarray,
    D: np.ndarray,
    apply_t: Callable[[np.ndarray], np.ndarray],
    r: float,
    eta: float,
    eps_sub: float,
    max_outer: int,
    check_descent: bool = False,
    descent_a: float = 1.0,
):
    """Core adaptive implicit-explicit iteration on raw arrays."""
    gnorm = _l2(g)
    if gnorm == 0.0:
        raise ValueError("subproblem gradient is zero; outer loop should stop first")
    d = (-r / gnorm) * g
    Td = apply_t(d)
    eta_g = eta * g
    eta_D = eta * D
    lam = 0.0
    res = np.inf
    f_prev = None
    violation = 0.0
    iterations = 0
    s1 = np.empty_like(d)
    s2 = np.empty_like(d)
    for k in range(1, max_outer + 1):
        iterations = k
        np.multiply(Td, -eta, out=s1)
        s1 += d
        s1 -= eta_g  # s1 = b = d - eta (g + T d)
        lam = solve_radius_multiplier(s1, D, eta, r, warm=lam)
        np.add(eta_D, 1.0 + eta * lam, out=s2)
        np.divide(s1, s2, out=s1)  # s1 = d_next
        Td_next = apply_t(s1)
        np.multiply(D, s1, out=s2)
        s2 += Td_next
        s2 += g  # s2 = g + H d_next
        # || s2 + lam d || via reductions, no extra temporaries
        res = np.sqrt(
            max(
                _inner(s2, s2) + 2.0 * lam * _inner(s2, s1)
                + lam * lam * _inner(s1, s1),
                0.0,
            )
        )
        if check_descent:
            s2 -= g
            f_next = _inner(g, s1) + 0.5 * _inner(s1, s2)
            if f_prev is not None:
                bound = f_prev - descent_a * _l2(s1 - d) ** 2
                violation = max(violation, f_next - bound)
            f_prev = f_next
        d, s1 = s1, d  # rotate buffers; old d becomes scratch
        Td = Td_next
        if res < eps_sub:
            break
    f_val = _inner(g, d) + 0.5 * (_inner(d, D * d) + _inner(d, Td))
    return d, lam, res, iterations, res < eps_sub, f_val, violation


def solve(spec: SubproblemSpec) -> SubproblemResult:
    """Solve the spectral subproblem; non-convergence is flagged, not raised."""
    H = spec.H
    d, lam, res, iters, converged, f_val, violation = _imex_iterate(
        spec.g.coeffs,
        H.D,
        H.matvec_t,
        spec.r,
        spec.eta,
        spec.eps_sub,
        spec.max_outer,
        spec.check_descent,
        spec.descent_a,
    )
    step = SpectralField(spec.g.grid, d, mean_pinned=True)
    return SubproblemResult(
        d=step,
        lam=lam,
        kkt_residual=res,
        iterations=iters,
        converged=converged,
        f_value=f_val,
        step_norm=_l2(d),
        descent_violation=violation,
    )


def solve_dense(
    g: np.ndarray,
    D: np.ndarray,
    T: np.ndarray,
    r: float,
    eta: float,
    eps_sub: float = DEFAULT_EPS_SUB,
    max_outer: int = DEFAULT_MAX_OUTER,
    **kwargs,
):
    """Same iteration on a dense split ``H = diag(D) + T`` (testing path)."""
    g = np.asarray(g, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    d, lam, res, iters, converged, f_val, violation = _imex_iterate(
        g, D, lambda x: T @ x, r, eta, eps_sub, max_outer, **kwargs
    )
    return d, lam, res, iters, converged, f_val


def quadratic_objective(g: np.ndarray, H: np.ndarray, d: np.ndarray) -> float:
    return float(g @ d + 0.5 * d @ (H @ d))


def dense_oracle(g: np.ndarray, H: np.ndarray, r: float):
    """Global minimizer of the dense subproblem via eigendecomposition.

    Implements the More-Sorensen characterization including the hard
    case: either an interior Newton point, a boundary solution with the
    multiplier from the secular equation, or the degenerate fill along
    the bottom eigenvector.
    """
    g = np.asarray(g, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    n = g.shape[0]
    if n > 256:
        raise ValueError("dense oracle is restricted to n <= 256")
    w, Q = np.linalg.eigh(H)
    gh = Q.T @ g
    lam_bar = max(0.0, -float(w[0]))
    scale = max(1.0, float(np.abs(w).max()))

    def coeffs_of(lam):
        denom = w + lam
        dh = np.zeros_like(gh)
        nz = np.abs(denom) > 1e-14 * scale
        dh[nz] = -gh[nz] / denom[nz]
        return dh

    def nrm(lam):
        return float(np.linalg.norm(coeffs_of(lam)))

    if w[0] > 0 and nrm(0.0) <= r:
        lam = 0.0
        dh = coeffs_of(0.0)
    else:
        crit = np.abs(w + lam_bar) <= 1e-12 * scale
        if float(np.linalg.norm(gh[crit])) > 1e-14 * max(1.0, _l2(gh)):
            # ||d(lam)|| decreases from +inf: unique boundary multiplier.
            lam = _secular_root(gh, w, r, lam_bar)
            dh = coeffs_of(lam)
        else:
            lam = lam_bar
            dh = coeffs_of(lam)
            nd = float(np.linalg.norm(dh))
            if lam > 0.0:
                # Hard case: pad with the bottom eigenvector to reach the boundary.
                pad = np.sqrt(max(r * r - nd * nd, 0.0))
                j = int(np.argmax(crit))
                dh[j] += pad
    d = Q @ dh
    return d, float(lam)


def _secular_root(gh, w, r, lam_bar):
    from scipy.optimize import brentq

    def nrm2(lam):
        return float(np.sum(gh**2 / (w + lam) ** 2))

    lo = lam_bar + 1e-14 * max(1.0, lam_bar)
    hi = lam_bar + np.linalg.norm(gh) / r + 1e-14
    while nrm2(lo) <= r * r:
        # push lo toward lam_bar until it brackets (norm -> inf there)
        lo = lam_bar + (lo - lam_bar) * 0.25
        if lo - lam_bar < 1e-300:
            return lam_bar
    lam = brentq(lambda x: 1.0 / r - 1.0 / np.sqrt(nrm2(x)), lo, hi, xtol=1e-15, rtol=8.9e-16)
    # More-Sorensen polish: Newton on 1/r - 1/||d(lam)||, superlinear here.
    for _ in range(3):
        n2 = nrm2(lam)
        n1 = np.sqrt(n2)
        dn2 = -2.0 * float(np.sum(gh**2 / (w + lam) ** 3))
        fval = 1.0 / r - 1.0 / n1
        fp = 0.5 * dn2 / (n1 * n2)
        if fp == 0.0:
            break
        lam_new = lam - fval / fp
        if lam_new <= lam_bar or not np.isfinite(lam_new):
            break
        lam = lam_new
    return float(lam)


def default_eta(H: HessianOperator, mode: str = "fixed", a: float = 1.0) -> float:
    """Step size of the subproblem iteration.

    ``fixed`` is the empirical 0.1; ``safeguarded`` additionally enforces
    the descent condition ``eta <= 1/(||T|| + 2 a)`` using the physical
    max-norm bound on the bulk diagonal.
    """
    if mode == "fixed":
        return 0.1
    if mode == "safeguarded":
        return min(0.1, 1.0 / (t_norm_bound(H) + 2.0 * a))
    raise ValueError(f"unknown eta mode: {mode!r}")
