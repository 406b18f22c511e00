"""Outer trust-region loop with implicit-explicit subproblem solves.

Each iteration solves the subproblem globally, scores the step by the
cubic-scaled decrease ratio ``rho = (E(v) - E(v+s)) / ||s||^3`` and then
either accepts (growing the radius up to a running cap), contracts the
radius through shifted linear solves, or caps the radius at
``lambda / mu``.  Termination is on the max coefficient modulus of the
gradient.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, minres

from . import model, subproblem
from .model import HessianOperator, ModelParams
from .spectral import SpectralField, dot, norm, norm_inf

logger = logging.getLogger(__name__)


class ShiftedSolveError(RuntimeError):
    """The shifted system could not be solved; the shift is too small."""


@dataclass
class TRParams:
    """Outer-loop constants (defaults are the standard trust-region values)."""

    theta: float = 1e-4
    gamma_C: float = 0.5
    gamma_E: float = 2.0
    gamma_lambda: float = 1.5
    mu_lo: float = 1.0
    mu_hi: float = 1e5
    mu0: float = 1.0
    r0: float = 1.0
    nu0: float = 5.0
    eps: float = 1e-10
    max_iters: int = 5000
    eta_mode: str = "fixed"
    eta_a: float = 1.0
    eps_sub: float = subproblem.DEFAULT_EPS_SUB
    sub_max_outer: int = subproblem.DEFAULT_MAX_OUTER

    def __post_init__(self):
        if not (0.0 < self.theta < 1.0):
            raise ValueError("theta must lie in (0, 1)")
        if not (0.0 < self.gamma_C < 1.0 < self.gamma_E):
            raise ValueError("need 0 < gamma_C < 1 < gamma_E")
        if self.gamma_lambda <= 1.0:
            raise ValueError("gamma_lambda must exceed 1")
        if not (0.0 < self.mu_lo <= self.mu_hi):
            raise ValueError("need 0 < mu_lo <= mu_hi")
        if self.mu0 < self.mu_lo:
            raise ValueError("mu0 must be at least mu_lo")
        if not (0.0 < self.r0 <= self.nu0):
            raise ValueError("need 0 < r0 <= nu0")
        if self.eps <= 0:
            raise ValueError("eps must be positive")


@dataclass
class TraceRow:
    """One outer iteration: state at entry plus the decision taken."""

    iter: int
    energy: float
    grad_inf: float
    step_norm: float
    lam: float
    rho: float
    branch: str
    sub_iters: int
    ms: float


@dataclass
class TRTrace:
    rows: list = dc_field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    final_energy: float = np.nan
    final_grad_inf: float = np.nan


def solve_shifted(
    H: HessianOperator,
    shift: float,
    g: SpectralField,
    rtol: float = 1e-10,
    budget: Optional[int] = None,
) -> SpectralField:
    """Solve ``(H + shift I) s = -g`` matrix-free on the pinned subspace.

    Uses MINRES (symmetric, possibly indefinite) on the real/imaginary
    stacking of the coefficients, preconditioned by the elementwise
    inverse of ``D + shift + |tau|``.  Raises ShiftedSolveError when the
    residual contract ``||(H+shift)s + g|| <= rtol ||g||`` is not met
    within the iteration budget, in which case the caller escalates the
    shift.
    """
    grid = H.grid
    N = grid.N
    shape = grid.shape
    if budget is None:
        budget = max(50, int(10 * np.sqrt(N)))

    def _pack(c):
        return np.concatenate([c.real.ravel(), c.imag.ravel()])

    def _unpack(z):
        return z[:N].reshape(shape) + 1j * z[N:].reshape(shape)

    zero = (0,) * grid.d

    def matvec(z):
        c = _unpack(z)
        out = H.matvec(c) + shift * c
        out[zero] = 0.0
        return _pack(out)

    diag = H.D + shift + abs(H.tau)
    diag = np.maximum(diag, 1e-30)
    inv = 1.0 / diag

    def precond(z):
        c = _unpack(z) * inv
        return _pack(c)

    A = LinearOperator((2 * N, 2 * N), matvec=matvec, dtype=np.float64)
    M = LinearOperator((2 * N, 2 * N), matvec=precond, dtype=np.float64)
    rhs = _pack(-g.coeffs)
    x, info = minres(A, rhs, rtol=min(rtol / 10.0, 1e-11), maxiter=budget, M=M)
    s = _unpack(x)
    s[zero] = 0.0
    resid = np.linalg.norm(H.matvec(s) + shift * s + g.coeffs)
    if info != 0 or resid > rtol * np.linalg.norm(g.coeffs):
        raise ShiftedSolveError(
            f"shifted solve stalled (info={info}, resid={resid:.3e}); shift too small"
        )
    return SpectralField(grid, s, mean_pinned=True)


def _solve_shifted_escalating(H, shift, g, tp: TRParams, max_escalations: int = 20):
    """Shifted solve with geometric shift escalation on failure."""
    lam = shift
    for _ in range(max_escalations + 1):
        try:
            return lam, solve_shifted(H, lam, g)
        except ShiftedSolveError:
            lam *= tp.gamma_lambda
    raise ShiftedSolveError(
        f"shifted solve failed after {max_escalations} escalations from {shift:.3e}"
    )


def contract(
    tp: TRParams,
    H: HessianOperator,
    g: SpectralField,
    s_j: SpectralField,
    lambda_j: float,
    snorm_j: float,
) -> float:
    """Radius-shrinking procedure invoked when ``rho < theta``.

    Both branches probe shifted Newton steps ``(H + lam I) s = -g`` and
    return a radius tied to their length so the next subproblem lands in
    a regularized regime.
    """
    gnorm = norm(g)
    if lambda_j < tp.mu_lo * snorm_j:
        lam_hat = lambda_j + np.sqrt(tp.mu_lo * gnorm)
        lam_hat, s = _solve_shifted_escalating(H, lam_hat, g, tp)
        snorm = norm(s)
        if lam_hat / snorm <= tp.mu_hi:
            return snorm
        # Bisect on the monotone map lam -> lam/||s(lam)|| until it lands
        # in [mu_lo, mu_hi]; a failed probe means the shift is still below
        # the definiteness threshold, so it tightens the lower end.
        lo, hi = lambda_j, lam_hat
        snorm_hi = snorm
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            try:
                s_mid = solve_shifted(H, mid, g)
            except ShiftedSolveError:
                lo = mid
                continue
            ratio = mid / norm(s_mid)
            if ratio < tp.mu_lo:
                lo = mid
            elif ratio > tp.mu_hi:
                hi = mid
                snorm_hi = norm(s_mid)
            else:
                return norm(s_mid)
        logger.warning("contract bisection did not land in [mu_lo, mu_hi]")
        return snorm_hi
    lam_tilde, s = _solve_shifted_escalating(H, tp.gamma_lambda * lambda_j, g, tp)
    snorm = norm(s)
    if snorm >= tp.gamma_C * snorm_j:
        return snorm
    return tp.gamma_C * snorm


def run(
    v0: SpectralField,
    p: ModelParams,
    tp: Optional[TRParams] = None,
    log_every: int = 50,
    monitor=None,
) -> tuple[SpectralField, TRTrace]:
    """IMEX trust-region outer loop from a mean-pinned initial state."""
    tp = tp or TRParams()
    v = v0.copy()
    r = tp.r0
    nu = tp.nu0
    mu = tp.mu0
    last_rho = None
    trace = TRTrace()

    energy_v, g, H = model.linearize(v, p)
    for j in range(tp.max_iters):
        t0 = time.perf_counter()
        ginf = norm_inf(g)
        if ginf < tp.eps:
            trace.converged = True
            break

        eta = subproblem.default_eta(H, tp.eta_mode, tp.eta_a)
        spec = subproblem.SubproblemSpec(
            g=g, H=H, r=r, eta=eta,
            eps_sub=tp.eps_sub, max_outer=tp.sub_max_outer,
        )
        result = subproblem.solve(spec)
        s, lam, snorm = result.d, result.lam, result.step_norm

        if j > 0 and last_rho is not None and last_rho < tp.theta and snorm > 0:
            mu = max(mu, lam / snorm)

        if snorm < 1e-14:
            # Null step at numerical stationarity: re-test the gradient
            # next sweep instead of forming the singular ratio.
            trace.rows.append(TraceRow(j, energy_v, ginf, snorm, lam, np.nan,
                                       "null", result.iterations,
                                       1e3 * (time.perf_counter() - t0)))
            last_rho = None
            continue

        energy_trial = model.energy(v + s, p)
        rho = (energy_v - energy_trial) / snorm**3
        solver_failed = not result.converged

        if (not solver_failed) and rho >= tp.theta and (
            lam <= mu * snorm or snorm >= nu * (1.0 - 1e-12)
        ):
            branch = "accept"
            v = v + s
            nu = max(nu, tp.gamma_E * snorm)
            r = min(nu, max(r, tp.gamma_E * snorm))
            mu = max(mu, lam / snorm)
            energy_next = energy_trial
        elif solver_failed or rho < tp.theta:
            branch = "contract"
            r = min(nu, contract(tp, H, g, s, lam, snorm))
            energy_next = energy_v
        else:
            branch = "cap"
            r = min(nu, lam / mu)
            energy_next = energy_v

        trace.rows.append(TraceRow(j, energy_v, ginf, snorm, lam, rho, branch,
                                   result.iterations,
                                   1e3 * (time.perf_counter() - t0)))
        last_rho = rho if not solver_failed else -np.inf
        if branch == "accept":
            energy_v, g, H = model.linearize(v, p)
        if monitor is not None:
            monitor(j, v)
        if log_every and j % log_every == 0:
            logger.info(
                "iter %5d  E=%+.10e  |g|_inf=%.3e  r=%.3e  %s",
                j, energy_v, ginf, r, branch,
            )

    trace.iterations = len(trace.rows)
    trace.final_energy = energy_v
    trace.final_grad_inf = norm_inf(g)
    if trace.converged:
        logger.info(
            "converged in %d iterations: E=%+.10e  |g|_inf=%.3e",
            trace.iterations, trace.final_energy, trace.final_grad_inf,
        )
    else:
        logger.warning(
            "max_iters reached: E=%+.10e  |g|_inf=%.3e",
            trace.final_energy, trace.final_grad_inf,
        )
    return v, trace
