"""First-order semi-implicit gradient-flow baselines.

Both schemes treat the reciprocal-space interaction diagonal implicitly
and the bulk nonlinearity explicitly; SSIS1 adds a constant
stabilization shift.  They converge to first-order stationary points
only, which is the behaviour the trust-region driver is measured
against.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import model
from .driver import TraceRow, TRTrace
from .model import ModelParams
from .spectral import SpectralField, laplacian_symbol

logger = logging.getLogger(__name__)


class FlowDivergence(RuntimeError):
    """The discrete flow increased the energy catastrophically."""


@dataclass
class FlowParams:
    """Time step, stabilization and stopping control for the flows."""

    dt: float = 0.1
    stab: Optional[float] = None  # None: t_norm_bound at the initial state
    max_steps: int = 200_000
    grad_tol: float = 1e-10
    record_every: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.stab is not None and self.stab < 0:
            raise ValueError("stabilization must be nonnegative")


@dataclass
class FlowResult:
    trace: TRTrace
    snapshots: dict = dc_field(default_factory=dict)
    steps: int = 0


def _flow_run(
    v0: SpectralField,
    p: ModelParams,
    fp: FlowParams,
    stab: float,
    snapshot_steps=(),
    log_every: int = 20_000,
    monitor=None,
) -> tuple[SpectralField, FlowResult]:
    grid = v0.grid
    zero = (0,) * grid.d
    lam = laplacian_symbol(grid)
    denom = 1.0 + fp.dt * (lam + stab)
    numer_shift = 1.0 + fp.dt * stab
    snapshot_steps = set(int(s) for s in snapshot_steps)

    v = v0.coeffs.copy()
    v[zero] = 0.0
    result = FlowResult(trace=TRTrace())
    rows = result.trace.rows
    energy_prev = None
    n = 0
    grad_inf = np.inf
    energy = np.nan
    t0 = time.perf_counter()
    for n in range(fp.max_steps + 1):
        psi = model._ifft_real(v, grid.N)
        gf = model._fft(model.bulk_d1(psi, p), grid.N)
        gf[zero] = 0.0
        g = lam * v + gf
        g[zero] = 0.0
        grad_inf = float(np.abs(g).max())
        energy = 0.5 * float(np.sum(lam * (v.real**2 + v.imag**2))) + float(
            np.mean(model.bulk(psi, p))
        )
        if energy_prev is not None and energy - energy_prev > 1.0:
            raise FlowDivergence(
                f"energy jumped by {energy - energy_prev:.3e} at step {n}; "
                "reduce dt or increase stabilization"
            )
        energy_prev = energy
        if n in snapshot_steps:
            result.snapshots[n] = SpectralField(grid, v.copy(), mean_pinned=True)

        converged = grad_inf < fp.grad_tol
        if converged or n == fp.max_steps:
            rows.append(TraceRow(n, energy, grad_inf, 0.0, 0.0, np.nan, "flow", 0,
                                 1e3 * (time.perf_counter() - t0)))
            result.trace.converged = converged
            break

        v_next = (numer_shift * v - fp.dt * gf) / denom
        v_next[zero] = 0.0
        if n % fp.record_every == 0:
            step_norm = float(np.linalg.norm(v_next - v))
            rows.append(TraceRow(n, energy, grad_inf, step_norm, 0.0, np.nan,
                                 "flow", 0, 1e3 * (time.perf_counter() - t0)))
            t0 = time.perf_counter()
        if monitor is not None:
            monitor(n, SpectralField(grid, v, mean_pinned=True))
        if log_every and n % log_every == 0:
            logger.info("flow step %7d  E=%+.10e  |g|_inf=%.3e", n, energy, grad_inf)
        v = v_next

    result.steps = n
    result.trace.iterations = n
    result.trace.final_energy = energy
    result.trace.final_grad_inf = grad_inf
    return SpectralField(grid, v, mean_pinned=True), result


def sis_run(
    v0: SpectralField,
    p: ModelParams,
    fp: Optional[FlowParams] = None,
    snapshot_steps=(),
    monitor=None,
) -> tuple[SpectralField, FlowResult]:
    """Semi-implicit scheme: implicit interaction, explicit bulk force."""
    fp = fp or FlowParams()
    return _flow_run(v0, p, fp, stab=0.0, snapshot_steps=snapshot_steps, monitor=monitor)


def ssis1_run(
    v0: SpectralField,
    p: ModelParams,
    fp: Optional[FlowParams] = None,
    snapshot_steps=(),
    monitor=None,
) -> tuple[SpectralField, FlowResult]:
    """Stabilized semi-implicit scheme; reduces to SIS when stab = 0."""
    fp = fp or FlowParams()
    stab = fp.stab
    if stab is None:
        stab = model.t_norm_bound(model.hessian_at(v0, p))
    return _flow_run(v0, p, fp, stab=stab, snapshot_steps=snapshot_steps, monitor=monitor)
