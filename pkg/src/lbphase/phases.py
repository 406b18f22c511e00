"""Ordered-phase seeds and (tau, gamma) phase-diagram sweeps.

The lamellar and hexagonal mode sets and their reciprocal lattices are
the standard initial configurations for the cubic computational boxes;
the BCC, double-gyroid and FDDD sets are literature-standard space-group
mode families scaled onto the unit interaction shell.  Seeds are exact
trigonometric polynomials: a seed field has a handful of nonzero
coefficients, is Hermitian by construction and mean-pinned.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import driver, model, spectrum
from .model import ModelParams
from .spectral import (
    Grid,
    GridError,
    SpectralField,
    build_grid,
    forward,
    PhysicalField,
    project_mean_zero,
    reverse_modes,
)

logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)
SQRT6 = np.sqrt(6.0)

PHASE_NAMES = ("LAM", "HEX", "BCC", "DG", "FDDD", "RANDOM")


@dataclass(frozen=True)
class PhaseSeed:
    """Declarative seed: mode set, reciprocal-lattice convention, scale."""

    name: str
    modes: tuple  # ((k tuple, complex amplitude), ...) with max modulus 1
    B: np.ndarray  # conventional reciprocal matrix
    amplitude: float = 0.3


def _mode_table_from_formula(fn, b_scale: float, M: int = 16) -> tuple:
    """Exact Fourier content of a trigonometric level-set formula."""
    grid = build_grid(M, 3, b_scale * np.eye(3))
    theta = 2.0 * np.pi * np.arange(M) / M
    X, Y, Z = np.meshgrid(theta, theta, theta, indexing="ij")
    u = forward(PhysicalField(grid, fn(X, Y, Z)))
    c = u.coeffs.copy()
    c[(0, 0, 0)] = 0.0
    keep = np.abs(c) > 1e-10 * np.abs(c).max()
    amps = c[keep] / np.abs(c[keep]).max()
    idxs = np.flatnonzero(keep.ravel())
    modes = tuple(
        (grid.index_to_k(int(i)), complex(a)) for i, a in zip(idxs, amps)
    )
    return modes


def _dg_formula(X, Y, Z):
    # Ia-3d double-gyroid approximant: {211} star plus a {220} correction.
    star = (
        np.sin(2 * X) * np.sin(Z) * np.cos(Y)
        + np.sin(2 * Y) * np.sin(X) * np.cos(Z)
        + np.sin(2 * Z) * np.sin(Y) * np.cos(X)
    )
    corr = (
        np.cos(2 * X) * np.cos(2 * Y)
        + np.cos(2 * Y) * np.cos(2 * Z)
        + np.cos(2 * Z) * np.cos(2 * X)
    )
    return 0.8 * star - 0.2 * corr


def _fddd_formula(X, Y, Z):
    # Single arm of the {211} family: the orthorhombic network seed that
    # relaxes into the cubic-cell FDDD basin.
    return np.sin(2 * X) * np.sin(Z) * np.cos(Y)


@lru_cache(maxsize=None)
def seed_catalog() -> dict:
    lam_modes = (((1, 0, 0), 1.0 + 0j), ((-1, 0, 0), 1.0 + 0j))
    hex_modes = tuple(
        (k, 1.0 + 0j)
        for k in (
            (0, 1, -1), (0, -1, 1), (1, 0, -1), (-1, 0, 1), (1, -1, 0), (-1, 1, 0),
        )
    )
    bcc_modes = []
    for a in range(3):
        for s1 in (1, -1):
            for s2 in (1, -1):
                k = [0, 0, 0]
                k[a] = s1
                k[(a + 1) % 3] = s2
                bcc_modes.append((tuple(k), 1.0 + 0j))
    catalog = {
        "LAM": PhaseSeed("LAM", lam_modes, (1 / SQRT2) * np.eye(3)),
        "HEX": PhaseSeed("HEX", hex_modes, (1 / SQRT6) * np.eye(3)),
        "BCC": PhaseSeed("BCC", tuple(bcc_modes), (1 / SQRT2) * np.eye(3)),
        "DG": PhaseSeed(
            "DG", _mode_table_from_formula(_dg_formula, 1 / SQRT6), (1 / SQRT6) * np.eye(3)
        ),
        "FDDD": PhaseSeed(
            "FDDD", _mode_table_from_formula(_fddd_formula, 1 / SQRT6), (1 / SQRT6) * np.eye(3)
        ),
    }
    return catalog


def seed(
    name: str,
    grid: Grid,
    amplitude: float = 0.3,
    rng_seed: int = 0,
) -> SpectralField:
    """Initial configuration of a named phase on ``grid``.

    The field is scaled so its largest coefficient modulus equals
    ``amplitude``.  A warning is emitted when the grid's reciprocal
    matrix differs from the phase's conventional one.
    """
    name = name.upper()
    if name == "RANDOM":
        return _random_seed(grid, amplitude, rng_seed)
    catalog = seed_catalog()
    if name not in catalog:
        raise GridError(f"unknown phase seed {name!r}; choose from {PHASE_NAMES}")
    ps = catalog[name]
    if grid.d != 3:
        raise GridError(f"{name} seed is defined for d=3 grids")
    if not np.allclose(grid.B, ps.B, rtol=1e-9, atol=1e-12):
        warnings.warn(
            f"{name} seed is calibrated for B = {ps.B[0, 0]:.6f} I; "
            "grid uses a different reciprocal lattice",
            stacklevel=2,
        )
    coeffs = np.zeros(grid.shape, dtype=np.complex128)
    for k, amp in ps.modes:
        coeffs.ravel()[grid.k_to_index(k)] = amplitude * amp
    u = SpectralField(grid, coeffs, mean_pinned=True)
    assert np.abs(u.coeffs - np.conj(reverse_modes(u.coeffs))).max() < 1e-12
    return u


def _random_seed(grid: Grid, amplitude: float, rng_seed: int) -> SpectralField:
    rng = np.random.default_rng(rng_seed)
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    band = (np.sqrt(grid.ksq) >= 0.8) & (np.sqrt(grid.ksq) <= 1.2)
    if not band.any():
        raise GridError("no integer modes in the band 0.8 <= |Bk| <= 1.2")
    c = np.where(band, c, 0.0)
    c = 0.5 * (c + np.conj(reverse_modes(c)))
    c[(0,) * grid.d] = 0.0
    peak = np.abs(c).max()
    if peak > 0 and amplitude != 0:
        c *= amplitude / peak
    else:
        c[:] = 0.0
    return SpectralField(grid, c, mean_pinned=True)


@dataclass
class CandidateResult:
    energy: float
    sigma1: float
    classification: str
    converged: bool
    grad_inf: float
    field: Optional[SpectralField] = None


@dataclass
class SweepCell:
    tau: float
    gamma: float
    results: dict = dc_field(default_factory=dict)
    winner: Optional[str] = None


def _candidate_grid(name: str, M: int) -> Grid:
    if name.upper() == "RANDOM":
        return build_grid(M, 3, (1 / SQRT2) * np.eye(3))
    return build_grid(M, 3, seed_catalog()[name.upper()].B)


def _run_candidate(
    name: str,
    tau: float,
    gamma: float,
    M: int,
    tr: driver.TRParams,
    amplitude: float,
    eigs_m: int,
    eigs_tol: float,
    warm_field: Optional[SpectralField],
    rng_seed: int,
) -> CandidateResult:
    grid = _candidate_grid(name, M)
    p = ModelParams(tau, gamma)
    if warm_field is not None and warm_field.grid.compatible(grid):
        v0 = warm_field
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            v0 = seed(name, grid, amplitude, rng_seed)
    try:
        v, trace = driver.run(v0, p, tr)
    except Exception as exc:  # record, keep the cell alive
        logger.error("candidate %s at (%g, %g) failed: %s", name, tau, gamma, exc)
        return CandidateResult(np.nan, np.nan, "failed", False, np.nan)
    report = spectrum.smallest_eigs(model.hessian_at(v, p), m=eigs_m, tol=eigs_tol)
    label = spectrum.classify(report, trace.final_grad_inf, eps=tr.eps)
    if not trace.converged:
        label = "non-stationary"
    return CandidateResult(
        energy=trace.final_energy,
        sigma1=float(report.eigenvalues[0]) if len(report.eigenvalues) else np.nan,
        classification=label,
        converged=trace.converged,
        grad_inf=trace.final_grad_inf,
        field=v,
    )


def _pick_winner(cell: SweepCell, candidates) -> None:
    best = None
    for name in candidates:
        res = cell.results[name]
        if res.classification != "SP-II":
            continue
        if best is None or res.energy < cell.results[best].energy - 1e-12:
            best = name
        elif best is not None and abs(res.energy - cell.results[best].energy) <= 1e-12:
            logger.info(
                "tie at (%g, %g): %s kept over %s by candidate order",
                cell.tau, cell.gamma, best, name,
            )
    cell.winner = best


def _sweep_row(args) -> list:
    (tau, gamma_list, candidates, M, tr, amplitude,
     eigs_m, eigs_tol, warm_start, rng_seed) = args
    cells = []
    warm = {}
    for gamma in gamma_list:
        cell = SweepCell(tau=tau, gamma=gamma)
        for name in candidates:
            res = _run_candidate(
                name, tau, gamma, M, tr, amplitude, eigs_m, eigs_tol,
                warm.get(name) if warm_start else None, rng_seed,
            )
            cell.results[name] = res
            if warm_start and res.classification == "SP-II":
                warm[name] = res.field
        _pick_winner(cell, candidates)
        cells.append(cell)
    return cells


def sweep(
    tau_list,
    gamma_list,
    candidates,
    M: int,
    tr: Optional[driver.TRParams] = None,
    amplitude: float = 0.3,
    eigs_m: int = 4,
    eigs_tol: float = 1e-8,
    warm_start: bool = False,
    jobs: int = 1,
    rng_seed: int = 0,
) -> list:
    """Grid of (tau, gamma) cells, each solved per candidate phase.

    Rows share a fixed tau and may warm-start along increasing gamma; the
    per-cell winner is the lowest-energy candidate that certified as a
    second-order stationary point.  Rows are independent jobs; results
    merge deterministically by cell order.
    """
    tau_list = [float(t) for t in tau_list]
    gamma_list = [float(g) for g in gamma_list]
    candidates = [str(c).upper() for c in candidates]
    if not tau_list or not gamma_list or not candidates:
        raise ValueError("tau, gamma and candidate lists must be nonempty")
    for c in candidates:
        if c == "RANDOM":
            continue
        if c not in seed_catalog():
            raise ValueError(f"unknown candidate {c!r}")
    tr = tr or driver.TRParams()
    rows = [
        (tau, gamma_list, candidates, M, tr, amplitude,
         eigs_m, eigs_tol, warm_start, rng_seed)
        for tau in tau_list
    ]
    if jobs > 1 and len(rows) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_row = list(pool.map(_sweep_row, rows))
    else:
        per_row = [_sweep_row(r) for r in rows]
    cells = [cell for row in per_row for cell in row]
    return cells
