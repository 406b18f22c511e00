"""Matrix-free toolkit for (meta-)stable phases of the Landau-Brazovskii
free energy: an implicit-explicit trust-region solver with certified
second-order stationarity, first-order flow baselines and phase-diagram
sweeps."""

from .driver import TRParams, TRTrace, run
from .flows import FlowParams, sis_run, ssis1_run
from .model import (
    HessianOperator,
    ModelParams,
    apply_hessian,
    energy,
    gradient,
    hessian_at,
    t_norm_bound,
)
from .phases import PhaseSeed, SweepCell, seed, sweep
from .spectral import (
    Grid,
    PhysicalField,
    SpectralField,
    build_grid,
    cubic_grid,
    dot,
    forward,
    inverse,
    laplacian_symbol,
    norm,
    norm_inf,
    project_mean_zero,
)
from .spectrum import SpectrumReport, bottom_direction_overlap, classify, smallest_eigs
from .subproblem import (
    SubproblemResult,
    SubproblemSpec,
    default_eta,
    dense_oracle,
    phi,
    solve,
    solve_radius_multiplier,
)

__version__ = "0.1.0"

__all__ = [
    "Grid", "PhysicalField", "SpectralField", "build_grid", "cubic_grid",
    "forward", "inverse", "laplacian_symbol", "project_mean_zero", "dot",
    "norm", "norm_inf",
    "ModelParams", "HessianOperator", "energy", "gradient", "hessian_at",
    "apply_hessian", "t_norm_bound",
    "SubproblemSpec", "SubproblemResult", "phi", "solve_radius_multiplier",
    "solve", "dense_oracle", "default_eta",
    "TRParams", "TRTrace", "run",
    "FlowParams", "sis_run", "ssis1_run",
    "SpectrumReport", "smallest_eigs", "classify", "bottom_direction_overlap",
    "PhaseSeed", "seed", "sweep", "SweepCell",
    "__version__",
]
