"""Run configuration: TOML (or JSON) files, schema-validated.

Unknown keys are rejected so a typo cannot silently fall back to a
default.  The grid is specified by an explicit reciprocal matrix ``B``,
a cubic box length ``L``, or one of the named boxes used by the bundled
experiment configs.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field as dc_field, fields as dc_fields
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .driver import TRParams
from .flows import FlowParams

NAMED_BOXES = {
    "2pi": 2.0 * np.pi,
    "2sqrt2pi": 2.0 * np.sqrt(2.0) * np.pi,
    "2sqrt6pi": 2.0 * np.sqrt(6.0) * np.pi,
}

METHODS = ("imex-tr", "sis", "ssis1")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    tau: float
    gamma: float
    M: int
    d: int
    B: np.ndarray
    method: str = "imex-tr"
    tr: TRParams = dc_field(default_factory=TRParams)
    flow: FlowParams = dc_field(default_factory=FlowParams)
    seed_phase: str = "LAM"
    seed_amplitude: float = 0.3
    seed_path: Optional[str] = None
    out: str = "runs/out"
    rng_seed: int = 0
    eigs_m: int = 4
    eigs_tol: float = 1e-8
    sweep_tau: list = dc_field(default_factory=list)
    sweep_gamma: list = dc_field(default_factory=list)
    sweep_candidates: list = dc_field(default_factory=list)
    sweep_warm_start: bool = False
    sweep_jobs: int = 1
    compare_method: str = "sis"
    compare_tol: float = 1e-6


def _reject_unknown(section: dict, allowed, where: str):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{where}]")


def _grid_matrix(grid: dict) -> np.ndarray:
    d = int(grid.get("d", 3))
    given = [k for k in ("B", "L", "box") if k in grid]
    if len(given) != 1:
        raise ConfigError("grid must specify exactly one of B, L or box")
    if "B" in grid:
        B = np.array(grid["B"], dtype=np.float64)
        if B.shape != (d, d):
            raise ConfigError(f"grid.B must be {d}x{d}")
        return B
    if "L" in grid:
        L = float(grid["L"])
    else:
        box = str(grid["box"])
        if box not in NAMED_BOXES:
            raise ConfigError(f"unknown box {box!r}; choose from {sorted(NAMED_BOXES)}")
        L = NAMED_BOXES[box]
    if L <= 0:
        raise ConfigError("box length must be positive")
    return (2.0 * np.pi / L) * np.eye(d)


def _apply_overrides(params, overrides: dict, where: str):
    names = {f.name for f in dc_fields(type(params))}
    _reject_unknown(overrides, names, where)
    for key, value in overrides.items():
        setattr(params, key, value)
    params.__post_init__()
    return params


def parse_config(raw: dict) -> RunConfig:
    _reject_unknown(
        raw, ("model", "grid", "solver", "seed", "run", "eigs", "sweep", "compare"), "root"
    )
    try:
        model_sec = raw["model"]
        grid_sec = raw["grid"]
    except KeyError as exc:
        raise ConfigError(f"missing required section [{exc.args[0]}]") from None
    _reject_unknown(model_sec, ("tau", "gamma"), "model")
    _reject_unknown(grid_sec, ("M", "d", "B", "L", "box"), "grid")

    cfg = RunConfig(
        tau=float(model_sec["tau"]),
        gamma=float(model_sec["gamma"]),
        M=int(grid_sec["M"]),
        d=int(grid_sec.get("d", 3)),
        B=_grid_matrix(grid_sec),
    )

    solver = dict(raw.get("solver", {}))
    _reject_unknown(solver, ("method", "tr", "flow"), "solver")
    cfg.method = str(solver.get("method", "imex-tr"))
    if cfg.method not in METHODS:
        raise ConfigError(f"unknown method {cfg.method!r}; choose from {METHODS}")
    cfg.tr = _apply_overrides(TRParams(), dict(solver.get("tr", {})), "solver.tr")
    cfg.flow = _apply_overrides(FlowParams(), dict(solver.get("flow", {})), "solver.flow")

    seed_sec = dict(raw.get("seed", {}))
    _reject_unknown(seed_sec, ("phase", "amplitude", "path"), "seed")
    cfg.seed_phase = str(seed_sec.get("phase", "LAM"))
    cfg.seed_amplitude = float(seed_sec.get("amplitude", 0.3))
    cfg.seed_path = seed_sec.get("path")

    run_sec = dict(raw.get("run", {}))
    _reject_unknown(run_sec, ("out", "rng_seed"), "run")
    cfg.out = str(run_sec.get("out", cfg.out))
    cfg.rng_seed = int(run_sec.get("rng_seed", 0))

    eigs_sec = dict(raw.get("eigs", {}))
    _reject_unknown(eigs_sec, ("m", "tol"), "eigs")
    cfg.eigs_m = int(eigs_sec.get("m", 4))
    cfg.eigs_tol = float(eigs_sec.get("tol", 1e-8))

    sweep_sec = dict(raw.get("sweep", {}))
    _reject_unknown(sweep_sec, ("tau", "gamma", "candidates", "warm_start", "jobs"), "sweep")
    cfg.sweep_tau = [float(t) for t in sweep_sec.get("tau", [])]
    cfg.sweep_gamma = [float(g) for g in sweep_sec.get("gamma", [])]
    cfg.sweep_candidates = [str(c) for c in sweep_sec.get("candidates", [])]
    cfg.sweep_warm_start = bool(sweep_sec.get("warm_start", False))
    cfg.sweep_jobs = int(sweep_sec.get("jobs", 1))

    compare_sec = dict(raw.get("compare", {}))
    _reject_unknown(compare_sec, ("method", "tol"), "compare")
    cfg.compare_method = str(compare_sec.get("method", "sis"))
    if cfg.compare_method not in ("sis", "ssis1"):
        raise ConfigError("compare.method must be a flow scheme (sis or ssis1)")
    cfg.compare_tol = float(compare_sec.get("tol", 1e-6))
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".json":
        raw = json.loads(path.read_text())
    else:
        with open(path, "rb") as fh:
            try:
                raw = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"malformed TOML in {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table")
    return parse_config(raw)
