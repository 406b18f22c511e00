"""Command-line entry points.

Subcommands: ``solve`` (run a solver, dump trace/field/summary),
``seed`` (emit an initial-condition dump), ``eigs`` (spectrum of a
dumped field), ``sweep`` (phase-diagram grid) and ``compare``
(first-order stages restarted under the trust-region solver).  Progress
goes to standard error; machine-readable artifacts live under the
output directory.  Exit codes: 0 second-order stationary point, 1
config/IO error, 2 saddle or non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import driver, flows, model, phases, spectrum
from .config import ConfigError, RunConfig, load_config
from .fieldio import (
    dump_field,
    load_field,
    write_eig_trace_csv,
    write_summary,
    write_sweep_csv,
    write_trace_csv,
    write_vtk,
)
from .model import ModelParams
from .spectral import SpectralField, build_grid, forward, inverse, norm_inf, project_mean_zero

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_initial(cfg: RunConfig, grid) -> SpectralField:
    if cfg.seed_path:
        psi, _meta = load_field(cfg.seed_path)
        if psi.grid.M != grid.M or psi.grid.d != grid.d:
            raise ConfigError("seed dump grid does not match configured grid")
        return project_mean_zero(forward(psi))
    return phases.seed(cfg.seed_phase, grid, cfg.seed_amplitude, cfg.rng_seed)


def _certify(v: SpectralField, p: ModelParams, cfg: RunConfig, eps: float):
    g = model.gradient(v, p)
    report = spectrum.smallest_eigs(
        model.hessian_at(v, p), m=cfg.eigs_m, tol=cfg.eigs_tol, seed=cfg.rng_seed
    )
    label = spectrum.classify(report, norm_inf(g), eps=eps)
    return report, label, norm_inf(g)


def _run_solver(cfg: RunConfig, v0: SpectralField, p: ModelParams, monitor=None):
    if cfg.method == "imex-tr":
        v, trace = driver.run(v0, p, cfg.tr, monitor=monitor)
        return v, trace, cfg.tr.eps
    flow = flows.sis_run if cfg.method == "sis" else flows.ssis1_run
    v, res = flow(v0, p, cfg.flow, monitor=monitor)
    return v, res.trace, cfg.flow.grad_tol


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg.out = args.out
    if args.method:
        cfg.method = args.method
    if args.seed is not None:
        cfg.rng_seed = args.seed
    out = Path(cfg.out)
    grid = build_grid(cfg.M, cfg.d, cfg.B)
    p = ModelParams(cfg.tau, cfg.gamma)
    v0 = _build_initial(cfg, grid)

    eig_rows = []
    monitor = None
    if args.eig_every:
        def monitor(it, v):
            if it % args.eig_every == 0:
                rep = spectrum.smallest_eigs(
                    model.hessian_at(v, p), m=cfg.eigs_m, tol=cfg.eigs_tol,
                    seed=cfg.rng_seed,
                )
                eig_rows.append((it, list(rep.eigenvalues)))

    t0 = time.perf_counter()
    v, trace, eps = _run_solver(cfg, v0, p, monitor=monitor)
    elapsed = time.perf_counter() - t0
    report, label, grad_inf = _certify(v, p, cfg, eps)

    write_trace_csv(out / "trace.csv", trace.rows)
    psi = inverse(v)
    dump_field(out / "field", psi, p, trace.final_energy)
    if args.vtk:
        write_vtk(out / "field.vtk", psi)
    if eig_rows:
        write_eig_trace_csv(out / "eigtrace.csv", eig_rows)
    summary = {
        "method": cfg.method,
        "tau": cfg.tau,
        "gamma": cfg.gamma,
        "M": cfg.M,
        "d": cfg.d,
        "energy": trace.final_energy,
        "grad_inf": grad_inf,
        "sigma": [float(s) for s in report.eigenvalues],
        "eig_residuals": [float(r) for r in report.residuals],
        "classification": label,
        "converged": bool(trace.converged),
        "iterations": trace.iterations,
        "elapsed_s": round(elapsed, 3),
    }
    write_summary(out / "summary.json", summary)
    logger.info(
        "%s: E=%+.10e  |g|_inf=%.3e  sigma1=%.3e  %s",
        cfg.method, trace.final_energy, grad_inf,
        report.eigenvalues[0] if len(report.eigenvalues) else float("nan"), label,
    )
    return 0 if (label == "SP-II" and trace.converged) else 2


def cmd_seed(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg.out = args.out
    if args.seed is not None:
        cfg.rng_seed = args.seed
    grid = build_grid(cfg.M, cfg.d, cfg.B)
    p = ModelParams(cfg.tau, cfg.gamma)
    v0 = _build_initial(cfg, grid)
    psi = inverse(v0)
    dump_field(Path(cfg.out) / "field", psi, p, model.energy(v0, p))
    logger.info("seed %s written to %s", cfg.seed_phase, cfg.out)
    return 0


def cmd_eigs(args) -> int:
    psi, meta = load_field(args.field)
    if args.config:
        cfg = load_config(args.config)
        p = ModelParams(cfg.tau, cfg.gamma)
        m, tol = cfg.eigs_m, cfg.eigs_tol
    else:
        p = ModelParams(meta["tau"], meta["gamma"])
        m, tol = 4, 1e-8
    if args.m:
        m = args.m
    u = project_mean_zero(forward(psi))
    g = model.gradient(u, p)
    report = spectrum.smallest_eigs(model.hessian_at(u, p), m=m, tol=tol)
    label = spectrum.classify(report, norm_inf(g))
    print(f"energy        {model.energy(u, p):+.10e}")
    print(f"grad_inf      {norm_inf(g):.3e}")
    for i, (s, r) in enumerate(zip(report.eigenvalues, report.residuals)):
        print(f"sigma{i + 1}        {s:+.10e}   (residual {r:.2e})")
    print(f"classification {label}")
    if args.out:
        write_summary(
            Path(args.out) / "eigs.json",
            {
                "sigma": [float(s) for s in report.eigenvalues],
                "residuals": [float(r) for r in report.residuals],
                "grad_inf": norm_inf(g),
                "classification": label,
                "converged": bool(report.converged),
            },
        )
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg.out = args.out
    jobs = args.jobs or cfg.sweep_jobs
    if not (cfg.sweep_tau and cfg.sweep_gamma and cfg.sweep_candidates):
        raise ConfigError("sweep requires nonempty tau, gamma and candidate lists")
    out = Path(cfg.out)
    cells = phases.sweep(
        cfg.sweep_tau,
        cfg.sweep_gamma,
        cfg.sweep_candidates,
        M=cfg.M,
        tr=cfg.tr,
        amplitude=cfg.seed_amplitude,
        eigs_m=cfg.eigs_m,
        eigs_tol=cfg.eigs_tol,
        warm_start=cfg.sweep_warm_start,
        jobs=jobs,
        rng_seed=cfg.rng_seed,
    )
    write_sweep_csv(out / "sweep.csv", cells)
    for cell in cells:
        if cell.winner is None:
            continue
        res = cell.results[cell.winner]
        if res.field is None:
            continue
        base = out / f"winner_tau{cell.tau:+.4f}_gamma{cell.gamma:+.4f}"
        dump_field(
            base, inverse(res.field), ModelParams(cell.tau, cell.gamma), res.energy
        )
    n_sp2 = sum(1 for c in cells if c.winner is not None)
    logger.info("sweep finished: %d/%d cells with an SP-II winner", n_sp2, len(cells))
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg.out = args.out
    out = Path(cfg.out)
    grid = build_grid(cfg.M, cfg.d, cfg.B)
    p = ModelParams(cfg.tau, cfg.gamma)
    v0 = _build_initial(cfg, grid)
    flow = flows.sis_run if cfg.compare_method == "sis" else flows.ssis1_run

    v_end, res = flow(v0, p, cfg.flow)
    mid_step = res.steps // 2
    stages = {"initial": v0, "converged": v_end}
    if mid_step > 0:
        _, res_mid = flow(v0, p, cfg.flow, snapshot_steps=(mid_step,))
        stages["intermediate"] = res_mid.snapshots[mid_step]

    results = {}
    for stage in ("initial", "intermediate", "converged"):
        if stage not in stages:
            continue
        v, trace = driver.run(stages[stage], p, cfg.tr)
        report, label, grad_inf = _certify(v, p, cfg, cfg.tr.eps)
        write_trace_csv(out / f"compare_{stage}.csv", trace.rows)
        results[stage] = {
            "flow_step": 0 if stage == "initial" else (
                mid_step if stage == "intermediate" else res.steps
            ),
            "start_energy": model.energy(stages[stage], p),
            "final_energy": trace.final_energy,
            "grad_inf": grad_inf,
            "classification": label,
            "converged": bool(trace.converged),
        }
        logger.info(
            "stage %-12s -> E=%+.10e (%s)", stage, trace.final_energy, label
        )

    energies = [r["final_energy"] for r in results.values()]
    spread = max(energies) - min(energies)
    all_sp2 = all(r["classification"] == "SP-II" for r in results.values())
    agree = spread <= cfg.compare_tol and all_sp2
    write_summary(
        out / "compare.json",
        {
            "flow_method": cfg.compare_method,
            "flow_steps": res.steps,
            "stages": results,
            "energy_spread": spread,
            "tolerance": cfg.compare_tol,
            "agree": bool(agree),
        },
    )
    logger.info("energy spread across stages: %.3e (tol %.1e)", spread, cfg.compare_tol)
    return 0 if agree else 2


def build_parser() -> _Parser:
    parser = _Parser(prog="lbphase", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="TOML or JSON run config")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed override")
        sp.add_argument("--quiet", action="store_true", help="suppress progress logs")

    sp = sub.add_parser("solve", help="run a solver and certify the result")
    common(sp)
    sp.add_argument("--method", choices=("imex-tr", "sis", "ssis1"))
    sp.add_argument("--vtk", action="store_true", help="also write a VTK file")
    sp.add_argument("--eig-every", type=int, default=0, metavar="N",
                    help="record the smallest eigenvalues every N iterations")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("seed", help="emit an initial-condition dump")
    common(sp)
    sp.set_defaults(func=cmd_seed)

    sp = sub.add_parser("eigs", help="spectrum report for a dumped field")
    sp.add_argument("--field", required=True, help="dump base path (no extension)")
    sp.add_argument("--m", type=int, default=0, help="number of eigenvalues")
    sp.add_argument("--config", default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_eigs)

    sp = sub.add_parser("sweep", help="phase-diagram sweep over (tau, gamma)")
    common(sp)
    sp.add_argument("--jobs", type=int, default=0, help="worker processes")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("compare", help="restart the TR solver from flow stages")
    common(sp)
    sp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="[%(asctime)s] %(message)s",
        datefmt="%H:%M:%S",
    )
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
