"""Artifact export: field dumps, trace/sweep CSV files and VTK output.

A field dump is a raw little-endian float64 array of the physical values
(x varying fastest) plus a JSON sidecar carrying the grid, the model
parameters and the energy, so a dump alone is enough to rebuild the
state and re-certify it.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import ModelParams
from .spectral import Grid, PhysicalField, build_grid

TRACE_HEADER = "iter,energy,grad_inf,step_norm,lambda,rho,branch,sub_iters,ms"


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def dump_field(base, psi: PhysicalField, p: ModelParams, energy: float) -> Path:
    """Write ``<base>.f64`` and ``<base>.json``; returns the binary path."""
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    raw = np.asarray(psi.values, dtype="<f8").ravel(order="F")
    bin_path = base.with_suffix(".f64")
    bin_path.write_bytes(raw.tobytes())
    meta = {
        "M": psi.grid.M,
        "d": psi.grid.d,
        "A": psi.grid.A.tolist(),
        "B": psi.grid.B.tolist(),
        "tau": p.tau,
        "gamma": p.gamma,
        "energy": energy,
    }
    base.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")
    return bin_path


def load_field(base):
    """Read a dump back; returns (PhysicalField, metadata dict)."""
    base = Path(base)
    if base.suffix in (".f64", ".json"):
        base = base.with_suffix("")
    meta = json.loads(base.with_suffix(".json").read_text())
    grid = build_grid(meta["M"], meta["d"], np.array(meta["B"]))
    raw = np.frombuffer(base.with_suffix(".f64").read_bytes(), dtype="<f8")
    if raw.size != grid.N:
        raise ValueError(f"dump holds {raw.size} values, grid expects {grid.N}")
    values = raw.reshape(grid.shape, order="F")
    return PhysicalField(grid, values.copy()), meta


def write_vtk(path, psi: PhysicalField) -> Path:
    """Legacy-VTK structured-points export for visualization."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = psi.grid
    dims = list(grid.shape) + [1] * (3 - grid.d)
    spacing = [grid.A[i, i] / grid.M if i < grid.d else 1.0 for i in range(3)]
    lines = [
        "# vtk DataFile Version 3.0",
        "order parameter",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}",
        "ORIGIN 0 0 0",
        f"SPACING {spacing[0]:.12g} {spacing[1]:.12g} {spacing[2]:.12g}",
        f"POINT_DATA {grid.N}",
        "SCALARS psi double 1",
        "LOOKUP_TABLE default",
    ]
    lines.extend(format(v, ".12g") for v in psi.values.ravel(order="F"))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_trace_csv(path, rows) -> Path:
    """Outer-loop or flow trace in the shared schema."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = [TRACE_HEADER]
    for r in rows:
        out.append(
            ",".join(
                [
                    str(r.iter),
                    _fmt(r.energy),
                    _fmt(r.grad_inf),
                    _fmt(r.step_norm),
                    _fmt(r.lam),
                    _fmt(r.rho),
                    r.branch,
                    str(r.sub_iters),
                    format(r.ms, ".3f"),
                ]
            )
        )
    path.write_text("\n".join(out) + "\n")
    return path


def write_eig_trace_csv(path, rows) -> Path:
    """Eigenvalue history rows: (iter, sigma_1, ..., sigma_m)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        raise ValueError("no eigenvalue rows to write")
    m = len(rows[0][1])
    header = "iter," + ",".join(f"sigma{i + 1}" for i in range(m))
    out = [header]
    for it, sigmas in rows:
        out.append(str(it) + "," + ",".join(_fmt(float(s)) for s in sigmas))
    path.write_text("\n".join(out) + "\n")
    return path


def write_sweep_csv(path, cells) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = ["tau,gamma,candidate,energy,sigma1,class,winner"]
    for cell in cells:
        for name, res in cell.results.items():
            out.append(
                ",".join(
                    [
                        _fmt(cell.tau),
                        _fmt(cell.gamma),
                        name,
                        _fmt(res.energy),
                        _fmt(res.sigma1),
                        res.classification,
                        "1" if cell.winner == name else "0",
                    ]
                )
            )
    path.write_text("\n".join(out) + "\n")
    return path


def write_summary(path, summary: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return path
