"""Discretized Landau-Brazovskii energy, gradient and split Hessian.

The energy per unit cell is the reciprocal-space interaction term
``G = 1/2 sum_k (1 - |B k|^2)^2 |u_k|^2`` plus the grid average of the
bulk polynomial ``tau/2 psi^2 - gamma/6 psi^3 + psi^4/24``.  The Hessian
splits as ``H = D + T`` with ``D`` diagonal in reciprocal space (the
interaction symbol) and ``T`` diagonal in physical space (the local
curvature of the bulk term); both parts are applied matrix-free with one
FFT pair per product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    ConstraintError,
    Grid,
    GridMismatchError,
    PhysicalField,
    SpectralField,
    _fft,
    _ifft_real,
    laplacian_symbol,
)


@dataclass(frozen=True)
class ModelParams:
    """Reduced temperature and phenomenological cubic coefficient."""

    tau: float
    gamma: float

    def __post_init__(self):
        if not (np.isfinite(self.tau) and np.isfinite(self.gamma)):
            raise ValueError("model parameters must be finite")


def bulk(psi: np.ndarray, p: ModelParams) -> np.ndarray:
    return (p.tau / 2.0) * psi**2 - (p.gamma / 6.0) * psi**3 + psi**4 / 24.0


def bulk_d1(psi: np.ndarray, p: ModelParams) -> np.ndarray:
    return p.tau * psi - (p.gamma / 2.0) * psi**2 + psi**3 / 6.0


def bulk_d2(psi: np.ndarray, p: ModelParams) -> np.ndarray:
    return p.tau - p.gamma * psi + psi**2 / 2.0


def _require_pinned(u: SpectralField):
    if u.mean_pinned:
        return
    if u.coeffs[(0,) * u.grid.d] != 0.0:
        raise ConstraintError(
            "field has a nonzero mean mode; apply project_mean_zero first"
        )


@dataclass
class HessianOperator:
    """Matrix-free Hessian ``H = D + T`` at a linearization point.

    ``D`` holds the interaction symbol (reciprocal-space diagonal) and
    ``gamma_prime`` the physical-space diagonal ``tau - gamma psi +
    psi^2 / 2``.  Immutable once built; safe for concurrent matvecs.
    """

    grid: Grid
    D: np.ndarray
    gamma_prime: np.ndarray
    tau: float

    def _check(self, v: SpectralField):
        if not self.grid.compatible(v.grid):
            raise GridMismatchError("operator and field grids differ")

    def matvec_t(self, coeffs: np.ndarray) -> np.ndarray:
        """Raw bulk-curvature product: multiply in physical space, pin mean."""
        out = _fft(self.gamma_prime * _ifft_real(coeffs, self.grid.N), self.grid.N)
        out[(0,) * self.grid.d] = 0.0
        return out

    def matvec(self, coeffs: np.ndarray) -> np.ndarray:
        """Raw full product ``D coeffs + T coeffs`` (mean pinned)."""
        out = self.matvec_t(coeffs)
        out += self.D * coeffs
        out[(0,) * self.grid.d] = 0.0
        return out

    def apply(self, v: SpectralField) -> SpectralField:
        self._check(v)
        return SpectralField(self.grid, self.matvec(v.coeffs), mean_pinned=True)

    def apply_t(self, v: SpectralField) -> SpectralField:
        self._check(v)
        return SpectralField(self.grid, self.matvec_t(v.coeffs), mean_pinned=True)


def energy(u: SpectralField, p: ModelParams) -> float:
    """Total energy per unit cell; one inverse transform."""
    _require_pinned(u)
    lam = laplacian_symbol(u.grid)
    c = u.coeffs
    interaction = 0.5 * float(np.sum(lam * (c.real**2 + c.imag**2)))
    psi = _ifft_real(c, u.grid.N)
    return interaction + float(np.mean(bulk(psi, p)))


def gradient(u: SpectralField, p: ModelParams) -> SpectralField:
    """Energy gradient in coefficient space, mean mode projected out."""
    _require_pinned(u)
    lam = laplacian_symbol(u.grid)
    psi = _ifft_real(u.coeffs, u.grid.N)
    g = lam * u.coeffs + _fft(bulk_d1(psi, p), u.grid.N)
    g[(0,) * u.grid.d] = 0.0
    return SpectralField(u.grid, g, mean_pinned=True)


def hessian_at(u: SpectralField, p: ModelParams) -> HessianOperator:
    """Split Hessian at ``u``; the reciprocal diagonal does not depend on u."""
    _require_pinned(u)
    psi = _ifft_real(u.coeffs, u.grid.N)
    return HessianOperator(
        grid=u.grid,
        D=laplacian_symbol(u.grid),
        gamma_prime=bulk_d2(psi, p),
        tau=p.tau,
    )


def apply_hessian(H: HessianOperator, v: SpectralField) -> SpectralField:
    return H.apply(v)


def t_norm_bound(H: HessianOperator) -> float:
    """Upper bound on the operator norm of the bulk-curvature part."""
    return float(np.abs(H.gamma_prime).max())


def linearize(u: SpectralField, p: ModelParams):
    """Energy, gradient and split Hessian sharing one inverse transform."""
    _require_pinned(u)
    lam = laplacian_symbol(u.grid)
    c = u.coeffs
    psi = _ifft_real(c, u.grid.N)
    e = 0.5 * float(np.sum(lam * (c.real**2 + c.imag**2))) + float(
        np.mean(bulk(psi, p))
    )
    g = lam * c + _fft(bulk_d1(psi, p), u.grid.N)
    g[(0,) * u.grid.d] = 0.0
    H = HessianOperator(grid=u.grid, D=lam, gamma_prime=bulk_d2(psi, p), tau=p.tau)
    return e, SpectralField(u.grid, g, mean_pinned=True), H


def energy_physical(u: SpectralField, p: ModelParams) -> float:
    """Energy evaluated entirely on the grid (testing cross-check).

    Applies ``(Delta + 1)`` spectrally but accumulates both terms as grid
    averages, exercising the Parseval route independently of ``energy``.
    """
    _require_pinned(u)
    op = (1.0 - u.grid.ksq) * u.coeffs
    w = _ifft_real(op, u.grid.N)
    psi = _ifft_real(u.coeffs, u.grid.N)
    return float(np.mean(0.5 * w**2 + bulk(psi, p)))
