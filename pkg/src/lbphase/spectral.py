"""Periodic grids, discrete Fourier transforms and Hermitian spectral fields.

The optimization variable throughout the package is a complex array of
Fourier coefficients with Hermitian symmetry (the transform of a real
field) whose zero mode is pinned to enforce mass conservation.  The
forward transform carries the 1/N factor, so coefficients equal cell
averages of ``f(x) exp(-i (B k) . x)`` and the inverse transform is a
plain mode sum.  All algorithmic inner products and norms are taken in
coefficient space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as _sfft

TWO_PI = 2.0 * np.pi

#: max-norm tolerance for the imaginary residue of an inverse transform
IMAG_RESIDUE_TOL = 1e-10


class GridError(ValueError):
    """Invalid grid construction parameters."""


class GridMismatchError(ValueError):
    """Fields built on incompatible grids were combined."""


class SymmetryError(ValueError):
    """A spectral field violates Hermitian symmetry."""


class ConstraintError(ValueError):
    """The zero-mean (mass conservation) constraint is violated."""


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid on a Bravais cell.

    ``A`` maps fractional coordinates to physical ones (grid point i sits
    at ``A @ (i / M)``) and the reciprocal matrix satisfies
    ``A @ B.T = 2 pi I``.  Physical wavevectors are ``B @ k`` for integer
    ``k`` in the standard DFT layout ``0, 1, ..., M/2-1, -M/2, ..., -1``
    per axis; the flat index of a mode is its C-order position in the
    ``(M,)*d`` coefficient array, so the index of ``k = 0`` is 0.

    Immutable after construction; safe to share across threads.
    """

    d: int
    M: int
    A: np.ndarray
    B: np.ndarray
    N: int = field(init=False)
    shape: tuple = field(init=False)

    def __post_init__(self):
        shape = (self.M,) * self.d
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "N", self.M**self.d)

        axis_k = (np.fft.fftfreq(self.M) * self.M).astype(np.int64)
        mesh = np.meshgrid(*([axis_k] * self.d), indexing="ij")
        k_int = np.stack(mesh)  # (d,) + shape integer wavevectors
        q = np.einsum("ab,b...->a...", self.B, k_int.astype(np.float64))
        ksq = np.einsum("a...,a...->...", q, q)  # |B k|^2

        for arr in (k_int, ksq, self.A, self.B):
            arr.flags.writeable = False
        object.__setattr__(self, "k_int", k_int)
        object.__setattr__(self, "ksq", ksq)

    def index_to_k(self, i: int) -> tuple:
        """Integer wavevector of flat (C-order) coefficient index ``i``."""
        multi = np.unravel_index(i, self.shape)
        return tuple(int(m if m < self.M // 2 else m - self.M) for m in multi)

    def k_to_index(self, k) -> int:
        """Flat coefficient index of integer wavevector ``k``."""
        k = np.asarray(k, dtype=np.int64)
        if k.shape != (self.d,):
            raise GridError(f"wavevector must have {self.d} components, got {k.shape}")
        if np.any(k < -self.M // 2) or np.any(k >= self.M // 2):
            raise GridError(f"wavevector {tuple(k)} outside [-M/2, M/2) for M={self.M}")
        return int(np.ravel_multi_index(tuple(k % self.M), self.shape))

    def compatible(self, other: "Grid") -> bool:
        return self is other or (
            self.d == other.d
            and self.M == other.M
            and np.allclose(self.B, other.B, rtol=0, atol=1e-12)
        )


def build_grid(M: int, d: int, B) -> Grid:
    """Construct a periodic grid from the reciprocal matrix ``B``.

    ``M`` must be even and at least 4 (powers of two recommended for the
    FFT); ``B`` must be nonsingular.  The Bravais matrix is recovered as
    ``A = 2 pi B^{-T}``.
    """
    if int(M) != M or M < 4 or M % 2 != 0:
        raise GridError(f"M must be an even integer >= 4, got {M}")
    if d not in (2, 3):
        raise GridError(f"spatial dimension must be 2 or 3, got {d}")
    B = np.array(B, dtype=np.float64)
    if B.shape != (d, d) or not np.all(np.isfinite(B)):
        raise GridError(f"B must be a finite {d}x{d} matrix")
    det = np.linalg.det(B)
    if abs(det) < 1e-12 * max(1.0, np.abs(B).max() ** d):
        raise GridError("B is singular")
    A = TWO_PI * np.linalg.inv(B).T
    grid = Grid(d=int(d), M=int(M), A=A, B=B)
    assert np.allclose(grid.A @ grid.B.T, TWO_PI * np.eye(d), rtol=0, atol=1e-12)
    return grid


def cubic_grid(M: int, d: int, L: float) -> Grid:
    """Grid for the cubic box ``[0, L]^d`` (so ``B = (2 pi / L) I``)."""
    return build_grid(M, d, (TWO_PI / L) * np.eye(d))


@dataclass
class PhysicalField:
    """Real order-parameter values on the grid points."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise GridError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )

    def copy(self) -> "PhysicalField":
        return PhysicalField(self.grid, self.values.copy())


@dataclass
class SpectralField:
    """Complex Fourier coefficients indexed by integer wavevector.

    Supports vector-space arithmetic (addition, subtraction, scaling by
    real numbers); the mean-pinned flag survives operations that preserve
    a zero k=0 coefficient.
    """

    grid: Grid
    coeffs: np.ndarray
    mean_pinned: bool = False

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != self.grid.shape:
            raise GridError(
                f"coeffs shape {self.coeffs.shape} != grid shape {self.grid.shape}"
            )

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy(), self.mean_pinned)

    def _check(self, other: "SpectralField"):
        if not self.grid.compatible(other.grid):
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(
            self.grid, self.coeffs + other.coeffs, self.mean_pinned and other.mean_pinned
        )

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(
            self.grid, self.coeffs - other.coeffs, self.mean_pinned and other.mean_pinned
        )

    def __mul__(self, a) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * float(a), self.mean_pinned)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs, self.mean_pinned)


def forward(f: PhysicalField) -> SpectralField:
    """Discrete Fourier coefficients of a real field (1/N normalization)."""
    if not np.all(np.isfinite(f.values)):
        raise ValueError("physical field contains non-finite values")
    coeffs = _sfft.fftn(f.values) / f.grid.N
    return SpectralField(f.grid, coeffs, mean_pinned=False)


def inverse(u: SpectralField, residue_tol: float = IMAG_RESIDUE_TOL) -> PhysicalField:
    """Mode sum back to the grid; verifies the imaginary residue is noise."""
    w = _sfft.ifftn(u.coeffs) * u.grid.N
    residue = np.abs(w.imag).max()
    if residue > residue_tol:
        raise SymmetryError(
            f"imaginary residue {residue:.3e} exceeds {residue_tol:.1e}; "
            "input is not Hermitian-symmetric"
        )
    return PhysicalField(u.grid, np.ascontiguousarray(w.real))


def _ifft_real(coeffs: np.ndarray, N: int) -> np.ndarray:
    # Hot path: inputs are Hermitian by construction, skip the residue check.
    return (_sfft.ifftn(coeffs) * N).real


def _fft(values: np.ndarray, N: int) -> np.ndarray:
    return _sfft.fftn(values) / N


def laplacian_symbol(g: Grid) -> np.ndarray:
    """Reciprocal-space diagonal ``(1 - |B k|^2)^2`` of the interaction term."""
    lam = (1.0 - g.ksq) ** 2
    lam.flags.writeable = False
    return lam


def project_mean_zero(u: SpectralField) -> SpectralField:
    """Pin the k=0 coefficient to zero (mass conservation projection)."""
    coeffs = u.coeffs.copy()
    coeffs[(0,) * u.grid.d] = 0.0
    return SpectralField(u.grid, coeffs, mean_pinned=True)


def dot(u: SpectralField, v: SpectralField) -> float:
    """Real inner product ``sum_k Re(u_k conj(v_k))`` on coefficient space."""
    if not u.grid.compatible(v.grid):
        raise GridMismatchError("dot of fields on different grids")
    return float(np.vdot(v.coeffs, u.coeffs).real)


def norm(u: SpectralField) -> float:
    """Coefficient-space 2-norm."""
    return float(np.linalg.norm(u.coeffs))


def norm_inf(u: SpectralField) -> float:
    """Max coefficient modulus (the termination norm of the outer loop)."""
    return float(np.abs(u.coeffs).max())


def reverse_modes(coeffs: np.ndarray) -> np.ndarray:
    """Index map k -> -k (mod M) applied to a coefficient array."""
    out = coeffs
    for ax in range(coeffs.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def hermitian_defect(u: SpectralField) -> float:
    """Max-norm deviation from ``coeff(-k) = conj(coeff(k))``."""
    return float(np.abs(u.coeffs - np.conj(reverse_modes(u.coeffs))).max())


def assert_hermitian(u: SpectralField, tol: float = 1e-12):
    defect = hermitian_defect(u)
    if defect > tol:
        raise SymmetryError(f"Hermitian defect {defect:.3e} exceeds {tol:.1e}")


def random_pinned_field(grid: Grid, rng: np.random.Generator, scale: float = 1.0) -> SpectralField:
    """Hermitian, mean-pinned field from an i.i.d. Gaussian real field."""
    f = PhysicalField(grid, scale * rng.standard_normal(grid.shape))
    return project_mean_zero(forward(f))
