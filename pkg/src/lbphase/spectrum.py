"""Matrix-free computation of the smallest Hessian eigenvalues.

Used to certify second-order stationarity: a converged state is a
physically (meta-)stable phase when the smallest eigenvalues of the
mean-pinned Hessian are nonnegative up to a tolerance that absorbs the
translational zero modes of ordered patterns.

The solver is a thick-restart block Lanczos iteration with full
reorthogonalization, driven purely by Hessian products.  It works on
the real vector space of Hermitian, mean-pinned coefficient arrays
(stacked real/imaginary parts), where the Hessian is symmetric under
the coefficient-space inner product.  Small problems fall back to an
explicit dense matrix in an orthonormal basis of that subspace, which
doubles as the testing oracle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import HessianOperator
from .spectral import Grid, SpectralField, dot, reverse_modes

logger = logging.getLogger(__name__)

DENSE_CUTOFF = 1024


@dataclass
class SpectrumReport:
    """Smallest eigenpairs with residual certificates."""

    eigenvalues: np.ndarray
    eigenvectors: Optional[list]
    residuals: np.ndarray
    converged: bool
    matvecs: int = 0
    classification: Optional[str] = None


def hermitian_basis(grid: Grid) -> list:
    """Orthonormal real basis of the mean-pinned Hermitian subspace.

    One cosine/sine pair per conjugate mode pair plus a single real unit
    for self-conjugate modes; N-1 vectors in total.
    """
    basis = []
    shape = grid.shape
    N = grid.N
    seen = np.zeros(N, dtype=bool)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    M = grid.M
    for i in range(N):
        if seen[i]:
            continue
        multi = np.array(np.unravel_index(i, shape))
        j = int(np.ravel_multi_index(tuple((-multi) % M), shape))
        seen[i] = seen[j] = True
        if i == 0:
            continue  # pinned mean mode
        if i == j:
            c = np.zeros(shape, dtype=np.complex128)
            c.ravel()[i] = 1.0
            basis.append(c)
            continue
        c = np.zeros(shape, dtype=np.complex128)
        c.ravel()[i] = inv_sqrt2
        c.ravel()[j] = inv_sqrt2
        basis.append(c)
        s = np.zeros(shape, dtype=np.complex128)
        s.ravel()[i] = 1j * inv_sqrt2
        s.ravel()[j] = -1j * inv_sqrt2
        basis.append(s)
    return basis


def dense_hessian_matrix(H: HessianOperator):
    """Dense symmetric matrix of the pinned Hessian (small grids only)."""
    basis = hermitian_basis(H.grid)
    n = len(basis)
    mat = np.empty((n, n))
    for j, b in enumerate(basis):
        Hb = H.matvec(b)
        for i, a in enumerate(basis):
            mat[i, j] = np.vdot(a, Hb).real
    return mat, basis


def _herm_project(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + np.conj(reverse_modes(c)))


class _RealPack:
    """Real/imaginary stacking of coefficient arrays (our dot = real dot)."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.N = grid.N
        self.shape = grid.shape

    def to_real(self, c: np.ndarray) -> np.ndarray:
        return np.concatenate([c.real.ravel(), c.imag.ravel()])

    def to_complex(self, z: np.ndarray) -> np.ndarray:
        return z[: self.N].reshape(self.shape) + 1j * z[self.N:].reshape(self.shape)


def _orthonormalize_block(C: np.ndarray, V: np.ndarray, k: int, fresh) -> np.ndarray:
    """Two-pass block Gram-Schmidt against V[:k], then QR within the block.

    Near-dependent columns are replaced by fresh random Hermitian
    directions; gives up (returning fewer rows) once the subspace looks
    exhausted so the caller can stop growing the basis.
    """
    want = C.shape[0]
    kept = []
    for _ in range(2):
        if k:
            C -= (C @ V[:k].T) @ V[:k]
    for row in C:
        for b in kept:
            row = row - (row @ b) * b
        nrm = np.linalg.norm(row)
        if nrm > 1e-8:
            kept.append(row / nrm)
    attempts = 0
    while len(kept) < want and attempts < 3 * want:
        attempts += 1
        row = fresh()
        for _ in range(2):
            if k:
                row -= V[:k].T @ (V[:k] @ row)
            for b in kept:
                row = row - (row @ b) * b
        nrm = np.linalg.norm(row)
        if nrm > 1e-6:
            kept.append(row / nrm)
    return np.array(kept) if kept else np.empty((0, C.shape[1]))


def _structured_start(H, nvec: int, pack: _RealPack) -> np.ndarray:
    """Hermitian cosine/sine unit modes with the smallest interaction symbol.

    The wanted eigenvectors are supported almost entirely on low-symbol
    modes (components decay like 1/(D_k - sigma)), so seeding the Krylov
    basis with them cuts the iteration count by orders of magnitude.
    """
    grid = H.grid
    shape, M = grid.shape, grid.M
    order = np.argsort(H.D.ravel(), kind="stable")
    rows, seen = [], set()
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for idx in order:
        if len(rows) >= nvec:
            break
        i = int(idx)
        if i == 0 or i in seen:
            continue
        multi = np.array(np.unravel_index(i, shape))
        j = int(np.ravel_multi_index(tuple((-multi) % M), shape))
        seen.add(i)
        seen.add(j)
        c = np.zeros(shape, dtype=np.complex128)
        c.ravel()[i] = inv_sqrt2
        c.ravel()[j] += inv_sqrt2
        rows.append(pack.to_real(c))
        if j != i and len(rows) < nvec:
            s = np.zeros(shape, dtype=np.complex128)
            s.ravel()[i] = 1j * inv_sqrt2
            s.ravel()[j] += -1j * inv_sqrt2
            rows.append(pack.to_real(s))
    return np.array(rows)


def _krylov_smallest(H, m, tol, seed, max_basis, max_matvecs, block):
    grid = H.grid
    pack = _RealPack(grid)
    zero = (0,) * grid.d
    rng = np.random.default_rng(seed)

    def mv(z):
        c = pack.to_complex(z)
        out = H.matvec(c)
        out[zero] = 0.0
        return pack.to_real(out)

    twoN = 2 * grid.N
    V = np.zeros((max_basis, twoN))
    W = np.zeros((max_basis, twoN))
    T = np.zeros((max_basis, max_basis))

    def fresh():
        c = _herm_project(
            rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        )
        c[zero] = 0.0
        return pack.to_real(c)

    n_start = int(min(max_basis - block, max(4 * m, 32), grid.N - 1))
    start = list(_structured_start(H, n_start, pack))
    start.append(fresh())  # one generic direction for robustness
    newest = _orthonormalize_block(np.array(start), V, 0, fresh)

    dim = grid.N - 1  # Hermitian, mean-pinned subspace
    k = 0
    matvecs = 0
    theta = np.empty(0)
    Y = np.empty((0, 0))
    res_norms = np.full(m, np.inf)
    while True:
        nb = newest.shape[0]
        if nb == 0:
            # subspace exhausted: the Rayleigh-Ritz problem is exact
            mm = min(m, k)
            X = Y[:, :mm].T @ V[:k]
            return theta[:mm], X, res_norms[:mm], k >= m, matvecs, pack
        V[k:k + nb] = newest
        for i in range(nb):
            W[k + i] = mv(V[k + i])
        matvecs += nb
        # grow the projected matrix
        T[:k + nb, k:k + nb] = V[:k + nb] @ W[k:k + nb].T
        T[k:k + nb, :k] = T[:k, k:k + nb].T
        k += nb

        Tk = 0.5 * (T[:k, :k] + T[:k, :k].T)
        theta, Y = np.linalg.eigh(Tk)
        mm = min(m, k)
        X = Y[:, :mm].T @ V[:k]
        HX = Y[:, :mm].T @ W[:k]
        R = HX - theta[:mm, None] * X
        res_norms = np.linalg.norm(R, axis=1)
        if k >= m and np.all(res_norms[:m] <= tol):
            return theta[:m], (Y[:, :m].T @ V[:k]), res_norms[:m], True, matvecs, pack
        if matvecs >= max_matvecs:
            mm = min(m, k)
            return (theta[:mm], (Y[:, :mm].T @ V[:k]), res_norms[:mm], False,
                    matvecs, pack)

        if k >= dim:
            newest = np.empty((0, twoN))
            continue
        if k + block > min(max_basis, dim):
            # thick restart: keep the lowest Ritz vectors, stay rank-exact
            keep = min(max(4 * m, 48), k - block)
            Vk = Y[:, :keep].T @ V[:k]
            Wk = Y[:, :keep].T @ W[:k]
            V[:keep] = Vk
            W[:keep] = Wk
            T[:keep, :keep] = np.diag(theta[:keep])
            k = keep
            # continue the expansion from the best unconverged residual
            seed_rows = R.copy()
        else:
            seed_rows = W[k - nb:k].copy()
        newest = _orthonormalize_block(seed_rows[:block], V, k, fresh)

    raise AssertionError("unreachable")


def smallest_eigs(
    H: HessianOperator,
    m: int = 4,
    tol: float = 1e-8,
    seed: int = 0,
    max_basis: Optional[int] = None,
    max_matvecs: Optional[int] = None,
    block: Optional[int] = None,
    want_vectors: bool = True,
    method: str = "auto",
) -> SpectrumReport:
    """Algebraically smallest eigenpairs of the mean-pinned Hessian.

    Deterministic for a fixed seed.  Non-convergence within the matvec
    budget returns a partial report flagged ``converged=False``.
    """
    if m > 16:
        raise ValueError("m is limited to 16")
    if tol <= 0:
        raise ValueError("tol must be positive")
    grid = H.grid
    N = grid.N
    if method == "auto":
        method = "dense" if N <= DENSE_CUTOFF else "krylov"

    matvecs = 0
    if method == "dense":
        A, basis = dense_hessian_matrix(H)
        vals, vecs = np.linalg.eigh(A)
        fields = []
        for kk in range(min(m, len(basis))):
            c = np.zeros(grid.shape, dtype=np.complex128)
            for coef, b in zip(vecs[:, kk], basis):
                c += coef * b
            fields.append(c)
        converged = True
        matvecs = len(basis)
    else:
        if max_basis is None:
            max_basis = min(N - 1, max(12 * m, 160))
        if max_matvecs is None:
            max_matvecs = 40_000
        if block is None:
            block = max(m + 2, 12)
        theta, X, _res, converged, matvecs, pack = _krylov_smallest(
            H, m, tol, seed, max_basis, max_matvecs, block
        )
        fields = [_herm_project(pack.to_complex(x)) for x in X]

    zero = (0,) * grid.d
    eigenvalues = np.empty(len(fields))
    residuals = np.empty(len(fields))
    vectors = []
    for i, c in enumerate(fields):
        c[zero] = 0.0
        c = c / np.linalg.norm(c)
        Hc = H.matvec(c)
        sigma = float(np.vdot(c, Hc).real)
        eigenvalues[i] = sigma
        residuals[i] = float(np.linalg.norm(Hc - sigma * c))
        vectors.append(SpectralField(grid, c, mean_pinned=True))
    order = np.argsort(eigenvalues)
    eigenvalues = eigenvalues[order]
    residuals = residuals[order]
    vectors = [vectors[i] for i in order]
    converged = converged and len(eigenvalues) == m and bool(np.all(residuals <= tol))
    return SpectrumReport(
        eigenvalues=eigenvalues,
        eigenvectors=vectors if want_vectors else None,
        residuals=residuals,
        converged=converged,
        matvecs=matvecs,
    )


def classify(
    report: SpectrumReport,
    grad_inf: float,
    eps: float = 1e-10,
    neg_tol: float = 1e-8,
) -> str:
    """SP-II / saddle / non-stationary decision.

    ``neg_tol`` absorbs the translational zero modes of ordered phases.
    """
    if grad_inf >= eps:
        label = "non-stationary"
    elif len(report.eigenvalues) and report.eigenvalues[0] >= -neg_tol:
        label = "SP-II"
    else:
        label = "saddle"
    report.classification = label
    return label


def bottom_direction_overlap(
    H: HessianOperator, g: SpectralField, tol: float = 1e-8, seed: int = 0
) -> float:
    """Gradient component along the most negative eigendirection."""
    report = smallest_eigs(H, m=1, tol=tol, seed=seed)
    xi = report.eigenvectors[0]
    return dot(xi, g)
