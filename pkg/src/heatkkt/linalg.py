"""Band, dense and sparse factor/solve kernels.

Thin wrappers over LAPACK (``?gbtrf``/``?gbtrs``, ``?getrf``/``?getrs``) and
SuperLU that add the singular-pivot check and a common factor type.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

PIVOT_RTOL = 1e-14


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, pivot_index: int, pivot_value: float = 0.0):
        super().__init__(f"matrix is singular: pivot {pivot_index} has magnitude {abs(pivot_value):.3e}")
        self.pivot_index = pivot_index


@dataclass(frozen=True)
class BandedMatrix:
    """Square matrix in diagonal-ordered storage.

    ``band[ku + i - j, j] == A[i, j]`` for ``-kl <= i - j <= ku`` (the layout
    of :func:`scipy.linalg.solve_banded`).
    """

    n: int
    kl: int
    ku: int
    band: np.ndarray

    def __post_init__(self):
        if self.band.shape != (self.kl + self.ku + 1, self.n):
            raise ValueError(f"band storage has shape {self.band.shape}, expected {(self.kl + self.ku + 1, self.n)}")
        if self.n > 0 and max(self.kl, self.ku) > self.n - 1:
            raise ValueError("bandwidth exceeds n - 1")

    @classmethod
    def from_dense(cls, a: np.ndarray, kl: int, ku: int) -> BandedMatrix:
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        band = np.zeros((kl + ku + 1, n))
        for j in range(n):
            lo, hi = max(0, j - ku), min(n, j + kl + 1)
            band[ku + lo - j : ku + hi - j, j] = a[lo:hi, j]
        return cls(n, kl, ku, band)

    @classmethod
    def from_diagonals(cls, n: int, diagonals: dict[int, float | np.ndarray]) -> BandedMatrix:
        """Build from ``{offset: values}``; offset ``k`` is the ``k``-th superdiagonal."""
        kl = max([-k for k in diagonals if k < 0], default=0)
        ku = max([k for k in diagonals if k > 0], default=0)
        band = np.zeros((kl + ku + 1, n))
        for k, values in diagonals.items():
            length = n - abs(k)
            values = np.broadcast_to(np.asarray(values, dtype=float), (length,))
            if k >= 0:
                band[ku - k, k:] = values
            else:
                band[ku - k, : n + k] = values
        return cls(n, kl, ku, band)

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def to_sparse(self) -> sp.csr_matrix:
        offsets = list(range(self.ku, -self.kl - 1, -1))
        # dia_matrix stores data[k, j] = A[j - offset, j], the same column alignment
        return sp.dia_matrix((self.band, offsets), shape=(self.n, self.n)).tocsr()

    def norm_inf(self) -> float:
        return float(abs(self.to_sparse()).sum(axis=1).max()) if self.n else 0.0

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_sparse() @ x


@dataclass(frozen=True)
class LUFactors:
    kind: str  # "band", "dense" or "sparse"
    n: int
    payload: Any
    pivot_growth: float


def band_factor(a: BandedMatrix) -> LUFactors:
    """LU with partial pivoting of a banded matrix."""
    ab = np.zeros((2 * a.kl + a.ku + 1, a.n), order="F")
    ab[a.kl :] = a.band
    lu, ipiv, info = lapack.dgbtrf(ab, a.kl, a.ku)
    if info < 0:
        raise ValueError(f"dgbtrf: illegal argument {-info}")
    norm = a.norm_inf()
    diag = lu[a.kl + a.ku]
    _check_pivots(diag, norm, info)
    growth = float(np.abs(lu).max() / norm) if norm else 1.0
    return LUFactors("band", a.n, (lu, ipiv, a.kl, a.ku), growth)


def band_solve(f: LUFactors, b: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Solve ``A x = b`` (or ``A^T x = b``); ``b`` may hold several columns."""
    lu, ipiv, kl, ku = f.payload
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.n:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {f.n}")
    x, info = lapack.dgbtrs(lu, kl, ku, b if b.ndim == 2 else b[:, None], ipiv, trans=int(transpose))
    if info:
        raise ValueError(f"dgbtrs failed with info={info}")
    return x if b.ndim == 2 else x[:, 0]


def band_solve_transpose(f: LUFactors, b: np.ndarray) -> np.ndarray:
    return band_solve(f, b, transpose=True)


def dense_factor(a: np.ndarray) -> LUFactors:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    lu, piv, info = lapack.dgetrf(a)
    if info < 0:
        raise ValueError(f"dgetrf: illegal argument {-info}")
    norm = float(np.abs(a).sum(axis=1).max()) if a.size else 0.0
    _check_pivots(np.diag(lu), norm, info)
    growth = float(np.abs(lu).max() / norm) if norm else 1.0
    return LUFactors("dense", a.shape[0], (lu, piv), growth)


def dense_solve(f: LUFactors, b: np.ndarray, transpose: bool = False) -> np.ndarray:
    return sla.lu_solve(f.payload, b, trans=int(transpose), check_finite=False)


def dense_inverse(a: np.ndarray) -> np.ndarray:
    f = dense_factor(a)
    return dense_solve(f, np.eye(f.n))


def dense_matvec(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.asarray(a) @ x


def sparse_factor(a: sp.spmatrix) -> LUFactors:
    a = sp.csc_matrix(a, dtype=float)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    norm = float(abs(a).sum(axis=1).max()) if a.nnz else 0.0
    try:
        lu = spla.splu(a)
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SingularMatrixError(-1) from exc
    diag = lu.U.diagonal()
    _check_pivots(diag, norm, 0)
    growth = float(abs(lu.U).max() / norm) if norm else 1.0
    return LUFactors("sparse", a.shape[0], lu, growth)


def sparse_solve(f: LUFactors, b: np.ndarray, transpose: bool = False) -> np.ndarray:
    return f.payload.solve(np.asarray(b, dtype=float), trans="T" if transpose else "N")


def sparse_matvec(a: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    return a @ x


def solve(f: LUFactors, b: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Dispatch on the factor kind."""
    if f.kind == "band":
        return band_solve(f, b, transpose)
    if f.kind == "dense":
        return dense_solve(f, b, transpose)
    return sparse_solve(f, b, transpose)


def _check_pivots(diag: np.ndarray, norm: float, info: int) -> None:
    if info > 0:
        raise SingularMatrixError(info - 1, float(diag[info - 1]))
    if diag.size == 0:
        return
    small = np.flatnonzero(np.abs(diag) <= PIVOT_RTOL * norm)
    if small.size:
        raise SingularMatrixError(int(small[0]), float(diag[small[0]]))
