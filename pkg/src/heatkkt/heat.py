"""Backward-Euler heat operators on the interior grid, applied matrix-free.

Space-time fields are arrays of shape ``(nt, n_sp)``. The state equation per
step is ``A u^n - u^{n-1} - dt z^n = 0``, so J is block lower bidiagonal with
``A`` on the diagonal and ``-I`` below it, and ``L = -dt I`` blockwise.
"""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import scipy.sparse as sp

from heatkkt.config import ProblemConfig
from heatkkt.linalg import BandedMatrix, LUFactors, band_factor, band_solve


def assemble_spatial_operator(config: ProblemConfig, shift: float = 0.0) -> BandedMatrix:
    """Implicit step matrix ``I + dt nu K5 + shift I`` on interior unknowns.

    Homogeneous Dirichlet values are dropped from the stencil. Interior point
    ``(i, j)`` maps to row ``(j - 1) * (nx - 1) + (i - 1)``.
    """
    nxi, nyi = config.nx - 1, config.ny - 1
    n = nxi * nyi
    cx = config.dt * config.nu / config.dx**2
    cy = config.dt * config.nu / config.dy**2
    diagonals: dict[int, float | np.ndarray] = {0: 1.0 + 2.0 * cx + 2.0 * cy + shift}
    if nxi > 1:
        east = np.full(n - 1, -cx)
        east[nxi - 1 :: nxi] = 0.0  # no coupling across grid rows
        diagonals[1] = east
        diagonals[-1] = east
    if nyi > 1:
        diagonals[nxi] = -cy
        diagonals[-nxi] = -cy
    return BandedMatrix.from_diagonals(n, diagonals)


def jhat_shift(config: ProblemConfig) -> float:
    """sigma in Jhat = J + sigma L: +omega^(-1/2) for "plus", minus that for "minus"."""
    sign = 1.0 if config.jhat_sign == "plus" else -1.0
    return sign / np.sqrt(config.omega)


class HeatOperators:
    """Factorized per-step operators for J, L, M and Jhat = J + sigma L.

    ``sigma`` defaults to the value implied by ``config.jhat_sign``; pass
    ``sigma=0`` to make Jhat coincide with J.
    """

    def __init__(self, config: ProblemConfig, sigma: float | None = None):
        self.config = config
        self.dt = config.dt
        self.n_sp = config.n_sp
        self.nt = config.nt
        self.mass_scale = config.dt * config.dx * config.dy
        self.shift = jhat_shift(config) if sigma is None else float(sigma)
        self.A = assemble_spatial_operator(config)
        self.A_factors: LUFactors = band_factor(self.A)
        # L = -dt I, so the diagonal block of J + sigma L is A - sigma dt I
        self.Ahat = assemble_spatial_operator(config, shift=-self.shift * self.dt)
        self.Ahat_factors: LUFactors = band_factor(self.Ahat)
        self._A = self.A.to_sparse()
        self._AT = self._A.T.tocsr()
        self._Ahat = self.Ahat.to_sparse()
        self._AhatT = self._Ahat.T.tocsr()

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nt, self.n_sp)

    @property
    def size(self) -> int:
        return self.nt * self.n_sp

    def field(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.size != self.size:
            raise ValueError(f"space-time vector of size {v.size} does not match {self.shape}")
        return v.reshape(self.shape)

    def _bidiag(self, mat: sp.csr_matrix, u: np.ndarray) -> np.ndarray:
        u = self.field(u)
        out = (mat @ u.T).T
        out[1:] -= u[:-1]
        return out

    def _bidiag_t(self, mat_t: sp.csr_matrix, w: np.ndarray) -> np.ndarray:
        w = self.field(w)
        out = (mat_t @ w.T).T
        out[:-1] -= w[1:]
        return out

    def apply_J(self, u: np.ndarray) -> np.ndarray:
        return self._bidiag(self._A, u)

    def apply_JT(self, w: np.ndarray) -> np.ndarray:
        return self._bidiag_t(self._AT, w)

    def apply_Jhat(self, u: np.ndarray) -> np.ndarray:
        return self._bidiag(self._Ahat, u)

    def apply_JhatT(self, w: np.ndarray) -> np.ndarray:
        return self._bidiag_t(self._AhatT, w)

    def apply_L(self, z: np.ndarray) -> np.ndarray:
        return -self.dt * self.field(z)

    apply_LT = apply_L

    def apply_Mu(self, u: np.ndarray) -> np.ndarray:
        return self.mass_scale * self.field(u)

    apply_Mz = apply_Mu

    def apply_Mu_inv(self, u: np.ndarray) -> np.ndarray:
        return self.field(u) / self.mass_scale

    def apply_Shat(self, w: np.ndarray) -> np.ndarray:
        """Jhat M_u^{-1} Jhat^T, never formed."""
        return self.apply_Jhat(self.apply_Mu_inv(self.apply_JhatT(w)))

    def forward_solve_window(self, window: Sequence[int], b: np.ndarray) -> np.ndarray:
        """Solve with Q Jhat Q^T on a contiguous window, zero state entering it."""
        b = self._window_rhs(window, b)
        return self.forward_solve_batch(b[:, :, None])[:, :, 0]

    def adjoint_solve_window(self, window: Sequence[int], b: np.ndarray) -> np.ndarray:
        """Solve with (Q Jhat Q^T)^T, integrating backward from the window end."""
        b = self._window_rhs(window, b)
        return self.adjoint_solve_batch(b[:, :, None])[:, :, 0]

    def forward_solve_batch(self, b: np.ndarray) -> np.ndarray:
        """Forward substitution on ``b`` of shape ``(steps, n_sp, k)``, k windows at once."""
        x = np.empty_like(b, dtype=float)
        prev = np.zeros(b.shape[1:])
        for n in range(b.shape[0]):
            prev = band_solve(self.Ahat_factors, b[n] + prev)
            x[n] = prev
        return x

    def adjoint_solve_batch(self, b: np.ndarray) -> np.ndarray:
        x = np.empty_like(b, dtype=float)
        nxt = np.zeros(b.shape[1:])
        for n in range(b.shape[0] - 1, -1, -1):
            nxt = band_solve(self.Ahat_factors, b[n] + nxt, transpose=True)
            x[n] = nxt
        return x

    def state_solve(self, rhs: np.ndarray) -> np.ndarray:
        """u = J^{-1} rhs by ordinary backward-Euler time stepping."""
        rhs = self.field(rhs)
        u = np.empty_like(rhs)
        prev = np.zeros(self.n_sp)
        for n in range(self.nt):
            prev = band_solve(self.A_factors, rhs[n] + prev)
            u[n] = prev
        return u

    def _window_rhs(self, window: Sequence[int], b: np.ndarray) -> np.ndarray:
        window = list(window)
        if not window or any(b2 - a != 1 for a, b2 in zip(window, window[1:])):
            raise ValueError(f"window must be a non-empty contiguous node list, got {window}")
        if window[0] < 1 or window[-1] > self.nt:
            raise ValueError(f"window {window[0]}..{window[-1]} outside time-nodes 1..{self.nt}")
        b = np.asarray(b, dtype=float)
        if b.size != len(window) * self.n_sp:
            raise ValueError(f"window right-hand side of size {b.size} does not match {len(window)} nodes")
        return b.reshape(len(window), self.n_sp)

    def sparse_J(self, hat: bool = False) -> sp.csr_matrix:
        """Assembled J (or Jhat) for Galerkin products and desk-scale oracles."""
        a = self._Ahat if hat else self._A
        sub = sp.eye(self.nt, k=-1)
        return (sp.kron(sp.eye(self.nt), a) - sp.kron(sub, sp.eye(self.n_sp))).tocsr()
