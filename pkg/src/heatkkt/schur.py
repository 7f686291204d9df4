"""Approximate inverses of the Schur block Shat = Jhat M_u^{-1} Jhat^T.

The production solvers are :class:`RASQ` (one level, time-integrator window
solves) and :class:`TwoLevel` (RASQ plus a constant/linear-in-time coarse
correction). The dense classes exist to check them at desk scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from heatkkt.config import ConfigError, ProblemConfig
from heatkkt.heat import HeatOperators
from heatkkt.linalg import LUFactors, SingularMatrixError, dense_factor, dense_solve, solve, sparse_factor
from heatkkt.partition import TimePartition

DENSE_LIMIT = 8000


class CoarseSpaceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# dense oracles


def dense_jhat(ops: HeatOperators) -> np.ndarray:
    return ops.sparse_J(hat=True).toarray()


def dense_shat(ops: HeatOperators) -> np.ndarray:
    jh = dense_jhat(ops)
    return jh @ jh.T / ops.mass_scale


def dense_true_schur(ops: HeatOperators) -> np.ndarray:
    """S = J M_u^{-1} J^T + omega^{-1} L M_z^{-1} L^T with L = -dt I."""
    j = ops.sparse_J().toarray()
    return (j @ j.T + ops.dt**2 / ops.config.omega * np.eye(ops.size)) / ops.mass_scale


def node_dofs(ops: HeatOperators, nodes) -> np.ndarray:
    """Flat indices of every spatial unknown at the given time-nodes."""
    nodes = np.asarray(nodes, dtype=np.intp)
    return ((nodes[:, None] - 1) * ops.n_sp + np.arange(ops.n_sp)).ravel()


def selector(ops: HeatOperators, nodes) -> np.ndarray:
    """Boolean restriction matrix onto the given time-nodes."""
    rows = node_dofs(ops, nodes)
    out = np.zeros((rows.size, ops.size))
    out[np.arange(rows.size), rows] = 1.0
    return out


def dense_ras_matrix(ops: HeatOperators, partition: TimePartition) -> np.ndarray:
    """Sum_s R_s^T D_s (R_s Shat R_s^T)^{-1} R_s, assembled densely."""
    shat = dense_shat(ops)
    out = np.zeros_like(shat)
    for s in range(1, partition.nd + 1):
        idx = node_dofs(ops, partition.nodes(s))
        local = dense_solve(dense_factor(shat[np.ix_(idx, idx)]), np.eye(idx.size))
        keep = np.repeat(partition.ownership_mask(s), ops.n_sp)
        local[~keep] = 0.0
        out[np.ix_(idx, idx)] += local
    return out


def dense_rasq_matrix(ops: HeatOperators, partition: TimePartition) -> np.ndarray:
    """Sum_s R_s^T D_s R_s Q_s^T Jhat_s^{-T} M_s Jhat_s^{-1} Q_s R_s^T R_s from boolean operators."""
    jh = dense_jhat(ops)
    out = np.zeros((ops.size, ops.size))
    for s in range(1, partition.nd + 1):
        r = selector(ops, partition.nodes(s))
        q = selector(ops, partition.extended(s))
        d = np.diag(np.repeat(partition.ownership_mask(s), ops.n_sp).astype(float))
        js_inv = np.linalg.inv(q @ jh @ q.T)
        m_s = np.linalg.inv(q @ (np.eye(ops.size) / ops.mass_scale) @ q.T)
        out += r.T @ d @ (r @ q.T @ js_inv.T @ m_s @ js_inv @ q @ r.T) @ r
    return out


def verify_subdomain_identity(ops: HeatOperators, partition: TimePartition, s: int) -> float:
    """Max entrywise gap between R_s Shat R_s^T and R_s Q_s^T Jhat_s M_s^{-1} Jhat_s^T Q_s R_s^T."""
    jh = dense_jhat(ops)
    m_inv = np.eye(ops.size) / ops.mass_scale
    r = selector(ops, partition.nodes(s))
    q = selector(ops, partition.extended(s))
    lhs = r @ jh @ m_inv @ jh.T @ r.T
    js = q @ jh @ q.T
    rhs = r @ q.T @ js @ (q @ m_inv @ q.T) @ js.T @ q @ r.T
    return float(np.max(np.abs(lhs - rhs)))


def dense_ras_apply(ops: HeatOperators, partition: TimePartition, r: np.ndarray) -> np.ndarray:
    return (dense_ras_matrix(ops, partition) @ np.ravel(r)).reshape(ops.shape)


# ---------------------------------------------------------------------------
# solvers


class IdentitySchur:
    variant = "identity"

    def apply(self, r: np.ndarray) -> np.ndarray:
        return np.array(r, dtype=float)


class DenseSchur:
    """Exact inverse of an explicitly assembled Schur-type matrix."""

    def __init__(self, ops: HeatOperators, matrix: np.ndarray, variant: str):
        if ops.size > DENSE_LIMIT:
            raise ConfigError(f"dense Schur solver limited to {DENSE_LIMIT} unknowns, got {ops.size}")
        self.ops = ops
        self.variant = variant
        self.matrix = matrix
        self.factors: LUFactors = dense_factor(matrix)

    @classmethod
    def shat(cls, ops: HeatOperators) -> DenseSchur:
        return cls(ops, dense_shat(ops), "dense-shat")

    @classmethod
    def true_schur(cls, ops: HeatOperators) -> DenseSchur:
        return cls(ops, dense_true_schur(ops), "dense-true-s")

    def apply(self, r: np.ndarray) -> np.ndarray:
        return dense_solve(self.factors, np.ravel(r)).reshape(self.ops.shape)


class DenseRAS:
    variant = "dense-ras"

    def __init__(self, ops: HeatOperators, partition: TimePartition):
        self.ops = ops
        self.matrix = dense_ras_matrix(ops, partition)

    def apply(self, r: np.ndarray) -> np.ndarray:
        return (self.matrix @ np.ravel(r)).reshape(self.ops.shape)


class RASQ:
    """One-level restricted additive Schwarz with extended-window time solves.

    All subdomain windows are integrated together as the columns of one
    multi-right-hand-side solve per step; windows shorter than the longest
    are padded at the front with zero data, which leaves them unchanged
    because a zero right-hand side with zero incoming state stays zero.
    """

    variant = "one-level-rasq"

    def __init__(self, ops: HeatOperators, partition: TimePartition):
        if partition.nt != ops.nt:
            raise ValueError("partition and operators disagree on nt")
        self.ops = ops
        self.partition = partition
        nd = partition.nd
        self.length = max(len(partition.extended(s)) for s in range(1, nd + 1))
        # gather[k, s]: row of r feeding step k of window s (nt selects a zero row)
        gather = np.full((self.length, nd), ops.nt, dtype=np.intp)
        own_pos, own_col, own_row = [], [], []
        for s in range(1, nd + 1):
            ext = partition.extended(s)
            pad = self.length - len(ext)
            for k, n in enumerate(ext):
                if n in partition.nodes(s):
                    gather[pad + k, s - 1] = n - 1
                if partition.owner[n] == s:
                    own_pos.append(pad + k)
                    own_col.append(s - 1)
                    own_row.append(n - 1)
        order = np.argsort(own_row)
        self._gather = gather
        self._own_pos = np.asarray(own_pos)[order]
        self._own_col = np.asarray(own_col)[order]
        if not np.array_equal(np.asarray(own_row)[order], np.arange(ops.nt)):
            raise ValueError("ownership does not cover every time-node exactly once")

    def apply(self, r: np.ndarray) -> np.ndarray:
        ops = self.ops
        padded = np.vstack([ops.field(r), np.zeros((1, ops.n_sp))])
        b = padded[self._gather].transpose(0, 2, 1)  # (steps, n_sp, nd)
        x = ops.forward_solve_batch(np.ascontiguousarray(b))
        x *= ops.mass_scale
        y = ops.adjoint_solve_batch(x)
        return y[self._own_pos, :, self._own_col]


def apply_rasq(ops: HeatOperators, partition: TimePartition, r: np.ndarray) -> np.ndarray:
    """RASQ applied one subdomain at a time through the single-window solves."""
    r = ops.field(r)
    out = np.zeros(ops.shape)
    for s in range(1, partition.nd + 1):
        nodes = partition.nodes(s)
        ext = partition.extended(s)
        b = np.zeros((len(ext), ops.n_sp))
        offset = len(ext) - len(nodes)
        b[offset:] = r[np.asarray(nodes) - 1]
        x = ops.forward_solve_window(ext, b)
        y = ops.adjoint_solve_window(ext, ops.mass_scale * x)[offset:]
        y[~partition.ownership_mask(s)] = 0.0
        out[np.asarray(nodes) - 1] += y
    return out


@dataclass
class CoarseSpace:
    variant: str
    Z: sp.csc_matrix  # columns are the coarse basis vectors
    S0: np.ndarray | sp.csr_matrix
    S0_factors: LUFactors
    columns: list[tuple]  # (s, profile) or (s, profile, dof) per column

    @property
    def dim(self) -> int:
        return self.Z.shape[1]

    def solve(self, r: np.ndarray) -> np.ndarray:
        """R_0^T S0^{-1} R_0 r."""
        coarse = solve(self.S0_factors, self.Z.T @ np.ravel(r))
        return self.Z @ coarse


def temporal_profiles(n_nodes: int) -> list[np.ndarray]:
    """Constant and linear profiles over a subdomain; the linear one spans -1..1."""
    const = np.ones(n_nodes)
    if n_nodes == 1:
        return [const]
    return [const, -1.0 + 2.0 * np.arange(n_nodes) / (n_nodes - 1)]


def coarse_basis(ops: HeatOperators, partition: TimePartition, variant: str) -> tuple[sp.csc_matrix, list[tuple]]:
    if variant not in ("scalar", "per-dof"):
        raise ConfigError(f"unknown coarse variant {variant!r}")
    n_sp = ops.n_sp
    rows, cols, vals, labels = [], [], [], []
    col = 0
    for s in range(1, partition.nd + 1):
        nodes = np.asarray(partition.nodes(s))
        mask = partition.ownership_mask(s)
        owned = nodes[mask]
        for k, phi in enumerate(temporal_profiles(len(nodes))):
            phi = phi[mask]
            # a masked ramp on a single owned node duplicates the constant
            if k == 1 and owned.size < 2:
                continue
            if variant == "scalar":
                rows.append(node_dofs(ops, owned))
                cols.append(np.full(owned.size * n_sp, col))
                vals.append(np.repeat(phi, n_sp))
                labels.append((s, k))
                col += 1
            else:
                for p in range(n_sp):
                    rows.append((owned - 1) * n_sp + p)
                    cols.append(np.full(owned.size, col))
                    vals.append(phi)
                    labels.append((s, k, p))
                    col += 1
    z = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ops.size, col),
    )
    return z, labels


def build_coarse_space(ops: HeatOperators, partition: TimePartition, variant: str) -> CoarseSpace:
    """Nicolaides-type coarse space and its Galerkin operator S0 = Z^T Shat Z.

    Jhat^T is applied to all basis vectors at once as a sparse product, so
    S0 = (Jhat^T Z)^T M_u^{-1} (Jhat^T Z) without ever forming Shat.
    """
    z, labels = coarse_basis(ops, partition, variant)
    y = (ops.sparse_J(hat=True).T @ z).tocsc()
    s0 = ((y.T @ y) / ops.mass_scale).tocsr()
    try:
        if variant == "scalar":
            s0 = s0.toarray()
            factors = dense_factor(s0)
        else:
            factors = sparse_factor(s0)
    except SingularMatrixError as exc:
        raise CoarseSpaceError(f"coarse operator for the {variant!r} variant is rank deficient") from exc
    return CoarseSpace(variant, z, s0, factors, labels)


def apply_two_level(
    ops: HeatOperators,
    partition: TimePartition,
    coarse: CoarseSpace,
    r: np.ndarray,
    form: str = "multiplicative",
    order: str = "fine-first",
    fine=None,
) -> np.ndarray:
    """Combine the RASQ sweep with the coarse correction.

    ``literal`` composes RASQ after the coarse solve exactly; ``multiplicative``
    applies one level, updates the residual with Shat and applies the other;
    ``additive`` sums the two corrections.
    """
    fine = fine if fine is not None else RASQ(ops, partition)
    r = ops.field(r)
    if form == "literal":
        return fine.apply(ops.field(coarse.solve(r)))
    if form == "additive":
        return fine.apply(r) + ops.field(coarse.solve(r))
    if form != "multiplicative":
        raise ConfigError(f"unknown two-level form {form!r}")
    if order == "coarse-first":
        y = ops.field(coarse.solve(r))
        return y + fine.apply(r - ops.apply_Shat(y))
    y = fine.apply(r)
    return y + ops.field(coarse.solve(r - ops.apply_Shat(y)))


class TwoLevel:
    variant = "two-level"

    def __init__(
        self,
        ops: HeatOperators,
        partition: TimePartition,
        coarse_variant: str = "per-dof",
        form: str = "multiplicative",
        order: str = "fine-first",
    ):
        self.ops = ops
        self.partition = partition
        self.fine = RASQ(ops, partition)
        self.coarse = build_coarse_space(ops, partition, coarse_variant)
        self.form = form
        self.order = order

    def apply(self, r: np.ndarray) -> np.ndarray:
        return apply_two_level(self.ops, self.partition, self.coarse, r, self.form, self.order, self.fine)


def make_schur_solver(ops: HeatOperators, partition: TimePartition, config: ProblemConfig | None = None):
    """Schur approximation selected by ``config.precond_kind`` (None for "none")."""
    config = config or ops.config
    kind = config.precond_kind
    if kind == "none":
        return None
    if kind == "one-level":
        return RASQ(ops, partition)
    if kind == "two-level":
        return TwoLevel(ops, partition, config.coarse_variant, config.two_level_form, config.two_level_order)
    if kind == "dense-schur":
        return DenseSchur.shat(ops)
    if kind == "true-schur":
        return DenseSchur.true_schur(ops)
    raise ConfigError(f"unknown preconditioner kind {kind!r}")
