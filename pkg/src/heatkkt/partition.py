"""Space-time indexing and the overlapping decomposition of the time axis.

Time-nodes are numbered ``1..nt`` (node 0 is the initial condition and never
an unknown) and subdomains ``1..nd``. A space-time vector is stored as an
array of shape ``(nt, n_sp)`` whose row ``n - 1`` holds time-node ``n``;
flattening it in C order gives the global index ``idx(n, i, j)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from heatkkt.config import ConfigError


@dataclass(frozen=True)
class SpaceTimeLayout:
    nt: int
    nx_int: int
    ny_int: int

    @property
    def n_sp(self) -> int:
        return self.nx_int * self.ny_int

    @property
    def size(self) -> int:
        return self.nt * self.n_sp

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nt, self.n_sp)

    def idx(self, n: int, i: int, j: int) -> int:
        """Flat index of time-node ``n`` and interior grid point ``(i, j)`` (1-based)."""
        if not (1 <= n <= self.nt and 1 <= i <= self.nx_int and 1 <= j <= self.ny_int):
            raise IndexError(f"({n}, {i}, {j}) outside layout {self}")
        return ((n - 1) * self.ny_int + (j - 1)) * self.nx_int + (i - 1)

    def as_field(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.size != self.size:
            raise ValueError(f"vector of size {v.size} does not match layout size {self.size}")
        return v.reshape(self.shape)


@dataclass(frozen=True)
class TimePartition:
    nt: int
    nd: int
    m: int
    node_sets: tuple[tuple[int, ...], ...]
    owner: tuple[int, ...]  # owner[n] for n = 0..nt; owner[0] is 0 (no owner)
    extended_sets: tuple[tuple[int, ...], ...]
    w_node: tuple[int | None, ...]

    def nodes(self, s: int) -> tuple[int, ...]:
        return self.node_sets[self._check(s) - 1]

    def extended(self, s: int) -> tuple[int, ...]:
        return self.extended_sets[self._check(s) - 1]

    def owned(self, s: int) -> tuple[int, ...]:
        return tuple(n for n in self.nodes(s) if self.owner[n] == s)

    def size(self, s: int) -> int:
        return len(self.nodes(s))

    def ownership_mask(self, s: int) -> np.ndarray:
        """Boolean diagonal of D_s over the nodes of subdomain ``s``."""
        return np.array([self.owner[n] == s for n in self.nodes(s)])

    def _check(self, s: int) -> int:
        if not 1 <= s <= self.nd:
            raise IndexError(f"subdomain {s} outside 1..{self.nd}")
        return s


def build_time_partition(nt: int, nd: int, owner_policy: str = "earlier") -> TimePartition:
    """Split time-nodes ``1..nt`` into ``nd`` subdomains sharing one node each.

    Subdomain 1 holds ``{1..m}`` and subdomain ``s >= 2`` holds
    ``{(s-1)m, ..., sm}`` with ``m = nt / nd``, so every time step belongs to
    exactly one subdomain. A shared node goes to the earlier subdomain unless
    ``owner_policy == "later"``.
    """
    if nd < 1:
        raise ConfigError(f"nd must be >= 1, got {nd}")
    if nt < 1 or nt % nd:
        raise ConfigError(f"nt={nt} is not divisible by nd={nd}")
    if owner_policy not in ("earlier", "later"):
        raise ConfigError(f"unknown owner policy {owner_policy!r}")
    m = nt // nd
    node_sets = []
    extended_sets = []
    w_node = []
    for s in range(1, nd + 1):
        if s == 1:
            nodes = tuple(range(1, m + 1))
            extended_sets.append(nodes)
            w_node.append(None)
        else:
            nodes = tuple(range((s - 1) * m, s * m + 1))
            w = (s - 1) * m - 1
            if w >= 1:
                extended_sets.append((w,) + nodes)
                w_node.append(w)
            else:
                # m == 1 for s == 2: the earlier node is the initial condition
                extended_sets.append(nodes)
                w_node.append(None)
        node_sets.append(nodes)

    owner = [0] * (nt + 1)
    sweep = range(1, nd + 1) if owner_policy == "later" else range(nd, 0, -1)
    for s in sweep:
        for n in node_sets[s - 1]:
            owner[n] = s
    return TimePartition(
        nt=nt,
        nd=nd,
        m=m,
        node_sets=tuple(node_sets),
        owner=tuple(owner),
        extended_sets=tuple(extended_sets),
        w_node=tuple(w_node),
    )


def _rows(nodes) -> np.ndarray:
    return np.asarray(nodes, dtype=np.intp) - 1


def _field(partition: TimePartition, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        if v.size % partition.nt:
            raise ValueError(f"vector of size {v.size} does not split into {partition.nt} time-nodes")
        return v.reshape(partition.nt, -1)
    if v.shape[0] != partition.nt:
        raise ValueError(f"expected {partition.nt} time-nodes, got {v.shape[0]}")
    return v


def restrict(partition: TimePartition, s: int, v: np.ndarray) -> np.ndarray:
    """R_s v: the time-nodes of subdomain ``s``, shape ``(N_s, n_sp)``."""
    return _field(partition, v)[_rows(partition.nodes(s))].copy()


def prolong(partition: TimePartition, s: int, vs: np.ndarray) -> np.ndarray:
    """R_s^T vs, zero outside subdomain ``s``."""
    nodes = partition.nodes(s)
    vs = np.asarray(vs, dtype=float)
    if vs.shape[0] != len(nodes):
        raise ValueError(f"subdomain {s} has {len(nodes)} nodes, got {vs.shape[0]}")
    out = np.zeros((partition.nt,) + vs.shape[1:])
    out[_rows(nodes)] = vs
    return out


def restrict_extended(partition: TimePartition, s: int, v: np.ndarray) -> np.ndarray:
    """Q_s v over the extended window of subdomain ``s``."""
    return _field(partition, v)[_rows(partition.extended(s))].copy()


def prolong_extended(partition: TimePartition, s: int, vq: np.ndarray) -> np.ndarray:
    """Q_s^T vq, zero outside the extended window."""
    nodes = partition.extended(s)
    vq = np.asarray(vq, dtype=float)
    if vq.shape[0] != len(nodes):
        raise ValueError(f"extended window {s} has {len(nodes)} nodes, got {vq.shape[0]}")
    out = np.zeros((partition.nt,) + vq.shape[1:])
    out[_rows(nodes)] = vq
    return out


def apply_ownership_mask(partition: TimePartition, s: int, vs: np.ndarray) -> np.ndarray:
    """D_s vs: zero the subdomain nodes that ``s`` does not own."""
    vs = np.array(vs, dtype=float)
    if vs.shape[0] != partition.size(s):
        raise ValueError(f"subdomain {s} has {partition.size(s)} nodes, got {vs.shape[0]}")
    vs[~partition.ownership_mask(s)] = 0.0
    return vs
