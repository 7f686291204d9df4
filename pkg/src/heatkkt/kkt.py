"""KKT operator, right-hand side, block-diagonal preconditioner and objective."""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from heatkkt.heat import HeatOperators

SpatialFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
SpaceTimeFn = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


@dataclass
class KKTVector:
    u: np.ndarray
    z: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        if not (self.u.shape == self.z.shape == self.w.shape):
            raise ValueError(f"block shapes differ: {self.u.shape}, {self.z.shape}, {self.w.shape}")

    def to_flat(self) -> np.ndarray:
        return np.concatenate([self.u.ravel(), self.z.ravel(), self.w.ravel()])

    @classmethod
    def from_flat(cls, v: np.ndarray, shape: tuple[int, int]) -> KKTVector:
        v = np.asarray(v, dtype=float)
        n = shape[0] * shape[1]
        if v.size != 3 * n:
            raise ValueError(f"KKT vector of size {v.size} does not match 3 x {shape}")
        u, z, w = (v[k * n : (k + 1) * n].reshape(shape) for k in range(3))
        return cls(u, z, w)

    @classmethod
    def zeros(cls, shape: tuple[int, int]) -> KKTVector:
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape))


@dataclass
class RhsBundle:
    f_u: np.ndarray
    f_z: np.ndarray
    f: np.ndarray

    def as_kkt(self) -> KKTVector:
        return KKTVector(self.f_u, self.f_z, self.f)


def interior_grid(ops: HeatOperators) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates of the interior points in layout order (x fastest)."""
    cfg = ops.config
    x = cfg.dx * np.arange(1, cfg.nx)
    y = cfg.dy * np.arange(1, cfg.ny)
    xx, yy = np.meshgrid(x, y)  # rows follow y, columns follow x
    return xx.ravel(), yy.ravel()


def sample_target(ops: HeatOperators, target: SpaceTimeFn) -> np.ndarray:
    x, y = interior_grid(ops)
    times = ops.dt * np.arange(1, ops.nt + 1)
    return np.array([np.broadcast_to(target(x, y, t), x.shape) for t in times], dtype=float)


def model_initial_condition(x, y):
    return -x * y * (x - 1.0) * (y - 2.0)


def model_target(x, y, t):
    return np.sin(2.0 * np.pi * t) * np.sin(2.0 * np.pi * x) * np.sin(2.0 * np.pi * y)


def assemble_rhs(ops: HeatOperators, u0: SpatialFn, target: SpaceTimeFn) -> RhsBundle:
    x, y = interior_grid(ops)
    f_u = ops.mass_scale * sample_target(ops, target)
    f = np.zeros(ops.shape)
    f[0] = np.broadcast_to(u0(x, y), x.shape)
    return RhsBundle(f_u=f_u, f_z=np.zeros(ops.shape), f=f)


def apply_K(ops: HeatOperators, v: KKTVector) -> KKTVector:
    omega = ops.config.omega
    return KKTVector(
        u=ops.apply_Mu(v.u) + ops.apply_JT(v.w),
        z=omega * ops.apply_Mz(v.z) + ops.apply_LT(v.w),
        w=ops.apply_J(v.u) + ops.apply_L(v.z),
    )


def apply_P_inv(ops: HeatOperators, schur, r: KKTVector) -> KKTVector:
    """Block-diagonal preconditioner with the Schur block replaced by ``schur``."""
    return KKTVector(
        u=r.u / ops.mass_scale,
        z=r.z / (ops.config.omega * ops.mass_scale),
        w=ops.field(schur.apply(r.w)),
    )


def evaluate_objective(ops: HeatOperators, u: np.ndarray, z: np.ndarray, target: np.ndarray | SpaceTimeFn) -> float:
    """Lumped-quadrature value of the tracking-plus-regularization objective.

    ``target`` is either sampled values of shape ``(nt, n_sp)`` or a callable
    ``target(x, y, t)``.
    """
    if callable(target):
        target = sample_target(ops, target)
    misfit = ops.field(u) - np.asarray(target, dtype=float).reshape(ops.shape)
    z = ops.field(z)
    return 0.5 * ops.mass_scale * float(np.sum(misfit**2)) + 0.5 * ops.config.omega * ops.mass_scale * float(np.sum(z**2))


def zero_control_objective(ops: HeatOperators, rhs: RhsBundle, target: np.ndarray | SpaceTimeFn) -> float:
    """Objective of the uncontrolled state, the reference every solve must beat."""
    u = ops.state_solve(rhs.f)
    return evaluate_objective(ops, u, np.zeros(ops.shape), target)


def kkt_residual(ops: HeatOperators, v: KKTVector, rhs: RhsBundle | KKTVector) -> float:
    """``||rhs - K v|| / ||rhs||``, or the absolute norm when rhs is zero."""
    b = rhs.as_kkt().to_flat() if isinstance(rhs, RhsBundle) else rhs.to_flat()
    res = np.linalg.norm(b - apply_K(ops, v).to_flat())
    nb = np.linalg.norm(b)
    return float(res / nb) if nb > 0 else float(res)


class KKTSystem:
    """Flat-vector callbacks for the Krylov solver."""

    def __init__(self, ops: HeatOperators, schur=None):
        self.ops = ops
        self.schur = schur

    @property
    def size(self) -> int:
        return 3 * self.ops.size

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return apply_K(self.ops, KKTVector.from_flat(v, self.ops.shape)).to_flat()

    def precondition(self, v: np.ndarray) -> np.ndarray:
        if self.schur is None:
            return np.array(v, dtype=float)
        return apply_P_inv(self.ops, self.schur, KKTVector.from_flat(v, self.ops.shape)).to_flat()
