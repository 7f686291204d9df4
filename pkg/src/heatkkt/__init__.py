"""Space-time KKT solver for heat-equation-constrained control with a two-level time-parallel Schur preconditioner."""

from heatkkt.config import ConfigError, GmresParams, ProblemConfig
from heatkkt.gmres import GmresResult, gmres_solve
from heatkkt.heat import HeatOperators
from heatkkt.kkt import KKTSystem, KKTVector, RhsBundle, apply_K, apply_P_inv, assemble_rhs
from heatkkt.partition import TimePartition, build_time_partition
from heatkkt.schur import RASQ, TwoLevel, build_coarse_space, make_schur_solver

__all__ = [
    "ConfigError",
    "GmresParams",
    "GmresResult",
    "HeatOperators",
    "KKTSystem",
    "KKTVector",
    "ProblemConfig",
    "RASQ",
    "RhsBundle",
    "TimePartition",
    "TwoLevel",
    "apply_K",
    "apply_P_inv",
    "assemble_rhs",
    "build_coarse_space",
    "build_time_partition",
    "gmres_solve",
    "make_schur_solver",
]
