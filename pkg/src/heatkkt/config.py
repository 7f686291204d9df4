"""Problem and solver configuration."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

PRECOND_KINDS = ("none", "one-level", "two-level", "dense-schur", "true-schur")
COARSE_VARIANTS = ("scalar", "per-dof")
TWO_LEVEL_FORMS = ("literal", "multiplicative", "additive")
TWO_LEVEL_ORDERS = ("coarse-first", "fine-first")
JHAT_SIGNS = ("plus", "minus")
OWNER_POLICIES = ("earlier", "later")


class ConfigError(ValueError):
    """Raised for invalid problem or solver parameters."""


@dataclass(frozen=True)
class GmresParams:
    tol: float = 1e-6
    max_iters: int = 420
    restart: int | None = None
    happy_breakdown_tol: float = 1e-14

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError(f"gmres tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ConfigError(f"gmres max_iters must be >= 1, got {self.max_iters}")
        if self.restart is not None and self.restart < 1:
            raise ConfigError(f"gmres restart must be >= 1, got {self.restart}")


@dataclass(frozen=True)
class ProblemConfig:
    """All continuous, discrete and solver parameters of one run.

    ``nx``/``ny`` count mesh intervals, so the grid has ``nx + 1`` points per
    direction and ``(nx - 1) * (ny - 1)`` interior unknowns per time-node.
    """

    lx: float = 1.0
    ly: float = 2.0
    t_final: float = 1.0
    nx: int = 16
    ny: int = 16
    nt: int = 100
    nu: float = 1.0
    omega: float = 1e-3
    nd: int = 5
    precond_kind: str = "two-level"
    coarse_variant: str = "per-dof"
    two_level_form: str = "multiplicative"
    two_level_order: str = "fine-first"
    jhat_sign: str = "minus"
    owner_policy: str = "earlier"
    gmres: GmresParams = field(default_factory=GmresParams)

    def __post_init__(self):
        if self.nd < 1:
            raise ConfigError(f"nd must be >= 1, got {self.nd}")
        if self.nt < 1 or self.nt % self.nd:
            raise ConfigError(f"nt={self.nt} is not divisible by nd={self.nd}")
        if not self.omega > 0:
            raise ConfigError(f"omega must be positive, got {self.omega}")
        if self.nx < 2 or self.ny < 2:
            raise ConfigError(f"nx and ny must be >= 2, got nx={self.nx}, ny={self.ny}")
        if self.nu < 0:
            raise ConfigError(f"nu must be non-negative, got {self.nu}")
        if self.lx <= 0 or self.ly <= 0 or self.t_final <= 0:
            raise ConfigError("domain extents and final time must be positive")
        _check_choice("precond_kind", self.precond_kind, PRECOND_KINDS)
        _check_choice("coarse_variant", self.coarse_variant, COARSE_VARIANTS)
        _check_choice("two_level_form", self.two_level_form, TWO_LEVEL_FORMS)
        _check_choice("two_level_order", self.two_level_order, TWO_LEVEL_ORDERS)
        _check_choice("jhat_sign", self.jhat_sign, JHAT_SIGNS)
        _check_choice("owner_policy", self.owner_policy, OWNER_POLICIES)
        if isinstance(self.gmres, dict):
            object.__setattr__(self, "gmres", GmresParams(**self.gmres))

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def dt(self) -> float:
        return self.t_final / self.nt

    @property
    def n_sp(self) -> int:
        return (self.nx - 1) * (self.ny - 1)

    @property
    def steps_per_subdomain(self) -> int:
        return self.nt // self.nd

    def replace(self, **changes: Any) -> ProblemConfig:
        gmres_keys = {"tol", "max_iters", "restart", "happy_breakdown_tol"}
        gmres_changes = {k: changes.pop(k) for k in list(changes) if k in gmres_keys}
        if gmres_changes:
            changes["gmres"] = dataclasses.replace(self.gmres, **gmres_changes)
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ProblemConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known - {"tol", "max_iters", "restart", "happy_breakdown_tol"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls().replace(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> ProblemConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return cls.from_dict(data)


def _check_choice(name: str, value: str, choices: tuple[str, ...]) -> None:
    if value not in choices:
        raise ConfigError(f"{name} must be one of {choices}, got {value!r}")
