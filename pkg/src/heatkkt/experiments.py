"""Single solves and parameter sweeps over the model control problem."""
from __future__ import annotations

import csv
import dataclasses
import logging
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from heatkkt.config import ConfigError, ProblemConfig
from heatkkt.gmres import gmres_solve
from heatkkt.heat import HeatOperators
from heatkkt.kkt import (
    KKTSystem,
    KKTVector,
    assemble_rhs,
    evaluate_objective,
    kkt_residual,
    model_initial_condition,
    model_target,
    zero_control_objective,
)
from heatkkt.partition import build_time_partition
from heatkkt.schur import make_schur_solver

log = logging.getLogger(__name__)

CSV_HEADER = (
    "nt", "nd", "steps_per_subdomain", "omega", "precond", "coarse_variant", "two_level_form",
    "jhat_sign", "iters", "converged", "final_relres", "objective", "setup_s", "solve_s",
)
DEFAULT_NT_LIST = (100, 200, 400, 800, 1600, 3200)
DEFAULT_OMEGAS_WEAK = (1e-2, 1e-3, 1e-4)
DEFAULT_OMEGAS_SWEEP = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
DEFAULT_PRECONDS = ("one-level", "two-level")
# Krylov basis budget before a run falls back to restarted GMRES
BASIS_MEMORY_BYTES = 2 * 1024**3


@dataclass
class RunRecord:
    config: ProblemConfig
    iterations: int
    converged: bool
    true_final_relres: float
    objective_value: float
    zero_control_objective: float
    setup_seconds: float
    solve_seconds: float
    restart_used: int | None = None

    def to_dict(self) -> dict:
        out = self.config.to_dict()
        out.update({k: v for k, v in dataclasses.asdict(self).items() if k != "config"})
        return out

    def csv_row(self) -> dict[str, str]:
        c = self.config
        return {
            "nt": str(c.nt),
            "nd": str(c.nd),
            "steps_per_subdomain": str(c.steps_per_subdomain),
            "omega": _decimal(c.omega),
            "precond": c.precond_kind,
            "coarse_variant": c.coarse_variant,
            "two_level_form": c.two_level_form,
            "jhat_sign": c.jhat_sign,
            "iters": str(self.iterations),
            "converged": "true" if self.converged else "false",
            "final_relres": _decimal(self.true_final_relres),
            "objective": _decimal(self.objective_value),
            "setup_s": _decimal(round(self.setup_seconds, 4)),
            "solve_s": _decimal(round(self.solve_seconds, 4)),
        }


@dataclass
class SweepNote:
    """A sweep point that produced no CSV row, with the reason."""

    nt: int
    omega: float
    precond: str
    reason: str


def _decimal(x: float) -> str:
    return np.format_float_positional(float(x), trim="-", unique=True)


def auto_restart(config: ProblemConfig) -> int | None:
    """Restart length that keeps the Krylov basis within BASIS_MEMORY_BYTES."""
    if config.gmres.restart is not None:
        return config.gmres.restart
    vector_bytes = 3 * config.nt * config.n_sp * 8
    if (config.gmres.max_iters + 1) * vector_bytes <= BASIS_MEMORY_BYTES:
        return None
    return max(10, BASIS_MEMORY_BYTES // vector_bytes - 1)


def solve_problem(config: ProblemConfig, u0=model_initial_condition, target=model_target) -> tuple[RunRecord, KKTVector]:
    """Build everything for one configuration, run GMRES and verify the result."""
    t0 = time.perf_counter()
    ops = HeatOperators(config)
    partition = build_time_partition(config.nt, config.nd, config.owner_policy)
    schur = make_schur_solver(ops, partition, config)
    system = KKTSystem(ops, schur)
    rhs = assemble_rhs(ops, u0, target)
    restart = auto_restart(config)
    params = dataclasses.replace(config.gmres, restart=restart)
    t1 = time.perf_counter()
    result = gmres_solve(system.matvec, rhs.as_kkt().to_flat(), system.precondition, params)
    t2 = time.perf_counter()
    solution = KKTVector.from_flat(result.solution, ops.shape)
    record = RunRecord(
        config=config,
        iterations=result.iterations,
        converged=result.converged,
        true_final_relres=kkt_residual(ops, solution, rhs),
        objective_value=evaluate_objective(ops, solution.u, solution.z, target),
        zero_control_objective=zero_control_objective(ops, rhs, target),
        setup_seconds=t1 - t0,
        solve_seconds=t2 - t1,
        restart_used=restart,
    )
    log.info(
        "nt=%d nd=%d omega=%g %s: %d iterations, converged=%s",
        config.nt, config.nd, config.omega, config.precond_kind, record.iterations, record.converged,
    )
    return record, solution


def run_config(config: ProblemConfig) -> RunRecord:
    return solve_problem(config)[0]


def _run_all(configs: Sequence[ProblemConfig], jobs: int) -> list[RunRecord | Exception]:
    if jobs <= 1:
        out: list[RunRecord | Exception] = []
        for c in configs:
            try:
                out.append(run_config(c))
            except Exception as exc:  # recorded per run, never fatal to the sweep
                log.warning("run failed for nt=%d omega=%g %s: %s", c.nt, c.omega, c.precond_kind, exc)
                out.append(exc)
        return out
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_config, c) for c in configs]
        results: list[RunRecord | Exception] = []
        for c, f in zip(configs, futures):
            try:
                results.append(f.result())
            except Exception as exc:
                log.warning("run failed for nt=%d omega=%g %s: %s", c.nt, c.omega, c.precond_kind, exc)
                results.append(exc)
        return results


def _collect(configs, results) -> tuple[list[RunRecord], list[SweepNote]]:
    records, notes = [], []
    for c, r in zip(configs, results):
        if isinstance(r, Exception):
            notes.append(SweepNote(c.nt, c.omega, c.precond_kind, f"failed: {r}"))
        else:
            records.append(r)
    records.sort(key=lambda r: (r.config.precond_kind, r.config.omega, r.config.nt))
    return records, notes


def weak_scaling(
    base: ProblemConfig,
    steps_per_subdomain: int,
    nt_list: Sequence[int] = DEFAULT_NT_LIST,
    omega_list: Sequence[float] = DEFAULT_OMEGAS_WEAK,
    precond_list: Sequence[str] = DEFAULT_PRECONDS,
    jobs: int = 1,
) -> tuple[list[RunRecord], list[SweepNote]]:
    """Grow nt and nd together at a fixed number of steps per subdomain."""
    if steps_per_subdomain < 1:
        raise ConfigError(f"steps per subdomain must be >= 1, got {steps_per_subdomain}")
    configs, notes = [], []
    for precond in precond_list:
        for omega in omega_list:
            for nt in nt_list:
                if nt % steps_per_subdomain:
                    notes.append(SweepNote(nt, omega, precond, f"nt={nt} is not divisible by {steps_per_subdomain} steps per subdomain"))
                    continue
                configs.append(base.replace(nt=nt, nd=nt // steps_per_subdomain, omega=omega, precond_kind=precond))
    records, failed = _collect(configs, _run_all(configs, jobs))
    return records, notes + failed


def omega_sweep(
    base: ProblemConfig,
    nt: int,
    nd: int,
    omega_list: Sequence[float] = DEFAULT_OMEGAS_SWEEP,
    precond_list: Sequence[str] = DEFAULT_PRECONDS,
    jobs: int = 1,
) -> tuple[list[RunRecord], list[SweepNote]]:
    configs = [base.replace(nt=nt, nd=nd, omega=om, precond_kind=p) for p in precond_list for om in omega_list]
    return _collect(configs, _run_all(configs, jobs))


def mesh_sweep(
    base: ProblemConfig,
    mesh_list: Sequence[int] = (8, 16, 32),
    precond_list: Sequence[str] = ("two-level",),
    jobs: int = 1,
) -> tuple[list[RunRecord], list[SweepNote]]:
    """Same time decomposition on several square meshes (intervals per direction)."""
    configs = [base.replace(nx=n, ny=n, precond_kind=p) for p in precond_list for n in mesh_list]
    records, notes = _collect(configs, _run_all(configs, jobs))
    records.sort(key=lambda r: (r.config.precond_kind, r.config.nx))
    return records, notes


def write_csv(records: Iterable[RunRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_HEADER, lineterminator="\n")
        writer.writeheader()
        for r in records:
            writer.writerow(r.csv_row())


class CsvFormatError(ValueError):
    pass


def read_csv(path: str | Path) -> list[dict]:
    """Parse a results CSV, converting numbers and booleans."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvFormatError(f"{path}: line 1: empty file, expected a header")
        if tuple(header) != CSV_HEADER:
            raise CsvFormatError(f"{path}: line 1: unexpected header {header}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise CsvFormatError(f"{path}: line {line}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            rec = dict(zip(CSV_HEADER, row))
            try:
                for key in ("nt", "nd", "steps_per_subdomain", "iters"):
                    rec[key] = int(rec[key])
                for key in ("omega", "final_relres", "objective", "setup_s", "solve_s"):
                    rec[key] = float(rec[key])
            except ValueError as exc:
                raise CsvFormatError(f"{path}: line {line}: {exc}") from exc
            if rec["converged"] not in ("true", "false"):
                raise CsvFormatError(f"{path}: line {line}: converged must be true or false")
            rec["converged"] = rec["converged"] == "true"
            rows.append(rec)
    return rows
