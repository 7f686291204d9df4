"""Command-line driver: single solves, sweeps and charts."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from heatkkt.chart import chart_from_csv
from heatkkt.config import (
    COARSE_VARIANTS,
    JHAT_SIGNS,
    PRECOND_KINDS,
    TWO_LEVEL_FORMS,
    TWO_LEVEL_ORDERS,
    ConfigError,
    ProblemConfig,
)
from heatkkt.experiments import (
    DEFAULT_NT_LIST,
    DEFAULT_OMEGAS_SWEEP,
    DEFAULT_OMEGAS_WEAK,
    DEFAULT_PRECONDS,
    CsvFormatError,
    RunRecord,
    SweepNote,
    omega_sweep,
    solve_problem,
    weak_scaling,
    write_csv,
)

log = logging.getLogger("heatkkt")

# flag name -> ProblemConfig field
_OVERRIDES = {
    "nt": "nt",
    "nd": "nd",
    "omega": "omega",
    "nu": "nu",
    "nx": "nx",
    "ny": "ny",
    "precond": "precond_kind",
    "coarse": "coarse_variant",
    "two_level_form": "two_level_form",
    "two_level_order": "two_level_order",
    "jhat_sign": "jhat_sign",
    "tol": "tol",
    "max_iters": "max_iters",
    "restart": "restart",
}


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _str_list(text: str) -> list[str]:
    return [v for v in text.split(",") if v]


def _add_config_flags(p: argparse.ArgumentParser, sweep: bool) -> None:
    p.add_argument("--config", type=Path, help="JSON file with ProblemConfig fields")
    if not sweep:
        p.add_argument("--nt", type=int)
        p.add_argument("--nd", type=int)
        p.add_argument("--omega", type=float)
        p.add_argument("--precond", choices=PRECOND_KINDS)
    p.add_argument("--nu", type=float)
    p.add_argument("--nx", type=int, help="mesh intervals in x")
    p.add_argument("--ny", type=int, help="mesh intervals in y")
    p.add_argument("--coarse", choices=COARSE_VARIANTS)
    p.add_argument("--two-level-form", choices=TWO_LEVEL_FORMS)
    p.add_argument("--two-level-order", choices=TWO_LEVEL_ORDERS)
    p.add_argument("--jhat-sign", choices=JHAT_SIGNS)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--restart", type=int)
    p.add_argument("--out", type=Path, required=sweep)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatkkt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one configuration and write a JSON record")
    _add_config_flags(p, sweep=False)
    p.add_argument("--steps-per-subdomain", type=int, help="sets nd = nt / steps")
    p.add_argument("--save-solution", type=Path, help="write u, z, w to an .npz file")

    p = sub.add_parser("weak-scaling", help="grow nt and nd together")
    _add_config_flags(p, sweep=True)
    p.add_argument("--steps-per-subdomain", type=int, required=True)
    p.add_argument("--nt", type=_int_list, default=list(DEFAULT_NT_LIST), help="comma-separated")
    p.add_argument("--omega", type=_float_list, default=list(DEFAULT_OMEGAS_WEAK), help="comma-separated")
    p.add_argument("--precond", type=_str_list, default=list(DEFAULT_PRECONDS), help="comma-separated")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("omega-sweep", help="vary omega at fixed nt and nd")
    _add_config_flags(p, sweep=True)
    p.add_argument("--nt", type=int, required=True)
    p.add_argument("--nd", type=int)
    p.add_argument("--steps-per-subdomain", type=int)
    p.add_argument("--omega", type=_float_list, default=list(DEFAULT_OMEGAS_SWEEP), help="comma-separated")
    p.add_argument("--precond", type=_str_list, default=list(DEFAULT_PRECONDS), help="comma-separated")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("chart", help="render a results CSV as SVG")
    p.add_argument("csv", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--title", default="")
    return parser


def config_from_args(args: argparse.Namespace, skip: tuple[str, ...] = ()) -> ProblemConfig:
    base = ProblemConfig.from_json(args.config) if getattr(args, "config", None) else ProblemConfig()
    changes = {}
    for flag, key in _OVERRIDES.items():
        if flag in skip:
            continue
        value = getattr(args, flag, None)
        if value is not None:
            changes[key] = value
    steps = getattr(args, "steps_per_subdomain", None)
    if steps is not None and "nd" not in skip:
        if getattr(args, "nd", None) is not None:
            raise ConfigError("give either --nd or --steps-per-subdomain, not both")
        nt = changes.get("nt", base.nt)
        if steps < 1 or nt % steps:
            raise ConfigError(f"nt={nt} is not divisible by {steps} steps per subdomain")
        changes["nd"] = nt // steps
    return base.replace(**changes)


def _check_preconds(names: list[str]) -> None:
    for name in names:
        if name not in PRECOND_KINDS:
            raise ConfigError(f"unknown preconditioner {name!r}, expected one of {PRECOND_KINDS}")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)}")


def _write_sidecar(out: Path, records: list[RunRecord], notes: list[SweepNote]) -> Path:
    sidecar = out.with_suffix(out.suffix + ".json")
    payload = {
        "rows": len(records),
        "restart": [
            {"nt": r.config.nt, "omega": r.config.omega, "precond": r.config.precond_kind, "restart": r.restart_used}
            for r in records
        ],
        "skipped_or_failed": [dataclasses.asdict(n) for n in notes],
    }
    sidecar.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")
    return sidecar


def cmd_solve(args: argparse.Namespace) -> None:
    config = config_from_args(args)
    record, solution = solve_problem(config)
    text = json.dumps(record.to_dict(), indent=2, default=_json_default) + "\n"
    if args.out:
        args.out.write_text(text)
    sys.stdout.write(text)
    if args.save_solution:
        np.savez(args.save_solution, u=solution.u, z=solution.z, w=solution.w)


def cmd_weak_scaling(args: argparse.Namespace) -> None:
    base = config_from_args(args, skip=("nt", "nd", "omega", "precond"))
    _check_preconds(args.precond)
    records, notes = weak_scaling(base, args.steps_per_subdomain, args.nt, args.omega, args.precond, args.jobs)
    write_csv(records, args.out)
    _write_sidecar(args.out, records, notes)
    for n in notes:
        log.warning("nt=%d omega=%g %s: %s", n.nt, n.omega, n.precond, n.reason)


def cmd_omega_sweep(args: argparse.Namespace) -> None:
    base = config_from_args(args, skip=("omega", "precond"))
    _check_preconds(args.precond)
    records, notes = omega_sweep(base, base.nt, base.nd, args.omega, args.precond, args.jobs)
    write_csv(records, args.out)
    _write_sidecar(args.out, records, notes)


def cmd_chart(args: argparse.Namespace) -> None:
    chart_from_csv(args.csv, args.out, args.title)


COMMANDS = {
    "solve": cmd_solve,
    "weak-scaling": cmd_weak_scaling,
    "omega-sweep": cmd_omega_sweep,
    "chart": cmd_chart,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ConfigError, CsvFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
