"""Command line entry point: ``nehari-lab <command> --config PATH``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import parse_config
from .errors import ConfigError, NehariLabError
from .runner import run_experiment

EPILOG = ("cubic family: the config beta enters the equations as "
          "-Δu_i + V_i u_i = λ_i u_i³ - β u_i Σ_{j≠i} u_j², the same β as in solve-mass.")

COMMANDS = {
    "solve": "solve",
    "solve-mass": "solve_mass",
    "check": "check_assumptions",
    "polarize": "polarize_audit",
    "sweep": "sweep_beta",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nehari-lab", description=__doc__, epilog=EPILOG)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, task in COMMANDS.items():
        p = sub.add_parser(name, help=f"run task {task}")
        p.add_argument("--config", required=True, type=Path, help="experiment config (JSON)")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: config 'output')")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=None, help="parallel sweep entries")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = parse_config(args.config.read_text())
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    task = COMMANDS[args.command]
    if config.task != task:
        # the subcommand decides the task; re-validate so task-specific rules apply
        try:
            config = parse_config(_retask(config, task))
        except ConfigError as exc:
            print(exc, file=sys.stderr)
            return 2
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.workers is not None:
        if args.workers < 1:
            print("--workers must be >= 1", file=sys.stderr)
            return 2
        config = dataclasses.replace(config, workers=args.workers)
    try:
        summary = run_experiment(config, args.out)
    except NehariLabError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    out = args.out if args.out is not None else config.output
    for name, ok in summary.acceptance.items():
        print(f"{'PASS' if ok is not False else 'FAIL'} {name}")
    print(f"summary written to {Path(out) / 'summary.json'}")
    return 0 if summary.passed else 1


def _retask(config, task: str) -> str:
    import json

    d = config.to_dict()
    d["task"] = task
    return json.dumps(d)


if __name__ == "__main__":
    sys.exit(main())
