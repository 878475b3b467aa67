"""Command-line interface.

    conekahler <solve|verify|probe-cone|geodesic|report>
               --config PATH [--seed N] [--out DIR] [--tol-scale X]

Prints one PASS/FAIL line per executed check and writes report.json (plus
field/trajectory dumps) to the output directory. Exit status 0 iff every
check passed.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .runner import run

SUBCOMMANDS = ("solve", "verify", "probe-cone", "geodesic", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conekahler",
        description="Construct and verify scalar-flat Kahler metrics with prescribed cone angle.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--tol-scale", type=float, default=1.0, help="scale every tolerance")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_config(args.config)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    try:
        report = run(scenario, args.subcommand, args.out, seed=args.seed, tol_scale=args.tol_scale)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in report.summary_lines():
        print(line)
    print(f"report written to {args.out}/report.json")
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
