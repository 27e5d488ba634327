"""Command-line front end: parse flags, build a config, run, emit JSON.

Exit codes: 0 success, 2 bad input, 3 budget exceeded, 4 a strict-mode
statistical check failed.  The report always goes to stdout; --out adds a
report file plus CSV/SVG side files according to --format.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .errors import (
    BudgetError,
    CascadeError,
    ConditionError,
    InsufficientDataError,
    NoRootError,
    NotFoundError,
    UnsupportedLawError,
    ValidationError,
)
from .harness import COMMANDS, ExperimentConfig, run
from .laws import law_from_spec

_DEFAULT_LAW = '{"family": "uniform_iid"}'


def _parse_opt(pairs: List[str]) -> dict:
    """KEY=VALUE options; values parse as JSON, falling back to strings."""
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValidationError(f"options: expected KEY=VALUE, got {pair!r}")
        key, _, raw = pair.partition("=")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascade-dendrite",
        description="Cascade dendrite experiments: dimension, percolation, heights.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} experiment")
        cmd.add_argument("--law", default=_DEFAULT_LAW, help="weight law as JSON")
        cmd.add_argument("--seed", type=int, default=0, help="base seed")
        cmd.add_argument("--replicas", type=int, default=1, help="replica count")
        cmd.add_argument("--delta", type=float, default=None, help="cut-set scale")
        cmd.add_argument(
            "--radii", default=None, help="comma-separated fit radii (dimension)"
        )
        cmd.add_argument("--depth", type=int, default=None, help="generation depth")
        cmd.add_argument("--out", default=None, metavar="DIR", help="output directory")
        cmd.add_argument(
            "--format",
            action="append",
            choices=("json", "csv", "svg"),
            default=None,
            help="output formats for --out (repeatable)",
        )
        cmd.add_argument(
            "--opt",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="experiment-specific option (JSON value; repeatable)",
        )
        cmd.add_argument(
            "--strict",
            action="store_true",
            help="exit 4 when a statistical check in the report fails",
        )
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    try:
        spec = json.loads(args.law)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"law: not valid JSON ({exc})") from exc
    law = law_from_spec(spec)
    radii = None
    if args.radii is not None:
        try:
            radii = tuple(float(r) for r in args.radii.split(","))
        except ValueError as exc:
            raise ValidationError(f"radii: {exc}") from exc
    formats = tuple(args.format) if args.format else ("json", "csv")
    return ExperimentConfig(
        command=args.command,
        law=law,
        seed=args.seed,
        replicas=args.replicas,
        delta=args.delta,
        radii=radii,
        depth=args.depth,
        out_dir=args.out,
        formats=formats,
        options=_parse_opt(args.opt),
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        report = run(config)
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    except (
        ValidationError,
        UnsupportedLawError,
        ConditionError,
        NotFoundError,
        NoRootError,
        InsufficientDataError,
    ) as exc:
        print(f"invalid request: {exc}", file=sys.stderr)
        return 2
    except CascadeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(report.to_json())
    if args.strict and report.results.get("passed") is False:
        print("statistical check failed", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
