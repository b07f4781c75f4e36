"""Command-line entry point: ``restsens <subcommand> --config FILE``.

Exit codes: 0 when the experiment ran (whatever the verdict), 2 for a config
error, 3 when the experiment could not be carried out.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import ConfigError, emit_report, parse_config, run_experiment
from .suite import format_table, run_suite, suite_payload

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

SUBCOMMANDS = {
    "check-rs": "restricted sensitivity at sampled points",
    "check-rps": "restricted pairwise sensitivity over sampled pairs",
    "witness": "construct and verify a failure witness",
    "entropy": "entropy estimates",
    "rate": "minimal asymptotic rate along sample orbits",
    "bound-check": "internal consistency checks against brute force",
}


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="restsens", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, what in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=what)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--seed", type=_seed, help="override the config seed")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p = sub.add_parser("paper-suite", help="run every bundled reproduction experiment")
    p.add_argument("--seed", type=_seed, help="use this seed for every experiment")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="format of the payload written to --out (json only)")
    p.add_argument("--out", type=Path, help="write all report payloads here as JSON")
    p.add_argument("--only", type=int, action="append", help="run only this entry id (repeatable)")
    return ap


def _write(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "paper-suite":
        if args.format != "json":
            print("paper-suite payloads are JSON only", file=sys.stderr)
            return EXIT_CONFIG
        results = run_suite(args.seed, set(args.only) if args.only else None)
        sys.stdout.write(format_table(results))
        if args.out:
            args.out.write_text(suite_payload(results))
        errored = any(rep.verdict == "ERROR" for r in results for rep in r.reports)
        return EXIT_RUNTIME if errored else EXIT_OK
    try:
        text = args.config.read_text()
        cfg = parse_config(text, default_kind=args.command)
    except (OSError, ConfigError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    expected = args.command
    if not (cfg.kind == expected or (expected == "witness" and cfg.kind.startswith("witness"))):
        print(f"config error: [experiment] kind is {cfg.kind}, not {expected}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    try:
        report = run_experiment(cfg)
    except ValueError as e:  # includes ConfigError
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    _write(emit_report(report, args.format), args.out)
    if report.failure:
        print(f"could not run: {report.failure['type']}: {report.failure['message']}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
