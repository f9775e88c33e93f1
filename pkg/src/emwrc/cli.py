"""Command-line entry point: analyze | oracle-check | simulate | overhead | sweep."""
from __future__ import annotations

import argparse
import sys

from . import harness
from .errors import ConfigError, RoundLimitExceeded, SchemeMismatch, TooFewUsers, TooLarge

EXIT_OK, EXIT_CONFIG, EXIT_DEVIATION, EXIT_LIMIT = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    # defaults are SUPPRESSed so that only flags actually given override --config
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON file with the same keys as the flags")
    p.add_argument("--scheme", default=S, help="owr, mpwr, oppwr, a comma list, or all")
    p.add_argument("--users", default=S, help="N or A..B")
    p.add_argument("--eps-up", dest="eps_up", default=S, help="uplink erasure: p, per-user list, or grid (sweep)")
    p.add_argument("--eps-down", dest="eps_down", default=S, help="downlink erasure, same forms as --eps-up")
    p.add_argument("--reconstruct", action="store_true", default=S)
    p.add_argument("--shuffle", action="store_true", default=S)
    p.add_argument("--rounds", type=int, default=S)
    p.add_argument("--trials", type=int, default=S)
    p.add_argument("--packets", type=int, default=S, help="source packets K per user")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--workers", type=int, default=S)
    p.add_argument("--output", default=S, help="CSV path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="emwrc", description="Pairwise relaying over erasure multi-way relay channels")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("analyze", help="closed-form EEER, rates and overhead prediction")
    _common(p)
    p.add_argument("--exact", action="store_true", default=argparse.SUPPRESS,
                   help="use exhaustive enumeration instead of the recursions (N <= 7)")
    p = sub.add_parser("oracle-check", help="recursions vs exhaustive enumeration")
    _common(p)
    p = sub.add_parser("simulate", help="Monte Carlo rounds without the fountain layer")
    _common(p)
    p = sub.add_parser("overhead", help="full pipeline with fountain coding")
    _common(p)
    p.add_argument("--round-cap", dest="round_cap", type=int, default=argparse.SUPPRESS)
    p = sub.add_parser("sweep", help="cartesian product of schemes, users and erasure grids")
    _common(p)
    p.add_argument("--exact", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("--simulate", action="store_true", default=argparse.SUPPRESS,
                   help="add Monte Carlo rows per cell (needs --seed)")
    return ap


def make_config(args: argparse.Namespace) -> harness.ExperimentConfig:
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    cfg = harness.ExperimentConfig()
    path = getattr(args, "config", None)
    if path:
        cfg = harness.config_from_mapping(harness.load_config_file(path), cfg)
    return harness.config_from_mapping(given, cfg)


def _emit(records, output: str | None) -> None:
    if output:
        with open(output, "w", newline="") as fh:
            harness.write_csv(records, fh)
    else:
        harness.write_csv(records, sys.stdout)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        if args.command == "analyze":
            _emit(harness.cmd_analyze(cfg), cfg.output)
        elif args.command == "oracle-check":
            report = harness.cmd_oracle_check(cfg)
            for line in report.lines:
                print(line, file=sys.stderr if cfg.output is None else sys.stdout)
            _emit(report.records, cfg.output)
            if not report.ok:
                return EXIT_DEVIATION
        elif args.command == "simulate":
            _emit(harness.cmd_simulate(cfg), cfg.output)
        elif args.command == "overhead":
            _emit(harness.cmd_overhead(cfg), cfg.output)
        elif args.command == "sweep":
            _emit(harness.cmd_sweep(cfg), cfg.output)
    except (ConfigError, TooFewUsers, SchemeMismatch, ValueError) as exc:
        print(f"emwrc: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RoundLimitExceeded, TooLarge) as exc:
        print(f"emwrc: limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
