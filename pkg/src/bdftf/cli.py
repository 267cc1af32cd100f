"""Command line entry point: ``bdftf run|list-scenarios|validate-config``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import SCENARIOS, ConfigError, describe_keys, parse_config
from .scenarios import NumericalFailure, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _read(path):
    if path is None:
        return ""
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bdftf", description="Time-filtered BDF Stokes-Darcy experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario")
    run.add_argument("scenario", nargs="?", help="scenario name (may also come from the config file)")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config value")
    sub.add_parser("list-scenarios", help="print the available scenarios")
    val = sub.add_parser("validate-config", help="check a config file without running it")
    val.add_argument("config", nargs="?", help="config file")
    val.add_argument("--scenario")
    val.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sub.add_parser("list-keys", help="print every config key with its default")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-scenarios":
        print("\n".join(SCENARIOS))
        return EXIT_OK
    if args.command == "list-keys":
        print(describe_keys())
        return EXIT_OK
    try:
        if args.command == "validate-config":
            config = parse_config(_read(args.config), args.set, args.scenario)
            print(f"ok: scenario={config.scenario}")
            return EXIT_OK
        config = parse_config(_read(args.config), args.set, args.scenario)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_scenario(config)
    except NumericalFailure as exc:
        print(f"numerical failure in {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(result.summary_line())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
