#!/usr/bin/env python3
"""
Command-line interface for cbc-lab.

    cbc-lab <experiment> --config <file> [--out <dir>] [--seed <u64>] [--threads <n>]
    cbc-lab validate --config <file>
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .config.constants import EXIT_CONFIG, EXPERIMENT_KINDS
from .core.config import configure, get_config_manager
from .core.errors import ConfigError
from .services.orchestrator import ExperimentOrchestrator, run_experiment
from .services.workspace import validate_config


logger = logging.getLogger(__name__)


def _parse_assignments(items: list[str]) -> dict[str, object]:
    overrides: dict[str, object] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"expected KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", required=True, help="experiment config (.toml, .yaml or key=value)")
    parser.add_argument(
        "--set",
        dest="assignments",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a dotted config key, e.g. params.n_paths=1000",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    parser.add_argument("--quiet", "-q", action="store_true", help="warnings and errors only")
    parser.add_argument(
        "--format", choices=["standard", "compact"], default="standard", help="console output style"
    )


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subcommand per experiment kind."""
    parser = argparse.ArgumentParser(
        prog="cbc-lab",
        description="Numerical experiments for continuous-state branching processes with competition",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for kind in EXPERIMENT_KINDS:
        sub = subparsers.add_parser(kind, help=f"run the {kind} experiment")
        _add_common_arguments(sub)
        sub.add_argument("--out", "-o", help="artifact directory (overrides 'output')")
        sub.add_argument("--seed", type=int, help="64-bit RNG seed (overrides 'seed')")
        sub.add_argument("--threads", type=int, help="worker threads (overrides 'threads' and $CBC_LAB_THREADS)")
        sub.add_argument("--timeout", type=float, help="seconds before the run is abandoned")

    validate = subparsers.add_parser("validate", help="check a config file and report every problem")
    _add_common_arguments(validate)
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def main(argv: Optional[list[str]] = None) -> int:
    """
    Main entry point for the CLI.

    Returns the process exit code: 0 success, 1 config error, 2 invariant
    breach, 3 numerical failure, 124 timeout. A timed-out run ends the process
    immediately because the worker thread cannot be interrupted.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    configure(formatter_type=args.format)
    orchestrator = ExperimentOrchestrator()

    try:
        overrides = _parse_assignments(args.assignments)
    except ValueError as e:
        print(f"--set: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command != "validate":
        overrides.update(
            experiment=args.command,
            seed=args.seed,
            threads=args.threads,
            output=args.out,
        )
    try:
        config = validate_config(args.config, overrides=overrides)
    except ConfigError as e:
        logger.error(f"invalid config {args.config}")
        for diagnostic in e.diagnostics:
            print(f"{args.config}: {diagnostic}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        print(
            get_config_manager().get_formatter().format_success(
                "validate",
                f"{config.experiment} config is valid",
                f"sha256 {config.sha256}",
            )
        )
        return 0

    outcome = run_experiment(config, Path(config.output), args.timeout)
    print(orchestrator.render(outcome))
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
