# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Command-line interface for line-tension experiments."""

import argparse
import logging
import sys
from typing import Sequence

from . import RunConfig, report, run, verify
from .config import GEOMETRY_FORMATS
from .errors import ConfigError, LineTensionError
from .harness import INJECTIONS

# Verbosity flag count to logging level
LOG_LEVELS = {0: logging.WARNING, 1: logging.INFO, 2: logging.DEBUG}


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        prog="linetension",
        description="Polyhedral approximation and line-tension energy experiments.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""\
Examples:
  # Glue the default field at the configured resolutions
  linetension approximate --config runs/cube.yaml

  # Upper-bound experiment with another seed and output directory
  linetension energy --config runs/cube.yaml --seed 7 --out runs/cube-7

  # Envelope ladder and property checks, OBJ geometry
  linetension envelope --config runs/cube.yaml --format obj

  # Verification suite with an injected normal-jump violation
  linetension verify --config runs/cube.yaml --inject normal-jump

  # Summarize an output directory and check its file hashes
  linetension report --out runs/cube
""",
    )
    parser.add_argument(
        "command",
        choices=["approximate", "energy", "envelope", "verify", "report"],
        help="Experiment to run",
    )
    parser.add_argument(
        "--config",
        "-c",
        metavar="PATH",
        help="YAML run configuration (built-in defaults if omitted)",
    )
    parser.add_argument("--seed", "-s", type=int, metavar="U64", help="Override the run seed")
    parser.add_argument("--out", "-o", metavar="DIR", help="Override the output directory")
    parser.add_argument(
        "--format",
        "-f",
        choices=GEOMETRY_FORMATS,
        help="Geometry export format (default: csv)",
    )
    parser.add_argument(
        "--inject",
        choices=INJECTIONS,
        help="Fault injected by the verify command",
    )
    parser.add_argument(
        "--verbose",
        "-v",
        action="count",
        default=0,
        help="Increase log output (-v info, -vv debug)",
    )
    return parser.parse_args(argv)


def load_config(args: argparse.Namespace) -> RunConfig:
    """Load the configuration and apply command-line overrides."""
    config = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError([f"--seed must be an unsigned 64-bit integer, got {args.seed}"])
        config.seed = args.seed
    if args.out is not None:
        config.output = args.out
    if args.format is not None:
        config.format = args.format
    return config


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command-line interface."""
    args = parse_args(argv)
    logging.basicConfig(
        level=LOG_LEVELS[min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.command == "report":
            if args.out is None and args.config is None:
                print("Error: report needs --out or --config", file=sys.stderr)
                return 1
            print(report(args.out or load_config(args).output))
            return 0

        config = load_config(args)
        if args.command == "verify":
            results = verify(config, inject=args.inject)
            for check in results:
                status = "PASS" if check.passed else "FAIL"
                print(f"{status} {check.name}: {check.detail}")
            failed = sum(not c.passed for c in results)
            print(f"{len(results) - failed}/{len(results)} checks passed")
            return 1 if failed else 0

        result = run(config, args.command)
        print(f"Wrote {len(result.files)} files to {result.output}")
        if not result.passed:
            print("Some bounds did not hold; see the summaries", file=sys.stderr)
        return result.status
    except LineTensionError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
