#!/usr/bin/env python3
"""odskit - output-diversified sampling attack toolkit CLI."""

import argparse
import sys

import odskit
from odskit.config_loader import load_config, apply_overrides, ConfigError
from odskit.harness import StageError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=odskit.__description__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--config', '-c',
        help="Path to config file (default: searches standard locations)"
    )
    common.add_argument(
        '--seed', type=int,
        help="Master seed (overrides the config file)"
    )
    common.add_argument(
        '--out',
        help="Output directory (overrides the config file)"
    )
    common.add_argument(
        '--jobs', type=int,
        help="Worker processes for per-input attacks"
    )

    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('gen-data', parents=[common], help="Generate and split the synthetic dataset")
    commands.add_parser('train', parents=[common], help="Train target, robust twin and surrogates")
    commands.add_parser('attack', parents=[common], help="Run the attack suite")
    commands.add_parser('diversity', parents=[common], help="Measure start-point and transfer diversity")
    commands.add_parser('report', parents=[common], help="Summarize results into tables")
    commands.add_parser('run', parents=[common], help="Full pipeline")
    return parser


def main(argv=None):
    opts = build_parser().parse_args(argv)

    # Load configuration
    try:
        config = load_config(opts.config)
        config = apply_overrides(config, seed=opts.seed, out=opts.out, jobs=opts.jobs)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        sys.exit(1)

    # Run
    try:
        odskit.run(opts, config)
    except StageError as e:
        print(f"[{e.stage}] {e}", file=sys.stderr)
        sys.exit(e.exit_code)


if __name__ == '__main__':
    main()
