"""odskit - output-diversified sampling for white-box and black-box attacks."""

__description__ = "Output-diversified sampling for white-box and black-box adversarial attacks."
__version__ = "0.1.0"

import os
import logging

from odskit.config_schema import ExperimentConfig
from odskit.logging_setup import setup_logging
from odskit import harness

_logger = None

COMMAND_STAGES = {
    "gen-data": "data",
    "train": "train",
    "attack": "attack",
    "diversity": "diversity",
    "report": "report",
}


def run(opts, config: ExperimentConfig) -> harness.OutputTree:
    """Run one CLI subcommand against the configured output tree."""
    global _logger
    if _logger is None:
        _logger = setup_logging(
            level=config.log_level,
            path=config.log_path or os.path.join(config.output_dir, "logs"),
            command=opts.command,
        )

    _logger.info(f"odskit - {__description__}")
    _logger.info(f"odskit - v{__version__} started: {opts.command} (seed {config.seed}, jobs {config.jobs})")

    tree = harness.OutputTree(config.output_dir)
    if opts.command == "run":
        return harness.run_experiment(config, config.output_dir)

    with harness.stage(COMMAND_STAGES[opts.command]):
        if opts.command == "gen-data":
            harness.generate_dataset(config, tree)
        elif opts.command == "train":
            train_set, _ = harness.load_dataset(tree)
            harness.train_models(config, train_set, tree)
        elif opts.command == "attack":
            _, test_set = harness.load_dataset(tree)
            harness.run_attacks(config, harness.load_models(config, tree), test_set, tree)
        elif opts.command == "diversity":
            _, test_set = harness.load_dataset(tree)
            harness.run_diversity(config, harness.load_models(config, tree), test_set, tree)
        elif opts.command == "report":
            harness.report(config, tree)

    _logger.info(f"Finished {opts.command}; outputs in {config.output_dir}")
    return tree
