"""Experiment stages: data, train, attack, diversity, report.

Every stage reads and writes the output tree, so each can run on its own
(the CLI subcommands) or chained by run_experiment.
"""

import contextlib
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from odskit import datasets, metrics
from odskit.config_schema import BlackboxAttackConfig, ExperimentConfig, ModelSpec
from odskit.datasets import Dataset
from odskit.models import MlpClassifier, accuracy, init_mlp, load, predict, save, train
from odskit.processors import blackbox as blackbox_processor
from odskit.processors import diversity as diversity_processor
from odskit.processors import whitebox as whitebox_processor
from odskit.processors.pool import EvalInputs
from odskit.processors.whitebox import CampaignResult
from odskit.storage import tables

logger = logging.getLogger("odskit")

FAMILIES = ["pgd", "cw", "simba", "rgf", "boundary"]
STAGE_EXIT_CODES = {"data": 2, "train": 3, "attack": 4, "diversity": 5, "report": 6}
NATURAL_TARGET = "target"
ROBUST_TARGET = "target_robust"


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage

    @property
    def exit_code(self) -> int:
        return STAGE_EXIT_CODES.get(self.stage, 1)


@contextlib.contextmanager
def stage(name: str):
    """Tag any failure inside the block with the stage name."""
    logger.info(f"Stage '{name}' started")
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        logger.error(f"Stage '{name}' failed: {e}")
        raise StageError(name, f"{type(e).__name__}: {e}") from e
    logger.info(f"Stage '{name}' finished")


class OutputTree:
    """File layout under the output directory."""

    def __init__(self, root: str):
        self.root = root

    def _path(self, *parts) -> str:
        return os.path.join(self.root, *parts)

    @property
    def dataset(self) -> str:
        return self._path("data", "dataset.json")

    def model(self, name: str) -> str:
        return self._path("models", f"{name}.json")

    def trace(self, attack: str) -> str:
        return self._path("traces", f"{attack}.csv")

    def results(self, attack: str) -> str:
        return self._path("results", f"{attack}.csv")

    @property
    def diversity(self) -> str:
        return self._path("diversity", "diversity.csv")

    def summary_table(self, family: str) -> str:
        return self._path("summary", f"{family}.csv")

    @property
    def summary_text(self) -> str:
        return self._path("summary", "summary.txt")

    def series(self, attack: str, curve: str) -> str:
        return self._path("series", f"{attack}_{curve}.csv")


@dataclass
class TrainedModels:
    natural: MlpClassifier
    robust: Optional[MlpClassifier] = None
    surrogates: Dict[str, MlpClassifier] = field(default_factory=dict)
    ood_surrogates: Dict[str, MlpClassifier] = field(default_factory=dict)


def _target_classes(config: ExperimentConfig) -> List[int]:
    return list(range(config.dataset.classes))


def _ood_classes(config: ExperimentConfig) -> List[int]:
    k = config.dataset.classes
    return list(range(k, k + config.dataset.ood_classes))


def generate_dataset(config: ExperimentConfig, tree: OutputTree) -> Tuple[Dataset, Dataset]:
    """Generate, split and save the dataset (target and held-out OOD classes together)."""
    full = datasets.generate(config.dataset)
    train_set, test_set = datasets.split(full, config.dataset.train_fraction, config.dataset.seed)
    datasets.save_splits(tree.dataset, train_set, test_set, config.dataset)
    logger.info(
        f"Dataset: {len(train_set)} train / {len(test_set)} test samples, "
        f"{full.num_classes} classes in {full.dim} dims -> {tree.dataset}"
    )
    return train_set, test_set


def load_dataset(tree: OutputTree) -> Tuple[Dataset, Dataset]:
    if not os.path.exists(tree.dataset):
        raise FileNotFoundError(f"No dataset at {tree.dataset}; run gen-data first")
    return datasets.load_splits(tree.dataset)


def _train_one(spec: ModelSpec, data: Dataset, num_classes: int, config_override=None) -> MlpClassifier:
    model = init_mlp([data.dim, *spec.hidden, num_classes], seed=spec.seed)
    trained, _ = train(model, data, config_override or spec.train)
    return trained


def train_models(config: ExperimentConfig, train_set: Dataset, tree: OutputTree) -> TrainedModels:
    """Natural target, adversarially trained twin, and surrogates.

    Full surrogates train on the target classes; OOD surrogates train on
    the held-out classes only, relabelled 0..n-1.
    """
    target_classes = _target_classes(config)
    target_data = datasets.select_classes(train_set, target_classes)
    num_classes = len(target_classes)

    natural = _train_one(config.target.model, target_data, num_classes)
    save(natural, tree.model(NATURAL_TARGET))
    logger.info(f"Natural target train accuracy {accuracy(natural, target_data.features, target_data.labels):.3f}")
    models = TrainedModels(natural=natural)

    if config.target.robust is not None:
        robust_train = replace(config.target.model.train, adversarial=config.target.robust)
        models.robust = _train_one(config.target.model, target_data, num_classes, robust_train)
        save(models.robust, tree.model(ROBUST_TARGET))

    ood_data = None
    for spec in config.surrogates:
        if spec.ood:
            if ood_data is None:
                ood_data = datasets.select_classes(train_set, _ood_classes(config))
                overlap = set(ood_data.metadata["source_classes"]) & set(target_classes)
                if overlap:
                    raise ValueError(f"OOD surrogate classes overlap evaluation classes: {sorted(overlap)}")
            model = _train_one(spec, ood_data, ood_data.num_classes)
            models.ood_surrogates[spec.name] = model
        else:
            model = _train_one(spec, target_data, num_classes)
            models.surrogates[spec.name] = model
        save(model, tree.model(spec.name))
        logger.info(f"Trained surrogate '{spec.name}' ({'ood' if spec.ood else 'full'})")
    return models


def load_models(config: ExperimentConfig, tree: OutputTree) -> TrainedModels:
    models = TrainedModels(natural=load(tree.model(NATURAL_TARGET)))
    if config.target.robust is not None:
        models.robust = load(tree.model(ROBUST_TARGET))
    for spec in config.surrogates:
        bucket = models.ood_surrogates if spec.ood else models.surrogates
        bucket[spec.name] = load(tree.model(spec.name))
    return models


def select_eval_inputs(target: MlpClassifier, test_set: Dataset, size: int) -> EvalInputs:
    """The first ``size`` correctly classified test inputs, by test-set index."""
    predictions = predict(target, test_set.features)
    correct = np.flatnonzero(predictions == test_set.labels)
    if correct.size < size:
        logger.info(f"Only {correct.size} correctly classified test inputs; evaluating all of them")
    chosen = correct[:size]
    return EvalInputs(ids=chosen, features=test_set.features[chosen], labels=test_set.labels[chosen])


def _eval_test_set(config: ExperimentConfig, test_set: Dataset) -> Dataset:
    return datasets.select_classes(test_set, _target_classes(config))


def _surrogate_pool(models: TrainedModels, config: BlackboxAttackConfig) -> List[MlpClassifier]:
    """Surrogates of the configured kind, restricted to ``surrogate_names`` when given."""
    bucket = models.ood_surrogates if config.surrogates == "ood" else models.surrogates
    if config.surrogate_names is None:
        return list(bucket.values())
    missing = [n for n in config.surrogate_names if n not in bucket]
    if missing:
        raise ValueError(f"No trained {config.surrogates} surrogate named: {', '.join(missing)}")
    return [bucket[n] for n in config.surrogate_names]


def run_attacks(config: ExperimentConfig, models: TrainedModels, test_set: Dataset,
                tree: OutputTree) -> Dict[str, CampaignResult]:
    """Run every attack of the suite against correctly classified test inputs."""
    eval_test = _eval_test_set(config, test_set)
    campaigns: Dict[str, CampaignResult] = {}
    for spec in config.attacks:
        target = models.natural if spec.target == "natural" else models.robust
        if target is None:
            raise ValueError(f"Attack '{spec.name}' targets the robust model, which is disabled")
        inputs = select_eval_inputs(target, eval_test, config.eval_size)

        if spec.whitebox is not None:
            campaign = whitebox_processor.process_all(target, inputs, spec, config.seed, config.jobs)
        else:
            pool = _surrogate_pool(models, spec.blackbox)
            campaign = blackbox_processor.process_all(
                target, inputs, spec, pool or None, config.seed, config.jobs,
                pool=(eval_test.features, eval_test.labels),
            )

        tables.write_table(tree.trace(spec.name), campaign.trace, metrics.TRACE_COLUMNS)
        tables.write_table(tree.results(spec.name), campaign.results, metrics.RESULT_COLUMNS)
        curve = {"pgd": "restarts", "boundary": "distance"}.get(spec.family)
        if curve:
            grid = config.budgets if curve == "distance" else None
            for method, series in metrics.curve_series(campaign.trace, curve, grid).items():
                tables.write_table(tree.series(method, curve), series, ["x", "y"])
        campaigns[spec.name] = campaign
    return campaigns


def run_diversity(config: ExperimentConfig, models: TrainedModels, test_set: Dataset,
                  tree: OutputTree) -> pd.DataFrame:
    """Start-point diversity on the robust target, transfer diversity on the natural one."""
    robust = models.robust if models.robust is not None else models.natural
    inputs = select_eval_inputs(robust, _eval_test_set(config, test_set), config.diversity.inputs)
    frame = diversity_processor.process_all(
        robust, models.natural, list(models.surrogates.values()), inputs, config.diversity,
        config.seed, config.jobs,
    )
    tables.write_table(tree.diversity, frame, diversity_processor.DIVERSITY_COLUMNS)
    return frame


def _fmt(value: float, spec: str) -> str:
    return "nan" if value is None or (isinstance(value, float) and math.isnan(value)) else format(value, spec)


def _family_table(config: ExperimentConfig, family: str, tree: OutputTree,
                  notes: List[str]) -> pd.DataFrame:
    columns = list(metrics.SUMMARY_COLUMNS)
    if family == "boundary":
        columns += [f"l2_at_{b}" for b in config.budgets]
    frames = []
    for spec in [a for a in config.attacks if a.family == family]:
        results = tables.read_table(tree.results(spec.name), metrics.RESULT_COLUMNS)
        if results is None:
            notes.append(f"missing results for {spec.name}")
            continue
        summary = metrics.query_efficiency_summary(results, {spec.name: family == "boundary"})
        if family == "boundary":
            trace = tables.read_table(tree.trace(spec.name), metrics.TRACE_COLUMNS)
            if trace is None:
                notes.append(f"missing trace for {spec.name}")
            else:
                at_budget = metrics.perturbation_at_budget(trace, config.budgets)
                for _, row in at_budget.iterrows():
                    summary[f"l2_at_{int(row['budget'])}"] = row["median_perturbation"]
        frames.append(summary)
    if not frames:
        return pd.DataFrame(columns=columns)
    return pd.concat(frames, ignore_index=True).reindex(columns=columns)


def report(config: ExperimentConfig, tree: OutputTree) -> str:
    """Per-family CSV tables and a plain-text summary; safe to re-run."""
    notes: List[str] = []
    lines = ["odskit report", "============="]
    for family in FAMILIES:
        table = _family_table(config, family, tree, notes)
        tables.write_table(tree.summary_table(family), table)
        if table.empty:
            continue
        lines += ["", f"[{family}]", f"{'method':<24}{'inputs':>7}{'success':>9}{'avg_queries':>13}{'median_l2':>11}"]
        for _, row in table.iterrows():
            lines.append(
                f"{row['method']:<24}{int(row['inputs']):>7}{_fmt(row['success_rate'], '.3f'):>9}"
                f"{_fmt(row['avg_queries'], '.1f'):>13}{_fmt(row['median_perturbation'], '.4f'):>11}"
            )
            if family == "boundary":
                budgets = "  ".join(f"{b}:{_fmt(row[f'l2_at_{b}'], '.4f')}" for b in config.budgets)
                lines.append(f"{'':<24}l2 at budget  {budgets}")

    if os.path.exists(tree.diversity):
        frame = tables.read_table(tree.diversity, diversity_processor.DIVERSITY_COLUMNS)
        means = diversity_processor.diversity_summary(frame)
        lines += ["", "[diversity]"]
        lines += [f"{name:<24}{_fmt(value, '.4f'):>11}" for name, value in means.items()]

    for note in notes:
        logger.warning(f"Report: {note}")
    if notes:
        lines += ["", "[notes]"] + notes
    text = "\n".join(lines) + "\n"

    os.makedirs(os.path.dirname(tree.summary_text), exist_ok=True)
    with open(tree.summary_text, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info(f"Report written to {tree.summary_text}")
    return text


def run_experiment(config: ExperimentConfig, output_dir: Optional[str] = None) -> OutputTree:
    """Full pipeline; a failing stage raises StageError and keeps earlier outputs."""
    tree = OutputTree(output_dir or config.output_dir)
    with stage("data"):
        train_set, test_set = generate_dataset(config, tree)
    with stage("train"):
        models = train_models(config, train_set, tree)
    with stage("attack"):
        run_attacks(config, models, test_set, tree)
    if config.diversity.enabled:
        with stage("diversity"):
            run_diversity(config, models, test_set, tree)
    with stage("report"):
        report(config, tree)
    return tree
