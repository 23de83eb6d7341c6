"""Black-box campaign: one fresh oracle and sampler per evaluation input."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from odskit import metrics
from odskit.attacks.blackbox import (
    InitializationError, QueryOutcome, boundary_attack, make_sampler, rgf_attack, simba_attack
)
from odskit.attacks.result import AttackResult
from odskit.config_schema import AttackSpec, BlackboxAttackConfig
from odskit.models.mlp import MlpClassifier
from odskit.ods import SurrogateEnsemble
from odskit.processors.pool import EvalInputs, fan_out, input_seed
from odskit.processors.whitebox import CampaignResult
from odskit.services.oracle import make_oracle

logger = logging.getLogger("odskit")


@dataclass
class _Task:
    name: str
    target: MlpClassifier
    surrogates: Optional[List[MlpClassifier]]
    config: BlackboxAttackConfig
    input_id: int
    x: np.ndarray
    y: int
    seed: np.random.SeedSequence
    pool_features: Optional[np.ndarray] = None
    pool_labels: Optional[np.ndarray] = None


def _pick_target_class(y: int, num_classes: int, rng: np.random.Generator) -> int:
    others = [c for c in range(num_classes) if c != y]
    return others[int(rng.integers(len(others)))]


def _starting_image(task: _Task, target_class: int, rng: np.random.Generator) -> np.ndarray:
    if task.pool_features is None:
        raise InitializationError("Targeted Boundary Attack needs a pool of starting images")
    candidates = np.flatnonzero(task.pool_labels == target_class)
    if candidates.size == 0:
        raise InitializationError(f"No starting image of class {target_class} in the pool")
    return task.pool_features[int(candidates[rng.integers(candidates.size)])]


def run_one(task: _Task) -> QueryOutcome:
    config = task.config
    rng = np.random.default_rng(task.seed)
    ensemble = SurrogateEnsemble(task.surrogates) if task.surrogates else None
    sampler = make_sampler(config.sampler, task.x.size, rng, ensemble)
    target_class = (
        _pick_target_class(task.y, task.target.num_classes, rng) if config.targeted else None
    )

    oracle = make_oracle("decision" if config.attack == "boundary" else "score", task.target, config.budget)
    if config.attack == "simba":
        return simba_attack(oracle, task.x, task.y, sampler,
                            config.step_size, config.max_iters, target=target_class)
    if config.attack == "rgf":
        return rgf_attack(oracle, task.x, task.y, sampler,
                          config.norm, config.epsilon, config.step_size, config.max_iters,
                          samples=config.samples, smoothing=config.smoothing, target=target_class)
    if config.attack == "boundary":
        start = _starting_image(task, target_class, rng) if config.targeted else None
        return boundary_attack(oracle, task.x, task.y, sampler,
                               config.max_iters, rng,
                               spherical_step=config.spherical_step, shrink=config.shrink,
                               adapt_factor=config.adapt_factor, adapt_window=config.adapt_window,
                               target=target_class, starting_point=start)
    raise ValueError(f"Unknown black-box attack: {config.attack}")


def _attack_one(task: _Task) -> Tuple[List[dict], dict]:
    try:
        outcome = run_one(task)
    except InitializationError as e:
        logger.warning(f"{task.name} input {task.input_id}: {e}")
        outcome = QueryOutcome(AttackResult(adversarial=task.x, success=False,
                                            perturbation_norm=float("inf"), queries=task.config.budget))
    result = outcome.result
    last = len(outcome.trace) - 1
    decision = task.config.attack == "boundary"
    rows = metrics.trace_rows(
        task.input_id, task.name,
        [r.queries for r in outcome.trace],
        [r.value for r in outcome.trace],
        [result.success and (decision or i == last) for i in range(len(outcome.trace))],
    )
    logger.debug(
        f"{task.name} input {task.input_id}: success={result.success}, "
        f"queries={result.queries}, l2={result.perturbation_norm:.4g}"
    )
    return rows, metrics.result_row(task.input_id, task.name, task.y, result)


def process_all(target: MlpClassifier, inputs: EvalInputs, spec: AttackSpec,
                surrogates: Optional[List[MlpClassifier]], master_seed: int, jobs: int = 1,
                pool: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> CampaignResult:
    """Run ``spec`` against every input with per-input oracles; merged in input-id order.

    ``pool`` holds (features, labels) used as starting images for the
    targeted Boundary Attack.
    """
    config = spec.blackbox
    if config is None:
        raise ValueError(f"Attack '{spec.name}' is not a black-box attack")
    if config.sampler in ("ods", "multitargeted") and not surrogates:
        raise ValueError(f"Attack '{spec.name}' samples with {config.sampler} but has no surrogates")
    logger.info(
        f"Running {spec.name} ({config.attack}, sampler={config.sampler}, budget={config.budget}) "
        f"on {len(inputs)} inputs..."
    )

    pool_features, pool_labels = pool if pool is not None else (None, None)
    tasks = [
        _Task(spec.name, target, surrogates, config, int(i), x, int(y),
              input_seed(master_seed, spec.name, int(i)), pool_features, pool_labels)
        for i, x, y in zip(inputs.ids, inputs.features, inputs.labels)
    ]
    outputs = fan_out(_attack_one, tasks, jobs)

    trace_rows: List[dict] = []
    result_rows: List[dict] = []
    for rows, result in outputs:
        trace_rows.extend(rows)
        result_rows.append(result)
    campaign = CampaignResult(metrics.trace_frame(trace_rows), metrics.results_frame(result_rows))

    if len(inputs):
        wins = campaign.results[campaign.results["success"]]
        avg = wins["queries"].mean() if len(wins) else float("nan")
        logger.info(f"Finished {spec.name}: success rate {len(wins) / len(inputs):.3f}, avg queries {avg:.1f}")
    return campaign
