"""White-box campaign: one restart-managed attack per evaluation input."""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import pandas as pd

from odskit import metrics
from odskit.attacks.whitebox import run_with_restarts
from odskit.config_schema import AttackSpec, WhiteboxAttackConfig
from odskit.models.mlp import MlpClassifier
from odskit.processors.pool import EvalInputs, fan_out, input_seed

logger = logging.getLogger("odskit")


@dataclass
class CampaignResult:
    trace: pd.DataFrame
    results: pd.DataFrame


@dataclass
class _Task:
    name: str
    target: MlpClassifier
    config: WhiteboxAttackConfig
    input_id: int
    x: np.ndarray
    y: int
    seed: np.random.SeedSequence


def _attack_one(task: _Task) -> Tuple[List[dict], dict]:
    rng = np.random.default_rng(task.seed)
    outcome = run_with_restarts(task.target, task.x, task.y, task.config, rng)
    # C&W restarts are compared by perturbation, PGD restarts by loss.
    use_norm = task.config.attack == "cw"
    records = outcome.trace
    rows = metrics.trace_rows(
        task.input_id, task.name,
        [r.restart for r in records],
        [r.perturbation_norm if use_norm else r.best_loss for r in records],
        [r.success for r in records],
    )
    result = outcome.result
    logger.debug(
        f"{task.name} input {task.input_id}: success={result.success}, "
        f"norm={result.perturbation_norm:.4g}, restarts={result.restarts_used}"
    )
    return rows, metrics.result_row(task.input_id, task.name, task.y, result)


def process_all(target: MlpClassifier, inputs: EvalInputs, spec: AttackSpec,
                master_seed: int, jobs: int = 1) -> CampaignResult:
    """Run ``spec`` against every input; merged in input-id order."""
    if spec.whitebox is None:
        raise ValueError(f"Attack '{spec.name}' is not a white-box attack")
    logger.info(f"Running {spec.name} ({spec.family}, init={spec.whitebox.init}) on {len(inputs)} inputs...")

    tasks = [
        _Task(spec.name, target, spec.whitebox, int(i), x, int(y), input_seed(master_seed, spec.name, int(i)))
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
        rate = campaign.results["success"].mean()
        logger.info(f"Finished {spec.name}: success rate {rate:.3f}")
    return campaign
