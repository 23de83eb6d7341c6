"""Output diversity of start points and of transferred perturbations."""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np
import pandas as pd

from odskit.attacks.whitebox import odi_init, uniform_init
from odskit.config_schema import DiversitySpec, WhiteboxAttackConfig
from odskit.metrics import pairwise_output_distance
from odskit.models.mlp import MlpClassifier
from odskit.ods import SurrogateEnsemble, random_unit_vector, sample_ods
from odskit.processors.pool import EvalInputs, fan_out, input_seed

logger = logging.getLogger("odskit")

DIVERSITY_COLUMNS = ["input_id", "measure", "value"]
MEASURES = ["start_uniform", "start_odi", "transfer_gaussian", "transfer_ods"]


@dataclass
class _Task:
    spec: DiversitySpec
    robust: MlpClassifier
    natural: MlpClassifier
    surrogates: List[MlpClassifier]
    input_id: int
    x: np.ndarray
    y: int
    seed: np.random.SeedSequence


def _measure_one(task: _Task) -> List[dict]:
    spec = task.spec
    rng = np.random.default_rng(task.seed)
    config = WhiteboxAttackConfig(norm="linf", epsilon=spec.epsilon, init="odi", odi_steps=spec.odi_steps)

    uniform = [uniform_init(task.x, spec.epsilon, "linf", rng) for _ in range(spec.restarts)]
    odi = [odi_init(task.x, task.robust, config, rng, label=task.y, restart_index=r)
           for r in range(spec.restarts)]
    values = {
        "start_uniform": pairwise_output_distance(uniform, task.robust),
        "start_odi": pairwise_output_distance(odi, task.robust),
    }

    if task.surrogates:
        ensemble = SurrogateEnsemble(task.surrogates)
        # Matched input norm, no pixel clipping.
        gaussian = [task.x + spec.transfer_norm * random_unit_vector(task.x.shape, rng)
                    for _ in range(spec.restarts)]
        ods = [task.x + spec.transfer_norm * sample_ods(task.x, ensemble, rng)
               for _ in range(spec.restarts)]
        values["transfer_gaussian"] = pairwise_output_distance(gaussian, task.natural)
        values["transfer_ods"] = pairwise_output_distance(ods, task.natural)

    return [{"input_id": task.input_id, "measure": m, "value": v} for m, v in values.items()]


def process_all(robust: MlpClassifier, natural: MlpClassifier, surrogates: List[MlpClassifier],
                inputs: EvalInputs, spec: DiversitySpec, master_seed: int,
                jobs: int = 1) -> pd.DataFrame:
    """Per-input mean pairwise logit distances for each measure in MEASURES.

    Start diversity compares uniform and ODI starts on ``robust``; transfer
    diversity compares Gaussian and surrogate-ODS perturbations of equal
    l2 norm on ``natural``. Transfer rows are skipped without surrogates.
    """
    if spec.restarts < 2:
        raise ValueError("Diversity needs at least two restarts per input")
    count = min(spec.inputs, len(inputs))
    logger.info(f"Measuring output diversity on {count} inputs x {spec.restarts} restarts...")

    tasks = [
        _Task(spec, robust, natural, surrogates, int(i), x, int(y),
              input_seed(master_seed, "diversity", int(i)))
        for i, x, y in zip(inputs.ids[:count], inputs.features[:count], inputs.labels[:count])
    ]
    rows = [row for rows in fan_out(_measure_one, tasks, jobs) for row in rows]
    frame = pd.DataFrame(rows, columns=DIVERSITY_COLUMNS)

    means = diversity_summary(frame)
    for measure, value in means.items():
        logger.info(f"Diversity {measure}: {value:.4f}")
    return frame


def diversity_summary(frame: pd.DataFrame) -> dict:
    """Mean value per measure, plus the ODI/uniform and ODS/Gaussian ratios when defined."""
    means = {m: float(frame.loc[frame["measure"] == m, "value"].mean())
             for m in MEASURES if (frame["measure"] == m).any()}
    if means.get("start_uniform"):
        means["start_ratio"] = means["start_odi"] / means["start_uniform"]
    if means.get("transfer_gaussian"):
        means["transfer_ratio"] = means["transfer_ods"] / means["transfer_gaussian"]
    return means
