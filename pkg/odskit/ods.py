"""Output-diversified sampling.

An ODS vector is the normalized input gradient of w_d^T f(x) for a random
output-space direction w_d. With a surrogate f it gives black-box attacks
candidate directions that move the target's outputs far more than random
input-space noise does.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from odskit import numcore
from odskit.models.mlp import MlpClassifier

logger = logging.getLogger("odskit")

MAX_DIRECTION_RESAMPLES = 10


class DegenerateDirectionError(ArithmeticError):
    """The ODS gradient vanished for this direction."""
    pass


@dataclass(frozen=True)
class DirectionVector:
    w_d: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w_d, dtype=np.float64)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("A direction needs at least two components")
        if not np.any(w):
            raise ValueError("Direction must not be all zero")
        object.__setattr__(self, "w_d", w)

    @property
    def num_classes(self) -> int:
        return int(self.w_d.size)


@dataclass
class SurrogateEnsemble:
    models: List[MlpClassifier]

    def __post_init__(self):
        if not self.models:
            raise ValueError("Surrogate ensemble must not be empty")
        dims = {m.input_dim for m in self.models}
        classes = {m.num_classes for m in self.models}
        if len(dims) != 1 or len(classes) != 1:
            raise ValueError(
                f"Surrogates disagree on shape: input dims {sorted(dims)}, classes {sorted(classes)}"
            )

    @property
    def input_dim(self) -> int:
        return self.models[0].input_dim

    @property
    def num_classes(self) -> int:
        return self.models[0].num_classes

    def __len__(self):
        return len(self.models)


def sample_direction(num_classes: int, rng: np.random.Generator) -> DirectionVector:
    """w_d ~ U(-1, 1)^C, redrawn in the (measure-zero) all-zero case."""
    if num_classes < 2:
        raise ValueError("Need at least two classes")
    while True:
        w = rng.uniform(-1.0, 1.0, size=num_classes)
        if np.any(w):
            return DirectionVector(w)


def _weights(w_d: Union[DirectionVector, np.ndarray]) -> np.ndarray:
    return w_d.w_d if isinstance(w_d, DirectionVector) else np.asarray(w_d, dtype=np.float64)


def ods_vector(x: np.ndarray, model: MlpClassifier,
               w_d: Union[DirectionVector, np.ndarray]) -> np.ndarray:
    """grad_x(w_d^T f(x)) scaled to unit l2 norm."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise numcore.DimensionError(
            f"Input has {x.shape[-1]} features, model expects {model.input_dim}"
        )
    _, grad = numcore.value_and_input_grad(model, x, numcore.LinearHead(_weights(w_d)))
    norm = np.linalg.norm(grad.wrt_input)
    if not np.isfinite(norm) or norm == 0.0:
        raise DegenerateDirectionError("ODS gradient is zero for this direction")
    return grad.wrt_input / norm


def multitargeted_direction(y: int, t: int, num_classes: int) -> DirectionVector:
    """+1 on the target class t, -1 on the true class y."""
    if y == t:
        raise ValueError("MultiTargeted direction needs a target different from the label")
    if not (0 <= y < num_classes and 0 <= t < num_classes):
        raise IndexError(f"Classes {y}, {t} out of range for {num_classes}")
    w = np.zeros(num_classes)
    w[t] = 1.0
    w[y] = -1.0
    return DirectionVector(w)


def pick_surrogate(ensemble: SurrogateEnsemble, rng: np.random.Generator) -> MlpClassifier:
    return ensemble.models[int(rng.integers(len(ensemble.models)))]


def random_unit_vector(shape, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=shape)
    return v / np.linalg.norm(v)


def robust_ods_vector(x: np.ndarray, model: MlpClassifier,
                      w_d: Union[DirectionVector, np.ndarray],
                      rng: np.random.Generator,
                      resample: Optional[Callable[[], DirectionVector]] = None
                      ) -> Tuple[np.ndarray, Union[DirectionVector, np.ndarray]]:
    """ODS vector that never fails.

    A vanishing gradient triggers up to MAX_DIRECTION_RESAMPLES fresh
    directions, then a random unit vector. Returns the vector and the
    direction that produced it, so callers holding w_d fixed keep the
    replacement.
    """
    if resample is None:
        resample = lambda: sample_direction(model.num_classes, rng)  # noqa: E731
    for attempt in range(MAX_DIRECTION_RESAMPLES + 1):
        try:
            return ods_vector(x, model, w_d), w_d
        except DegenerateDirectionError:
            if attempt < MAX_DIRECTION_RESAMPLES:
                logger.warning("Degenerate ODS direction, resampling w_d")
                w_d = resample()
    logger.warning("ODS gradient stayed zero; falling back to a random unit vector")
    return random_unit_vector(np.shape(x), rng), w_d


def sample_ods(x: np.ndarray, ensemble: SurrogateEnsemble, rng: np.random.Generator) -> np.ndarray:
    """One draw: pick a surrogate, sample w_d, return its ODS vector."""
    model = pick_surrogate(ensemble, rng)
    vector, _ = robust_ods_vector(x, model, sample_direction(model.num_classes, rng), rng)
    return vector
