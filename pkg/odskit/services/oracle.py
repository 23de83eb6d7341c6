"""Query-counted access to a black-box target."""

import logging
from typing import Optional

import numpy as np

from odskit.models.mlp import MlpClassifier, forward_logits
from odskit.numcore import as_tensor

logger = logging.getLogger("odskit")


class BudgetExhaustedError(RuntimeError):
    """The oracle's query budget is spent."""
    pass


class OracleModeError(TypeError):
    """Logits requested from a decision-only oracle, or vice versa."""
    pass


class QueryOracle:
    """Owns the hidden target, the query counter and the budget.

    Each call to ``scores`` or ``label`` costs exactly one query. A call
    that would exceed the budget raises BudgetExhaustedError and is not
    counted.
    """

    mode = "abstract"

    def __init__(self, target: MlpClassifier, budget: int):
        if budget < 0:
            raise ValueError(f"Query budget must be non-negative, got {budget}")
        self._target = target
        self.budget = budget
        self.queries = 0

    @property
    def remaining(self) -> int:
        return self.budget - self.queries

    def _charge(self) -> None:
        if self.queries >= self.budget:
            raise BudgetExhaustedError(f"Query budget of {self.budget} exhausted")
        self.queries += 1

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = as_tensor(x)
        if x.ndim != 1:
            raise ValueError(f"Oracle answers one input at a time, got shape {x.shape}")
        return x

    def scores(self, x: np.ndarray) -> np.ndarray:
        raise OracleModeError(f"A {self.mode} oracle does not return scores")

    def label(self, x: np.ndarray) -> int:
        raise OracleModeError(f"A {self.mode} oracle does not return labels")

    def __repr__(self):
        return f"{type(self).__name__}(queries={self.queries}, budget={self.budget})"


class ScoreOracle(QueryOracle):
    """Returns the target's logits."""

    mode = "score"

    def scores(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        self._charge()
        return forward_logits(self._target, x)


class DecisionOracle(QueryOracle):
    """Returns only the target's predicted label."""

    mode = "decision"

    def label(self, x: np.ndarray) -> int:
        x = self._check_input(x)
        self._charge()
        return int(np.argmax(forward_logits(self._target, x)))

    def is_adversarial(self, x: np.ndarray, y: int, target: Optional[int] = None) -> bool:
        """One query: misclassified (untargeted) or classified as ``target``."""
        predicted = self.label(x)
        return predicted == target if target is not None else predicted != y


def make_oracle(mode: str, target: MlpClassifier, budget: int) -> QueryOracle:
    if mode == "score":
        return ScoreOracle(target, budget)
    if mode == "decision":
        return DecisionOracle(target, budget)
    raise ValueError(f"Unknown oracle mode: {mode}")
