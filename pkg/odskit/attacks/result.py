"""Attack outcome shared by white-box and black-box attacks."""

from dataclasses import dataclass
from typing import Optional

import numpy as np


def lp_norm(v: np.ndarray, norm: str) -> float:
    if norm == "linf":
        return float(np.max(np.abs(v))) if v.size else 0.0
    if norm == "l2":
        return float(np.linalg.norm(v))
    raise ValueError(f"Unknown norm: {norm}")


@dataclass
class AttackResult:
    """Outcome of one attack run.

    ``queries`` counts oracle calls for black-box attacks and gradient
    evaluations for white-box ones.
    """
    adversarial: np.ndarray
    success: bool
    perturbation_norm: float
    queries: int = 0
    restarts_used: int = 1
    best_loss: float = float("-inf")
    success_step: Optional[int] = None
