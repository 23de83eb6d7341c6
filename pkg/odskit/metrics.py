"""Diversity and efficiency summaries over trace and result tables.

A trace table has one row per (input, method, index) where index is a
restart number for white-box attacks and a query count for black-box
ones. A results table has one row per (input, method).
"""

import logging
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from odskit.attacks.result import AttackResult
from odskit.models.mlp import MlpClassifier, forward_logits

logger = logging.getLogger("odskit")

TRACE_COLUMNS = ["input_id", "method", "index", "value", "success"]
RESULT_COLUMNS = ["input_id", "method", "label", "success", "queries", "perturbation", "restarts"]
SUMMARY_COLUMNS = ["method", "inputs", "success_rate", "avg_queries", "median_perturbation", "failures"]
BUDGET_COLUMNS = ["method", "budget", "median_perturbation", "inputs", "beyond_horizon"]


def lower_median(values: Iterable[float]) -> float:
    """Median taking the lower middle element for even counts; NaN when empty."""
    ordered = sorted(values)
    if not ordered:
        return float("nan")
    return float(ordered[(len(ordered) - 1) // 2])


def trace_rows(input_id: int, method: str, indices: Sequence[int], values: Sequence[float],
               successes: Sequence[bool]) -> List[dict]:
    if not len(indices) == len(values) == len(successes):
        raise ValueError("Trace columns must have equal length")
    if any(i < 0 for i in indices):
        raise ValueError("Trace indices must be non-negative")
    return [
        {"input_id": input_id, "method": method, "index": int(i), "value": float(v), "success": bool(s)}
        for i, v, s in zip(indices, values, successes)
    ]


def result_row(input_id: int, method: str, label: int, result: AttackResult) -> dict:
    return {
        "input_id": input_id,
        "method": method,
        "label": int(label),
        "success": bool(result.success),
        "queries": int(result.queries),
        "perturbation": float(result.perturbation_norm),
        "restarts": int(result.restarts_used),
    }


def trace_frame(rows: List[dict]) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    return frame.sort_values(["method", "input_id", "index"], kind="stable").reset_index(drop=True)


def results_frame(rows: List[dict]) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    return frame.sort_values(["method", "input_id"], kind="stable").reset_index(drop=True)


def pairwise_output_distance(points: Sequence[np.ndarray], model: MlpClassifier) -> float:
    """Mean l2 distance between the logits of every unordered pair of points."""
    if len(points) < 2:
        raise ValueError("Pairwise distance needs at least two points")
    logits = forward_logits(model, np.stack([np.asarray(p, dtype=np.float64) for p in points]))
    diffs = logits[:, None, :] - logits[None, :, :]
    distances = np.sqrt(np.sum(diffs * diffs, axis=-1))
    upper = np.triu_indices(len(points), k=1)
    return float(np.mean(distances[upper]))


def accuracy_vs_restarts(trace: pd.DataFrame, clean_accuracy: float = 1.0) -> pd.DataFrame:
    """Accuracy under attack after 1..R restarts, per method.

    An input counts as broken from the first restart that succeeded on
    (cumulative OR); inputs that stopped early stay broken. Accuracy is
    ``clean_accuracy`` times the unbroken fraction.
    """
    rows = []
    for method, group in trace.groupby("method", sort=True):
        horizon = int(group["index"].max()) + 1
        first_success = (
            group[group["success"]].groupby("input_id")["index"].min()
        )
        inputs = group["input_id"].nunique()
        for restarts in range(1, horizon + 1):
            broken = int((first_success < restarts).sum())
            rows.append({
                "method": method,
                "restarts": restarts,
                "accuracy": clean_accuracy * (inputs - broken) / inputs,
            })
    return pd.DataFrame(rows, columns=["method", "restarts", "accuracy"])


def query_efficiency_summary(results: pd.DataFrame,
                             include_failures: Optional[Dict[str, bool]] = None) -> pd.DataFrame:
    """Success rate, average queries over successes, lower-median perturbation.

    Failures never enter the query average. They enter the perturbation
    median only for methods flagged in ``include_failures`` (decision
    attacks, which always hold an adversarial point); infinite distances
    are always left out.
    """
    include_failures = include_failures or {}
    rows = []
    for method, group in results.groupby("method", sort=True):
        wins = group[group["success"]]
        pool = group if include_failures.get(method, False) else wins
        finite = pool["perturbation"][np.isfinite(pool["perturbation"])]
        rows.append({
            "method": method,
            "inputs": len(group),
            "success_rate": len(wins) / len(group) if len(group) else float("nan"),
            "avg_queries": float(wins["queries"].mean()) if len(wins) else float("nan"),
            "median_perturbation": lower_median(finite.tolist()),
            "failures": int(len(group) - len(wins)),
        })
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def perturbation_at_budget(trace: pd.DataFrame, budgets: Sequence[int]) -> pd.DataFrame:
    """Median over inputs of the smallest distance reached within each budget.

    Inputs whose trace ends before a budget use their last value and are
    counted in ``beyond_horizon``. Inputs with no row within the budget
    have no adversarial yet and count as infinite.
    """
    rows = []
    for method, group in trace.groupby("method", sort=True):
        per_input = [g.sort_values("index") for _, g in group.groupby("input_id", sort=True)]
        for budget in budgets:
            best = []
            beyond = 0
            for g in per_input:
                within = g[g["index"] <= budget]["value"]
                best.append(float(within.min()) if len(within) else float("inf"))
                if int(g["index"].max()) < budget:
                    beyond += 1
            if beyond:
                logger.debug(f"{method}: {beyond} traces end before budget {budget}")
            rows.append({
                "method": method,
                "budget": int(budget),
                "median_perturbation": lower_median(best),
                "inputs": len(per_input),
                "beyond_horizon": beyond,
            })
    return pd.DataFrame(rows, columns=BUDGET_COLUMNS)


def curve_series(trace: pd.DataFrame, curve: str, grid: Optional[Sequence[int]] = None,
                 clean_accuracy: float = 1.0) -> Dict[str, pd.DataFrame]:
    """Plot-ready (x, y) series per method.

    ``restarts``: accuracy against number of restarts.
    ``distance``: median perturbation against query budget, on ``grid`` or
    on 20 evenly spaced budgets up to the longest trace.
    """
    series: Dict[str, pd.DataFrame] = {}
    if trace.empty:
        return series
    if curve == "restarts":
        curve_frame = accuracy_vs_restarts(trace, clean_accuracy)
        for method, group in curve_frame.groupby("method", sort=True):
            series[method] = pd.DataFrame({"x": group["restarts"].values, "y": group["accuracy"].values})
    elif curve == "distance":
        if grid is None:
            horizon = int(trace["index"].max())
            grid = sorted({max(1, int(round(v))) for v in np.linspace(1, max(horizon, 1), 20)})
        budget_frame = perturbation_at_budget(trace, grid)
        for method, group in budget_frame.groupby("method", sort=True):
            series[method] = pd.DataFrame({"x": group["budget"].values, "y": group["median_perturbation"].values})
    else:
        raise ValueError(f"Unknown curve: {curve}")
    return series
