"""Tests for odskit.metrics module."""

import itertools

import numpy as np
import pandas as pd
import pytest

from odskit import metrics
from odskit.attacks.result import AttackResult
from odskit.models import MlpClassifier


def _trace(rows):
    return metrics.trace_frame([
        {"input_id": i, "method": m, "index": k, "value": v, "success": s} for m, i, k, v, s in rows
    ])


def _results(rows):
    return metrics.results_frame([
        {"input_id": i, "method": m, "label": 0, "success": s, "queries": q, "perturbation": p,
         "restarts": 1}
        for m, i, s, q, p in rows
    ])


class TestLowerMedian:
    """Tests for lower_median function."""

    def test_odd(self):
        assert metrics.lower_median([3, 1, 2]) == 2

    def test_even_takes_lower_middle(self):
        assert metrics.lower_median([4, 1, 3, 2]) == 2

    def test_empty(self):
        assert np.isnan(metrics.lower_median([]))


class TestRows:
    """Tests for trace_rows and result_row."""

    def test_trace_rows(self):
        rows = metrics.trace_rows(3, "m", [0, 1], [0.5, 0.25], [False, True])
        assert rows[1] == {"input_id": 3, "method": "m", "index": 1, "value": 0.25, "success": True}

    def test_trace_rows_length_mismatch(self):
        with pytest.raises(ValueError, match="equal length"):
            metrics.trace_rows(0, "m", [0, 1], [0.5], [True])

    def test_trace_rows_negative_index(self):
        with pytest.raises(ValueError, match="non-negative"):
            metrics.trace_rows(0, "m", [-1], [0.5], [True])

    def test_result_row(self):
        result = AttackResult(adversarial=np.zeros(2), success=True, perturbation_norm=0.5,
                              queries=12, restarts_used=3)
        row = metrics.result_row(7, "simba", 2, result)
        assert row == {"input_id": 7, "method": "simba", "label": 2, "success": True,
                       "queries": 12, "perturbation": 0.5, "restarts": 3}

    def test_frames_are_sorted(self):
        frame = _trace([("b", 1, 0, 1.0, False), ("a", 2, 1, 1.0, False), ("a", 2, 0, 1.0, False)])
        assert frame[["method", "input_id", "index"]].values.tolist() == [["a", 2, 0], ["a", 2, 1], ["b", 1, 0]]


class TestPairwiseOutputDistance:
    """Tests for pairwise_output_distance function."""

    def test_three_four_five(self):
        # Identity network: logits equal the inputs.
        model = MlpClassifier(layer_sizes=[2, 2], weights=[np.eye(2)], biases=[np.zeros(2)])
        points = [np.array([0.0, 0.0]), np.array([3.0, 4.0])]
        assert metrics.pairwise_output_distance(points, model) == pytest.approx(5.0)

    def test_matches_brute_force(self, trained_target):
        rng = np.random.default_rng(0)
        points = [rng.uniform(size=16) for _ in range(5)]
        from odskit.models import forward_logits
        logits = [forward_logits(trained_target, p) for p in points]
        expected = np.mean([np.linalg.norm(a - b) for a, b in itertools.combinations(logits, 2)])
        assert metrics.pairwise_output_distance(points, trained_target) == pytest.approx(expected)

    def test_needs_two_points(self, trained_target):
        with pytest.raises(ValueError):
            metrics.pairwise_output_distance([np.zeros(16)], trained_target)


class TestAccuracyVsRestarts:
    """Tests for accuracy_vs_restarts function."""

    def test_cumulative_or(self):
        trace = _trace([
            ("pgd", 0, 0, -1.0, False), ("pgd", 0, 1, 0.5, True),
            ("pgd", 1, 0, -1.0, False), ("pgd", 1, 1, -1.0, False), ("pgd", 1, 2, -0.5, False),
            ("pgd", 2, 0, 0.2, True),
        ])
        curve = metrics.accuracy_vs_restarts(trace, clean_accuracy=0.9)
        assert curve["restarts"].tolist() == [1, 2, 3]
        assert curve["accuracy"].tolist() == pytest.approx([0.9 * 2 / 3, 0.9 / 3, 0.9 / 3])

    def test_never_increases(self):
        rng = np.random.default_rng(0)
        rows = [("m", i, k, 0.0, bool(rng.random() < 0.2)) for i in range(10) for k in range(6)]
        accuracy = metrics.accuracy_vs_restarts(_trace(rows))["accuracy"].tolist()
        assert all(b <= a for a, b in zip(accuracy, accuracy[1:]))


class TestQueryEfficiencySummary:
    """Tests for query_efficiency_summary function."""

    def test_failures_excluded_from_queries(self):
        results = _results([
            ("simba", 0, True, 100, 1.0), ("simba", 1, True, 300, 2.0), ("simba", 2, False, 10000, 3.0),
        ])
        row = metrics.query_efficiency_summary(results).iloc[0]
        assert row["success_rate"] == pytest.approx(2 / 3)
        assert row["avg_queries"] == 200
        assert row["median_perturbation"] == 1.0
        assert row["failures"] == 1

    def test_included_failures_enter_median_but_not_inf(self):
        results = _results([
            ("boundary", 0, True, 50, 0.5), ("boundary", 1, False, 50, 3.0),
            ("boundary", 2, False, 50, float("inf")),
        ])
        row = metrics.query_efficiency_summary(results, {"boundary": True}).iloc[0]
        assert row["median_perturbation"] == 0.5

    def test_no_successes(self):
        row = metrics.query_efficiency_summary(_results([("rgf", 0, False, 10, 0.1)])).iloc[0]
        assert row["success_rate"] == 0.0
        assert np.isnan(row["avg_queries"])
        assert np.isnan(row["median_perturbation"])


class TestPerturbationAtBudget:
    """Tests for perturbation_at_budget function."""

    def test_best_within_budget(self):
        trace = _trace([
            ("b", 0, 10, 5.0, True), ("b", 0, 40, 3.0, True), ("b", 0, 90, 1.0, True),
            ("b", 1, 20, 4.0, True), ("b", 1, 60, 2.0, True),
        ])
        frame = metrics.perturbation_at_budget(trace, [30, 100])
        assert frame["median_perturbation"].tolist() == [4.0, 1.0]
        assert frame["beyond_horizon"].tolist() == [0, 2]

    def test_no_row_within_budget_counts_infinite(self):
        trace = _trace([("b", 0, 50, 1.0, True), ("b", 1, 5, 2.0, True)])
        frame = metrics.perturbation_at_budget(trace, [10])
        # Sorted {2.0, inf}: lower median is 2.0.
        assert frame["median_perturbation"].tolist() == [2.0]

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        rows = []
        for i in range(7):
            queries = np.sort(rng.choice(np.arange(1, 200), size=5, replace=False))
            values = np.sort(rng.uniform(size=5))[::-1]
            rows += [("b", i, int(q), float(v), True) for q, v in zip(queries, values)]
        trace = _trace(rows)
        for budget in (25, 100, 199):
            best = []
            for i in range(7):
                within = [v for m, j, q, v, _ in rows if j == i and q <= budget]
                best.append(min(within) if within else float("inf"))
            expected = sorted(best)[(len(best) - 1) // 2]
            got = metrics.perturbation_at_budget(trace, [budget])["median_perturbation"].iloc[0]
            assert got == expected


class TestCurveSeries:
    """Tests for curve_series function."""

    def test_restarts(self):
        trace = _trace([("pgd", 0, 0, 0.0, False), ("pgd", 0, 1, 0.0, True)])
        series = metrics.curve_series(trace, "restarts")
        assert series["pgd"]["x"].tolist() == [1, 2]
        assert series["pgd"]["y"].tolist() == [1.0, 0.0]

    def test_distance_on_grid(self):
        trace = _trace([("b", 0, 10, 2.0, True), ("b", 0, 100, 1.0, True)])
        series = metrics.curve_series(trace, "distance", grid=[10, 100])
        assert series["b"]["y"].tolist() == [2.0, 1.0]

    def test_distance_default_grid(self):
        trace = _trace([("b", 0, 1, 2.0, True), ("b", 0, 400, 1.0, True)])
        series = metrics.curve_series(trace, "distance")
        assert series["b"]["x"].iloc[-1] == 400
        assert len(series["b"]) <= 20

    def test_empty_trace(self):
        assert metrics.curve_series(metrics.trace_frame([]), "restarts") == {}

    def test_unknown_curve(self):
        with pytest.raises(ValueError):
            metrics.curve_series(_trace([("b", 0, 1, 2.0, True)]), "roc")
