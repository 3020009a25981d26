"""
Tests for ROC/detection curves, partial areas and rank aggregation
"""

import numpy as np
import pandas as pd
import pytest
from sklearn.metrics import roc_auc_score

from evaluation.curves import (
    Curve,
    ScoredWeek,
    dauc,
    detection_curve,
    metric_column,
    partial_auc,
    pauc,
    roc_curve,
    scored_arrays,
    span_maxima,
)
from evaluation.ranking import OVERALL, rank_matrix, rank_methods, rank_table
from utils.errors import InvalidCurveInputError, MissingResultError, SchemaMismatchError
from tests.test_utils import brute_force_curve, brute_force_span_maxima, trapezoid_area


def random_instance(gen: np.random.Generator):
    """Scores with ties and span ids (some spans several weeks long)"""
    n = int(gen.integers(10, 201))
    scores = np.round(gen.uniform(size=n), int(gen.integers(1, 4)))
    span_ids = np.full(n, -1, dtype=np.int64)
    n_spans = int(gen.integers(1, max(2, n // 10)))
    starts = np.sort(gen.choice(np.arange(1, n - 4), size=n_spans, replace=False))
    for sid, start in enumerate(starts):
        span_ids[start : start + int(gen.integers(1, 5))] = sid
    # overlapping spans overwrite earlier ones; renumber what is left
    present = np.unique(span_ids[span_ids >= 0])
    remap = {old: new for new, old in enumerate(present.tolist())}
    span_ids = np.array([remap.get(s, -1) for s in span_ids.tolist()], dtype=np.int64)
    return scores, span_ids


# ============================================================================
# Curves
# ============================================================================


class TestRocCurve:
    """Week-level ROC curve"""

    def test_four_point_example(self):
        curve = roc_curve(np.array([0.9, 0.8, 0.7, 0.6]), np.array([1, 0, 1, 0]))
        assert curve.vertices == [(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
        assert partial_auc(curve, 0.5) == pytest.approx(0.5)

    def test_all_tied(self):
        curve = roc_curve(np.full(6, 0.4), np.array([1, 0, 0, 1, 0, 0]))
        assert curve.vertices == [(0.0, 0.0), (1.0, 1.0)]
        assert partial_auc(curve, 0.01) == pytest.approx(0.005)

    def test_perfect_separation(self):
        curve = roc_curve(np.array([0.9, 0.8, 0.3, 0.1]), np.array([1, 1, 0, 0]))
        assert (0.0, 1.0) in curve.vertices
        assert partial_auc(curve, 0.01) == 1.0

    def test_single_class_rejected(self):
        with pytest.raises(InvalidCurveInputError):
            roc_curve(np.array([0.1, 0.2]), np.array([0, 0]))
        with pytest.raises(InvalidCurveInputError):
            roc_curve(np.array([0.1, np.nan]), np.array([0, 1]))

    def test_full_area_matches_sklearn(self):
        gen = np.random.default_rng(3)
        for _ in range(20):
            scores = np.round(gen.uniform(size=150), 2)
            labels = gen.uniform(size=150) < 0.3
            labels[:2] = [True, False]
            assert pauc(scores, labels, e=1.0) == pytest.approx(roc_auc_score(labels, scores), abs=1e-12)

    def test_monotone_transform_invariance(self):
        gen = np.random.default_rng(4)
        scores = gen.uniform(size=300)
        labels = gen.uniform(size=300) < 0.2
        a = roc_curve(scores, labels)
        b = roc_curve(np.exp(3 * scores), labels)
        assert a.vertices == b.vertices

    def test_chance_level_on_large_sample(self):
        gen = np.random.default_rng(5)
        scores = gen.uniform(size=40_000)
        labels = np.arange(40_000) % 2 == 0
        assert pauc(scores, labels, e=0.01) == pytest.approx(0.005, abs=0.0025)


class TestDetectionCurve:
    """Outbreak-level detection-rate curve"""

    def test_span_maximum_above_negatives(self):
        scores = np.array([0.1, 0.2, 0.3, 0.9, 0.5, 0.05])
        span_ids = np.array([-1, -1, 0, 0, 0, -1])
        curve = detection_curve(scores, span_ids)
        assert curve.vertices[1] == (0.0, 1.0)
        assert dauc(scores, span_ids) == 1.0

    def test_half_detected_at_zero_false_alarms(self):
        scores = np.array([0.95, 0.1, 0.2, 0.3, 0.4])
        span_ids = np.array([0, 0, 1, -1, -1])
        curve = detection_curve(scores, span_ids)
        assert curve.vertices[:2] == [(0.0, 0.0), (0.0, 0.5)]

    def test_span_maxima(self):
        scores = np.array([0.2, 0.7, 0.1, 0.4, 0.3])
        span_ids = np.array([1, 1, -1, 0, 0])
        assert span_maxima(scores, span_ids).tolist() == [0.4, 0.7]

    def test_requires_spans_and_negatives(self):
        with pytest.raises(InvalidCurveInputError):
            detection_curve(np.array([0.1, 0.2]), np.array([-1, -1]))
        with pytest.raises(InvalidCurveInputError):
            detection_curve(np.array([0.1, 0.2]), np.array([0, 1]))

    def test_scored_weeks(self):
        weeks = [
            ScoredWeek(series=0, week=575, alarm_score=0.2, is_outbreak_week=False),
            ScoredWeek(series=0, week=576, alarm_score=0.9, is_outbreak_week=True, span_id=4),
        ]
        scores, span_ids = scored_arrays(weeks)
        assert span_ids.tolist() == [-1, 4]
        assert dauc(scores, span_ids) == 1.0
        with pytest.raises(ValueError):
            ScoredWeek(series=0, week=1, alarm_score=0.5, is_outbreak_week=True)


class TestAgainstBruteForce:
    """Vectorized sweeps agree with direct threshold enumeration"""

    def test_random_instances(self):
        gen = np.random.default_rng(2024)
        for _ in range(200):
            scores, span_ids = random_instance(gen)
            in_span = span_ids >= 0
            negatives, positives = scores[~in_span], scores[in_span]

            roc = roc_curve(scores, in_span)
            assert roc.vertices == brute_force_curve(negatives, positives)

            maxima = brute_force_span_maxima(scores, span_ids)
            detection = detection_curve(scores, span_ids)
            assert detection.vertices == brute_force_curve(negatives, maxima)

            for e in (0.01, 0.1, 0.5, 1.0):
                assert partial_auc(roc, e) == pytest.approx(trapezoid_area(roc.vertices, e), abs=1e-12)
                assert partial_auc(detection, e) == pytest.approx(trapezoid_area(detection.vertices, e), abs=1e-12)


class TestPartialAuc:
    """Partial area domain and bounds"""

    @pytest.mark.parametrize("e", [0.0, -0.1, 1.5])
    def test_invalid_e(self, e):
        curve = Curve(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        with pytest.raises(InvalidCurveInputError):
            partial_auc(curve, e)

    def test_invalid_curves(self):
        with pytest.raises(InvalidCurveInputError):
            Curve(np.array([0.0, 0.5]), np.array([0.0, 1.0]))
        with pytest.raises(InvalidCurveInputError):
            Curve(np.array([0.0, 0.6, 0.4, 1.0]), np.array([0.0, 0.5, 0.6, 1.0]))

    def test_interpolates_at_e(self):
        curve = Curve(np.array([0.0, 0.02, 1.0]), np.array([0.0, 0.4, 1.0]))
        # straight line to (0.02, 0.4): at e = 0.01 the curve is at 0.2
        assert partial_auc(curve, 0.01) == pytest.approx(0.1)

    def test_metric_column(self):
        assert metric_column("dauc", 0.01) == "dauc_1pct"
        assert metric_column("pauc", 0.05) == "pauc_5pct"
        assert metric_column("dauc", 0.005) == "dauc_0.5pct"


# ============================================================================
# Ranking
# ============================================================================


def results_frame(values: dict) -> pd.DataFrame:
    """{method: [metric per test case]} -> long results table"""
    rows = [
        {"test_case": tc, "method": method, "dauc_1pct": v}
        for method, series in values.items()
        for tc, v in enumerate(series)
    ]
    return pd.DataFrame(rows)


class TestRanking:
    """Fractional ranks and their averages"""

    STRUCTURES = {tc: ("~T,~S1,~S2" if tc < 21 else "T,S1,S2") for tc in range(42)}

    def test_dominating_method(self):
        results = results_frame({"A": [0.9] * 42, "B": [0.5] * 42})
        ranks = rank_methods(results, self.STRUCTURES)
        overall = ranks[ranks["subset"] == OVERALL].set_index("method")["avg_rank"]
        assert overall.to_dict() == {"A": 1.0, "B": 2.0}

    def test_ties_share_mean_rank(self):
        results = results_frame({"A": [0.7] * 42, "B": [0.7] * 42})
        ranks = rank_methods(results, self.STRUCTURES)
        assert (ranks["avg_rank"] == 1.5).all()

    def test_subsets_reported(self):
        results = results_frame({"A": [0.9] * 21 + [0.1] * 21, "B": [0.5] * 42})
        matrix = rank_matrix(rank_methods(results, self.STRUCTURES))
        assert list(matrix.columns) == [OVERALL, "~T,~S1,~S2", "T,S1,S2"]
        assert matrix.loc["A", "~T,~S1,~S2"] == 1.0
        assert matrix.loc["A", "T,S1,S2"] == 2.0
        assert matrix.loc["A", OVERALL] == 1.5

    def test_rank_sums(self):
        gen = np.random.default_rng(8)
        methods = [f"M{i}" for i in range(7)]
        values = {m: np.round(gen.uniform(size=42), 1).tolist() for m in methods}
        table = rank_table(results_frame(values), "dauc_1pct", methods)
        assert np.allclose(table.sum(axis=1), 7 * 8 / 2)

    def test_missing_cell(self):
        results = results_frame({"A": [0.9] * 3, "B": [0.5] * 3}).iloc[:-1]
        with pytest.raises(MissingResultError):
            rank_methods(results, self.STRUCTURES)

    def test_missing_method(self):
        results = results_frame({"A": [0.9] * 3})
        with pytest.raises(MissingResultError):
            rank_table(results, "dauc_1pct", ["A", "B"])

    def test_unlabeled_test_case(self):
        results = results_frame({"A": [0.9] * 3, "B": [0.5] * 3})
        with pytest.raises(MissingResultError):
            rank_methods(results, {0: "~T,~S1,~S2", 1: "~T,~S1,~S2"})

    @pytest.mark.parametrize("value", [0.9, 0.1])
    def test_duplicate_rows_rejected(self, value):
        results = results_frame({"A": [0.9] * 3, "B": [0.5] * 3})
        extra = pd.DataFrame([{"test_case": 0, "method": "A", "dauc_1pct": value}])
        with pytest.raises(SchemaMismatchError):
            rank_methods(pd.concat([results, extra], ignore_index=True), self.STRUCTURES)
