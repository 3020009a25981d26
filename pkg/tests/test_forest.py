"""
Tests for the random forest learner
"""

import json

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from forest.ensemble import ForestModel, ForestParams, fit, predict_proba
from forest.tree import DecisionTree
from utils.errors import ModelSchemaError


def separable(n: int = 200, seed: int = 0):
    """1-D data with y = 1{x > 0.5}, leaving a margin around the boundary"""
    gen = np.random.default_rng(seed)
    x = np.concatenate([gen.uniform(0.0, 0.45, n // 2), gen.uniform(0.55, 1.0, n // 2)])
    y = (x > 0.5).astype(int)
    return x[:, None], y


def noisy(n: int = 300, p: int = 4, seed: int = 1):
    gen = np.random.default_rng(seed)
    X = gen.normal(size=(n, p))
    y = ((X[:, 0] + 0.5 * X[:, 1] + gen.normal(scale=0.7, size=n)) > 0.8).astype(int)
    return X, y


# ============================================================================
# Trees
# ============================================================================


class TestTree:
    """Single tree growth"""

    def test_separates_one_feature(self):
        X, y = separable()
        tree = DecisionTree().fit(X, y, np.arange(len(y)), None, max_features=1, min_samples_leaf=1)
        assert tree.node_count == 3
        assert tree.feature[0] == 0
        assert 0.45 <= tree.threshold[0] <= 0.55
        assert (tree.predict(X) == y).all()

    def test_leaf_sizes_and_gains(self):
        X, y = noisy()
        tree = DecisionTree().fit(X, y, np.arange(len(y)), np.random.default_rng(0), max_features=2, min_samples_leaf=7)
        leaves = tree.is_leaf
        assert (tree.n_samples[leaves] >= 7).all()
        assert (tree.gain[~leaves] > 0).all()
        internal = np.flatnonzero(~leaves)
        for node in internal:
            assert tree.n_samples[node] == tree.n_samples[tree.left[node]] + tree.n_samples[tree.right[node]]

    def test_pure_node_is_leaf(self):
        X = np.arange(20, dtype=float)[:, None]
        tree = DecisionTree().fit(X, np.ones(20), np.arange(20), None, max_features=1)
        assert tree.node_count == 1
        assert tree.value[0] == 1.0

    def test_constant_feature_cannot_split(self):
        X = np.zeros((20, 1))
        y = np.array([0, 1] * 10)
        tree = DecisionTree().fit(X, y, np.arange(20), None, max_features=1, min_samples_leaf=1)
        assert tree.node_count == 1
        assert tree.value[0] == pytest.approx(0.5)

    def test_dict_round_trip(self):
        X, y = noisy()
        tree = DecisionTree().fit(X, y, np.arange(len(y)), np.random.default_rng(3), max_features=2)
        back = DecisionTree.from_dict(json.loads(json.dumps(tree.to_dict())))
        assert np.array_equal(back.predict(X), tree.predict(X))
        assert back.depth == tree.depth


# ============================================================================
# Forests
# ============================================================================


class TestForest:
    """Ensembles, determinism and schema checks"""

    def test_learns_separable_data(self):
        X, y = separable()
        model = fit(X, y, ForestParams(n_trees=25, seed=4))
        accuracy = ((predict_proba(model, X) >= 0.5) == y).mean()
        assert accuracy >= 0.95

    def test_single_class_constant_model(self):
        X = np.random.default_rng(0).normal(size=(50, 3))
        model = fit(X, np.zeros(50, dtype=int), ForestParams(n_trees=10))
        assert model.single_class
        assert (predict_proba(model, X) == 0.0).all()

    def test_single_leaf_value(self):
        model = ForestModel(ForestParams(n_trees=1), ["a", "b"], [DecisionTree.constant(0.3)])
        assert predict_proba(model, np.array([1.0, 2.0])) == pytest.approx(0.3)

    def test_scores_average_trees(self):
        trees = [DecisionTree.constant(0.2), DecisionTree.constant(0.8)]
        model = ForestModel(ForestParams(n_trees=2), ["a"], trees)
        assert predict_proba(model, np.zeros((3, 1))).tolist() == pytest.approx([0.5, 0.5, 0.5])

    def test_deterministic(self):
        X, y = noisy()
        params = ForestParams(n_trees=8, seed=17)
        assert fit(X, y, params).to_dict() == fit(X, y, params).to_dict()
        other = fit(X, y, params.model_copy(update={"seed": 18}))
        assert other.to_dict() != fit(X, y, params).to_dict()

    def test_threads_match_serial(self):
        X, y = noisy()
        serial = fit(X, y, ForestParams(n_trees=8, seed=5, n_jobs=1))
        threaded = fit(X, y, ForestParams(n_trees=8, seed=5, n_jobs=3))
        assert serial.to_dict()["trees"] == threaded.to_dict()["trees"]

    def test_row_order_invariant_without_bagging(self):
        X, y = noisy()
        params = ForestParams(n_trees=3, bootstrap=False, max_features="all", min_samples_leaf=5)
        perm = np.random.default_rng(9).permutation(len(y))
        a = predict_proba(fit(X, y, params), X)
        b = predict_proba(fit(X[perm], y[perm], params), X)
        assert np.array_equal(a, b)

    def test_balanced_weights_raise_minority_scores(self):
        X, y = noisy()
        plain = predict_proba(fit(X, y, ForestParams(n_trees=20, seed=2)), X)
        balanced = predict_proba(fit(X, y, ForestParams(n_trees=20, seed=2, class_weight="balanced")), X)
        assert y.mean() < 0.5
        assert balanced.mean() > plain.mean()

    def test_max_features(self):
        assert ForestParams().resolve_max_features(11) == 4
        assert ForestParams(max_features="all").resolve_max_features(11) == 11
        assert ForestParams(max_features=20).resolve_max_features(11) == 11

    def test_dataframe_schema(self):
        X, y = noisy(p=2)
        model = fit(X, y, ForestParams(n_trees=3), columns=["mean", "RKI_lag0"])
        frame = pd.DataFrame(X, columns=["mean", "RKI_lag0"])
        assert predict_proba(model, frame).shape == (len(y),)
        with pytest.raises(ModelSchemaError):
            predict_proba(model, frame[["RKI_lag0", "mean"]])
        with pytest.raises(ModelSchemaError):
            predict_proba(model, np.zeros((2, 3)))

    def test_model_round_trip(self):
        X, y = noisy()
        model = fit(X, y, ForestParams(n_trees=5, seed=1))
        back = ForestModel.from_dict(json.loads(json.dumps(model.to_dict())))
        assert np.array_equal(predict_proba(back, X), predict_proba(model, X))
        assert back.columns == model.columns

    def test_unknown_format(self):
        with pytest.raises(ModelSchemaError):
            ForestModel.from_dict({"format": "other/9"})

    def test_invalid_targets(self):
        with pytest.raises(ValueError):
            fit(np.zeros((4, 1)), np.array([0, 1, 2, 1]))

    @given(
        data=st.lists(
            st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1)),
            min_size=12,
            max_size=60,
        )
    )
    @settings(max_examples=25, deadline=None)
    def test_scores_in_unit_interval(self, data):
        X = np.array([[a, b] for a, b, _ in data])
        y = np.array([c for _, _, c in data])
        model = fit(X, y, ForestParams(n_trees=3, min_samples_leaf=2))
        scores = predict_proba(model, X)
        assert ((scores >= 0) & (scores <= 1)).all()
