"""
Random Forest Stacking Learner

Bagged Gini trees with per-node feature subsampling. The score of a row is
the unweighted mean of the positive fractions of the leaves it reaches.

Every tree draws from its own stream derived from (seed, tree index), so
serial and threaded training build the same model.

Usage:
    from forest.ensemble import ForestParams, fit, predict_proba

    model = fit(train.features, train.target, ForestParams(seed=11), columns=train.columns)
    scores = predict_proba(model, evaluation.features)
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from core.rng import derive_stream
from forest.tree import DecisionTree
from utils.errors import ModelSchemaError
from utils.logger import get_logger

logger = get_logger(__name__)

MODEL_FORMAT = "forest/1"


class ForestParams(BaseModel):
    """Forest hyper-parameters"""

    model_config = ConfigDict(frozen=True)

    n_trees: int = Field(default=100, ge=1)
    min_samples_leaf: int = Field(default=5, ge=1)
    max_features: Union[Literal["sqrt", "all"], int] = "sqrt"
    bootstrap: bool = True
    class_weight: Optional[Literal["balanced"]] = None
    n_jobs: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)

    def resolve_max_features(self, n_features: int) -> int:
        if self.max_features == "sqrt":
            return max(1, math.ceil(math.sqrt(n_features)))
        if self.max_features == "all":
            return n_features
        return max(1, min(int(self.max_features), n_features))


class ForestModel:
    """A fitted forest with its training metadata"""

    def __init__(
        self,
        params: ForestParams,
        columns: Sequence[str],
        trees: List[DecisionTree],
        warnings: Optional[List[str]] = None,
        n_train: int = 0,
        n_positive: int = 0,
    ):
        self.params = params
        self.columns = tuple(columns)
        self.trees = trees
        self.warnings = list(warnings or [])
        self.n_train = n_train
        self.n_positive = n_positive

    @property
    def single_class(self) -> bool:
        return "single_class" in self.warnings

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": MODEL_FORMAT,
            "params": self.params.model_dump(),
            "columns": list(self.columns),
            "n_train": self.n_train,
            "n_positive": self.n_positive,
            "warnings": self.warnings,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ForestModel":
        if data.get("format") != MODEL_FORMAT:
            raise ModelSchemaError([MODEL_FORMAT], [str(data.get("format"))])
        return cls(
            params=ForestParams.model_validate(data["params"]),
            columns=data["columns"],
            trees=[DecisionTree.from_dict(t) for t in data["trees"]],
            warnings=data.get("warnings", []),
            n_train=data.get("n_train", 0),
            n_positive=data.get("n_positive", 0),
        )


def _class_weights(y: np.ndarray, mode: Optional[str]) -> Optional[np.ndarray]:
    """Per-row weights n / (2 n_c) under balanced weighting"""
    if mode != "balanced":
        return None
    n = y.size
    n_pos = int(y.sum())
    per_class = np.array([n / (2.0 * (n - n_pos)), n / (2.0 * n_pos)])
    return per_class[y.astype(np.int64)]


def _fit_tree(
    tree_idx: int,
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams,
    max_features: int,
    sample_weight: Optional[np.ndarray],
) -> DecisionTree:
    gen = derive_stream(params.seed, (0, tree_idx, "tree")).generator
    n = X.shape[0]
    rows = gen.integers(0, n, size=n) if params.bootstrap else np.arange(n)
    return DecisionTree().fit(
        X,
        y,
        rows,
        gen,
        max_features=max_features,
        min_samples_leaf=params.min_samples_leaf,
        sample_weight=sample_weight,
    )


def fit(
    X: np.ndarray,
    y: np.ndarray,
    params: Optional[ForestParams] = None,
    columns: Optional[Sequence[str]] = None,
) -> ForestModel:
    """
    Train a forest

    Args:
        X: Feature matrix (n, p)
        y: Binary targets (n,)
        params: Hyper-parameters and seed
        columns: Feature names (default f0..f<p-1>)

    Returns:
        ForestModel; single-class targets give a constant model flagged
        with the "single_class" warning
    """
    params = params or ForestParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-D matrix")
    if y.shape != (X.shape[0],):
        raise ValueError("y must have one target per row of X")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("targets must be 0 or 1")

    columns = list(columns) if columns is not None else [f"f{i}" for i in range(X.shape[1])]
    if len(columns) != X.shape[1]:
        raise ModelSchemaError(columns, [f"{X.shape[1]} columns"])

    y = y.astype(np.int64)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        value = float(n_pos > 0)
        logger.warning("Single-class targets, fitting a constant model", rows=y.size, value=value)
        return ForestModel(
            params,
            columns,
            [DecisionTree.constant(value, y.size)],
            warnings=["single_class"],
            n_train=y.size,
            n_positive=n_pos,
        )

    max_features = params.resolve_max_features(X.shape[1])
    weights = _class_weights(y, params.class_weight)

    def build(idx: int) -> DecisionTree:
        return _fit_tree(idx, X, y, params, max_features, weights)

    if params.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=params.n_jobs) as executor:
            trees = list(executor.map(build, range(params.n_trees)))
    else:
        trees = [build(i) for i in range(params.n_trees)]

    logger.debug(
        "Forest trained",
        rows=y.size,
        positives=n_pos,
        trees=params.n_trees,
        nodes=sum(t.node_count for t in trees),
    )
    return ForestModel(params, columns, trees, n_train=y.size, n_positive=n_pos)


def predict_proba(model: ForestModel, X) -> Union[float, np.ndarray]:
    """
    Mean leaf positive fraction over the trees

    Args:
        model: Fitted forest
        X: Feature matrix, DataFrame with the training columns, or one row

    Returns:
        Scores in [0, 1] (a float for a single row)

    Raises:
        ModelSchemaError: if X does not match the training schema
    """
    if isinstance(X, pd.DataFrame):
        if tuple(X.columns) != model.columns:
            raise ModelSchemaError(list(model.columns), list(X.columns))
        X = X.to_numpy(dtype=float)

    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != len(model.columns):
        raise ModelSchemaError(list(model.columns), [f"{X.shape[-1]} columns"])

    scores = np.zeros(X.shape[0])
    for tree in model.trees:
        scores += tree.predict(X)
    scores = np.clip(scores / len(model.trees), 0.0, 1.0)
    return float(scores[0]) if single else scores
