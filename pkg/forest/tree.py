"""
Array-Backed Classification Tree

A binary CART tree grown with Gini impurity. Nodes live in parallel arrays
(feature, threshold, left, right, value, n_samples, gain); leaves have
feature == -1. Rows with x[feature] <= threshold go left.

Split search per node:
- draw max_features candidate features without replacement (scanned in
  ascending index order)
- sort the node's rows by the feature, evaluate every boundary between
  distinct values with cumulative class weights
- keep the largest impurity decrease; ties go to the lowest feature index,
  then the lowest threshold

A node becomes a leaf when it is pure, holds fewer than 2 * min_samples_leaf
rows, or no split decreases impurity.
"""

from typing import Any, Dict, List, Optional

import numpy as np

_MIN_GAIN = 1e-12


def _gini(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    p = np.divide(pos, total, out=np.zeros_like(pos, dtype=float), where=total > 0)
    return 2.0 * p * (1.0 - p)


class DecisionTree:
    """One fitted tree"""

    def __init__(self):
        self.feature: np.ndarray = np.empty(0, dtype=np.int64)
        self.threshold: np.ndarray = np.empty(0, dtype=float)
        self.left: np.ndarray = np.empty(0, dtype=np.int64)
        self.right: np.ndarray = np.empty(0, dtype=np.int64)
        self.value: np.ndarray = np.empty(0, dtype=float)
        self.n_samples: np.ndarray = np.empty(0, dtype=np.int64)
        self.gain: np.ndarray = np.empty(0, dtype=float)

    @property
    def node_count(self) -> int:
        return int(self.feature.size)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def depth(self) -> int:
        if self.node_count == 0:
            return 0
        depths = np.zeros(self.node_count, dtype=np.int64)
        for node in range(self.node_count):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    # ------------------------------------------------------------------
    # Growing
    # ------------------------------------------------------------------

    def fit(
        self,
        X: np.ndarray,
        y: np.ndarray,
        rows: np.ndarray,
        rng: Optional[np.random.Generator],
        max_features: int,
        min_samples_leaf: int = 5,
        sample_weight: Optional[np.ndarray] = None,
    ) -> "DecisionTree":
        """
        Grow the tree on X[rows]

        Args:
            X: Full feature matrix (n, p)
            y: Binary targets (n,)
            rows: Row indices to train on (may repeat, e.g. a bootstrap)
            rng: Generator for feature subsampling (unused when
                max_features == p)
            max_features: Candidate features per node
            min_samples_leaf: Minimum rows per child
            sample_weight: Optional per-row weights (class weighting)
        """
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        weight = np.ones(X.shape[0]) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        n_features = X.shape[1]
        max_features = int(min(max(max_features, 1), n_features))

        feature: List[int] = []
        threshold: List[float] = []
        left: List[int] = []
        right: List[int] = []
        value: List[float] = []
        n_samples: List[int] = []
        gain: List[float] = []

        def new_node(node_rows: np.ndarray) -> int:
            w = weight[node_rows]
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(float(np.dot(w, y[node_rows]) / w.sum()))
            n_samples.append(int(node_rows.size))
            gain.append(0.0)
            return len(feature) - 1

        # depth-first, left child before right
        stack = [(new_node(np.asarray(rows)), np.asarray(rows))]
        while stack:
            node, node_rows = stack.pop()
            split = self._best_split(
                X, y, weight, node_rows, rng, n_features, max_features, min_samples_leaf
            )
            if split is None:
                continue
            f, thr, g = split
            go_left = X[node_rows, f] <= thr
            left_rows, right_rows = node_rows[go_left], node_rows[~go_left]

            feature[node] = f
            threshold[node] = thr
            gain[node] = g
            left[node] = new_node(left_rows)
            right[node] = new_node(right_rows)
            stack.append((right[node], right_rows))
            stack.append((left[node], left_rows))

        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)
        self.n_samples = np.asarray(n_samples, dtype=np.int64)
        self.gain = np.asarray(gain, dtype=float)
        return self

    @staticmethod
    def _best_split(
        X: np.ndarray,
        y: np.ndarray,
        weight: np.ndarray,
        rows: np.ndarray,
        rng: Optional[np.random.Generator],
        n_features: int,
        max_features: int,
        min_leaf: int,
    ):
        n = rows.size
        y_node = y[rows]
        if n < 2 * min_leaf or y_node.min() == y_node.max():
            return None

        w_node = weight[rows]
        total_w = w_node.sum()
        total_pos = np.dot(w_node, y_node)
        parent = _gini(np.array([total_pos]), np.array([total_w]))[0]

        if max_features < n_features:
            candidates = np.sort(rng.choice(n_features, size=max_features, replace=False))
        else:
            candidates = np.arange(n_features)

        # left child = first i sorted rows, i in [min_leaf, n - min_leaf]
        cut = np.arange(min_leaf, n - min_leaf + 1)
        best = None
        best_gain = _MIN_GAIN
        for f in candidates:
            x = X[rows, f]
            order = np.argsort(x, kind="mergesort")
            xs = x[order]
            distinct = xs[cut - 1] < xs[np.minimum(cut, n - 1)]
            if not distinct.any():
                continue

            cw = np.cumsum(w_node[order])
            cp = np.cumsum(w_node[order] * y_node[order])
            wl, pl = cw[cut - 1], cp[cut - 1]
            wr, pr = total_w - wl, total_pos - pl
            impurity = (wl * _gini(pl, wl) + wr * _gini(pr, wr)) / total_w
            gains = np.where(distinct, parent - impurity, -np.inf)

            i = int(np.argmax(gains))
            if gains[i] > best_gain:
                lo, hi = xs[cut[i] - 1], xs[cut[i]]
                thr = (lo + hi) / 2.0
                if not lo <= thr < hi:
                    thr = lo
                best_gain = float(gains[i])
                best = (int(f), float(thr), best_gain)
        return best

    # ------------------------------------------------------------------
    # Prediction
    # ------------------------------------------------------------------

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row"""
        X = np.asarray(X, dtype=float)
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        internal = self.feature[nodes] >= 0
        while internal.any():
            r = rows[internal]
            current = nodes[r]
            go_left = X[r, self.feature[current]] <= self.threshold[current]
            nodes[r] = np.where(go_left, self.left[current], self.right[current])
            internal = self.feature[nodes] >= 0
        return nodes

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Positive-class fraction of the leaf reached by every row"""
        return self.value[self.apply(X)]

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DecisionTree":
        tree = cls()
        tree.feature = np.asarray(data["feature"], dtype=np.int64)
        tree.threshold = np.asarray(data["threshold"], dtype=float)
        tree.left = np.asarray(data["left"], dtype=np.int64)
        tree.right = np.asarray(data["right"], dtype=np.int64)
        tree.value = np.asarray(data["value"], dtype=float)
        tree.n_samples = np.asarray(data["n_samples"], dtype=np.int64)
        tree.gain = np.asarray(data.get("gain", [0.0] * tree.feature.size), dtype=float)
        return tree

    @classmethod
    def constant(cls, value: float, n_samples: int = 0) -> "DecisionTree":
        """Single-leaf tree"""
        tree = cls()
        tree.feature = np.array([-1], dtype=np.int64)
        tree.threshold = np.array([0.0])
        tree.left = np.array([-1], dtype=np.int64)
        tree.right = np.array([-1], dtype=np.int64)
        tree.value = np.array([float(value)])
        tree.n_samples = np.array([n_samples], dtype=np.int64)
        tree.gain = np.array([0.0])
        return tree
