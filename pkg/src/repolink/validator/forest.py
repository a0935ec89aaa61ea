"""Gini decision trees and a bagged random forest over them.

Trees are stored as flat preorder arrays so they serialize one record per
node and predict with a vectorized descent.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

LEAF = -1


class GiniTree:
    """Binary CART tree on a 0/1 target.

    Nodes live in parallel lists in preorder. For split nodes ``feature`` is
    the column index and ``threshold`` the cut (go left when ``x <= cut``);
    leaves carry ``feature == LEAF`` and their class counts.
    """

    def __init__(self, max_features=None, min_samples_leaf=1, max_depth=None):
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.max_depth = max_depth
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.counts: list[tuple[int, int]] = []

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def _new_node(self) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.counts.append((0, 0))
        return len(self.feature) - 1

    def _best_split(self, X, y, rng):
        n, n_features = X.shape
        k = n_features if self.max_features is None else min(self.max_features, n_features)
        leaf = self.min_samples_leaf
        order = rng.permutation(n_features)
        best = None  # (impurity, feature, threshold)
        for visited, f in enumerate(order):
            # keep drawing features past k until some valid split exists
            if visited >= k and best is not None:
                break
            idx = np.argsort(X[:, f], kind="mergesort")
            xs, ys = X[idx, f], y[idx]
            left_n = np.arange(1, n)
            valid = (xs[1:] > xs[:-1]) & (left_n >= leaf) & (n - left_n >= leaf)
            if not valid.any():
                continue
            left_pos = np.cumsum(ys)[:-1]
            right_pos = ys.sum() - left_pos
            right_n = n - left_n
            p_left = left_pos / left_n
            p_right = right_pos / right_n
            gini = (left_n * 2 * p_left * (1 - p_left) + right_n * 2 * p_right * (1 - p_right)) / n
            gini = np.where(valid, gini, np.inf)
            i = int(np.argmin(gini))
            if best is None or gini[i] < best[0]:
                best = (gini[i], int(f), float((xs[i] + xs[i + 1]) / 2.0))
        return best

    def _grow(self, X, y, depth, rng):
        node = self._new_node()
        n_pos = int(y.sum())
        self.counts[node] = (len(y) - n_pos, n_pos)
        pure = n_pos == 0 or n_pos == len(y)
        too_small = len(y) < 2 * self.min_samples_leaf
        too_deep = self.max_depth is not None and depth >= self.max_depth
        if pure or too_small or too_deep:
            return node
        split = self._best_split(X, y, rng)
        if split is None:
            return node
        _, f, cut = split
        mask = X[:, f] <= cut
        self.feature[node] = f
        self.threshold[node] = cut
        self.left[node] = self._grow(X[mask], y[mask], depth + 1, rng)
        self.right[node] = self._grow(X[~mask], y[~mask], depth + 1, rng)
        return node

    def fit(self, X, y, rng=None):
        rng = rng if rng is not None else np.random.default_rng()
        self.__init__(self.max_features, self.min_samples_leaf, self.max_depth)
        self._grow(np.asarray(X, dtype=float), np.asarray(y, dtype=int), 0, rng)
        self._freeze()
        return self

    def _freeze(self):
        self._feature = np.asarray(self.feature, dtype=np.intp)
        self._threshold = np.asarray(self.threshold, dtype=float)
        self._left = np.asarray(self.left, dtype=np.intp)
        self._right = np.asarray(self.right, dtype=np.intp)
        counts = np.asarray(self.counts, dtype=float).reshape(-1, 2)
        self._vote = (counts[:, 1] > counts[:, 0]).astype(float)

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        nodes = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        while True:
            feature = self._feature[nodes]
            active = feature != LEAF
            if not active.any():
                return nodes
            a_rows, a_nodes = rows[active], nodes[active]
            go_left = X[a_rows, feature[active]] <= self._threshold[a_nodes]
            nodes[a_rows] = np.where(go_left, self._left[a_nodes], self._right[a_nodes])

    def vote(self, X) -> np.ndarray:
        """Leaf-majority class (1 = incorrect) per row; ties vote 0."""
        return self._vote[self.apply(X)]

    def to_records(self) -> list[str]:
        records = []
        for i in range(self.node_count):
            if self.feature[i] == LEAF:
                records.append(f"L {self.counts[i][0]} {self.counts[i][1]}")
            else:
                records.append(f"S {self.feature[i]} {self.threshold[i]!r}")
        return records

    @classmethod
    def from_records(cls, records: list[str]) -> "GiniTree":
        tree = cls()
        pos = 0

        def build():
            nonlocal pos
            kind, a, b = records[pos].split()
            pos += 1
            node = tree._new_node()
            if kind == "L":
                tree.counts[node] = (int(a), int(b))
                return node
            if kind != "S":
                raise ValueError(f"bad node record {records[pos - 1]!r}")
            tree.feature[node] = int(a)
            tree.threshold[node] = float(b)
            tree.left[node] = build()
            tree.right[node] = build()
            return node

        build()
        if pos != len(records):
            raise ValueError("trailing node records")
        tree._freeze()
        return tree


class RandomForestClassifier(ClassifierMixin, BaseEstimator):
    """Bagged Gini trees with per-split feature subsampling.

    ``predict_proba`` reports the fraction of trees whose leaf majority is
    class 1. ``max_features="sqrt"`` inspects ``ceil(sqrt(n_features))``
    candidate columns per split.
    """

    def __init__(self, n_estimators=100, max_features="sqrt", min_samples_leaf=1,
                 max_depth=None, bootstrap=True, random_state=None):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.random_state = random_state

    def _n_split_features(self, n_features):
        if self.max_features == "sqrt":
            return int(math.ceil(math.sqrt(n_features)))
        if self.max_features is None:
            return n_features
        return int(self.max_features)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        self.classes_, y = np.unique(y, return_inverse=True)
        if len(self.classes_) > 2:
            raise ValueError("only binary targets are supported")
        self.n_features_in_ = X.shape[1]
        k = self._n_split_features(X.shape[1])
        seed = 0 if self.random_state is None else self.random_state
        children = np.random.SeedSequence(seed).spawn(self.n_estimators)
        self.estimators_ = []
        for child in children:
            rng = np.random.default_rng(child)
            if self.bootstrap:
                sample = rng.integers(0, len(y), size=len(y))
            else:
                sample = np.arange(len(y))
            tree = GiniTree(k, self.min_samples_leaf, self.max_depth)
            self.estimators_.append(tree.fit(X[sample], y[sample], rng))
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "estimators_")
        X = check_array(X, dtype=float)
        p1 = np.mean([tree.vote(X) for tree in self.estimators_], axis=0)
        if len(self.classes_) == 1:
            return np.ones((len(X), 1))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[(proba[:, -1] >= 0.5).astype(int) if proba.shape[1] > 1 else 0]
