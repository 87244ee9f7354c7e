"""CART regression trees grown greedily on squared error.

Trees are stored as flat arrays (one slot per node) so prediction is a tight
compiled loop.  Internal nodes route ``x[feature] <= threshold`` to the left
child; leaves carry ``feature == -1`` and a constant value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numba import njit

LEAF = -1


@dataclass(frozen=True, eq=False)
class RegressionTree:
    feature: np.ndarray  # int64, LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int

    @property
    def node_count(self) -> int:
        return self.feature.size

    @property
    def leaf_count(self) -> int:
        return int(np.count_nonzero(self.feature == LEAF))

    def depth(self) -> int:
        depths = np.zeros(self.node_count, dtype=np.int64)
        for node in range(self.node_count):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def predict(self, features) -> np.ndarray:
        X = check_features(features, self.n_features)
        return _predict_tree(self.feature, self.threshold, self.left, self.right, self.value, X)

    def apply(self, features) -> np.ndarray:
        """Index of the leaf each row lands in."""
        X = check_features(features, self.n_features)
        return _apply_tree(self.feature, self.threshold, self.left, self.right, X)


def check_features(features, n_features: int) -> np.ndarray:
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} feature columns, got shape {np.shape(features)}")
    return X


@njit(cache=True)
def _apply_tree(feature, threshold, left, right, X):
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] != -1:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True)
def _predict_tree(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0], dtype=np.float64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] != -1:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@njit(cache=True)
def _best_split_kernel(X, y, rows, features, min_leaf):
    """Scan every midpoint of every candidate feature.

    Returns (feature, threshold, reduction); feature is -1 when no legal cut
    improves on the parent.  Any cut within a relative 1e-10 of the best
    reduction counts as tied; the first in (feature, threshold) order wins.
    """
    n = rows.size
    nf = features.size
    mean = 0.0
    for i in range(n):
        mean += y[rows[i]]
    mean /= n
    ys = np.empty(n)
    parent_sse = 0.0
    total = 0.0
    for i in range(n):
        ys[i] = y[rows[i]] - mean
        parent_sse += ys[i] * ys[i]
        total += ys[i]
    if n < 2 * min_leaf or parent_sse <= 0.0:
        return -1, 0.0, 0.0
    base = total * total / n

    gains = np.full((nf, n), -np.inf)
    thresholds = np.zeros((nf, n))
    xs = np.empty(n)
    best = -np.inf
    for fi in range(nf):
        f = features[fi]
        for i in range(n):
            xs[i] = X[rows[i], f]
        order = np.argsort(xs, kind="mergesort")
        left_sum = 0.0
        for pos in range(n - 1):
            left_sum += ys[order[pos]]
            n_left = pos + 1
            n_right = n - n_left
            if n_left < min_leaf:
                continue
            if n_right < min_leaf:
                break
            lo = xs[order[pos]]
            hi = xs[order[pos + 1]]
            if lo == hi:
                continue
            right_sum = total - left_sum
            gain = left_sum * left_sum / n_left + right_sum * right_sum / n_right - base
            threshold = 0.5 * (lo + hi)
            if threshold >= hi:
                threshold = lo
            gains[fi, pos] = gain
            thresholds[fi, pos] = threshold
            if gain > best:
                best = gain

    tol = 1e-10 * parent_sse
    if best <= tol:
        return -1, 0.0, 0.0
    # thresholds ascend with pos, so row-major order is (feature, threshold)
    for fi in range(nf):
        for pos in range(n):
            if gains[fi, pos] >= best - tol:
                return features[fi], thresholds[fi, pos], gains[fi, pos]
    return -1, 0.0, 0.0


def best_split(
    features,
    targets,
    row_subset=None,
    candidate_features=None,
    min_samples_leaf: int = 1,
) -> Optional[tuple[int, float, float]]:
    """Best SSE-reducing axis-aligned cut, or ``None`` if nothing helps.

    Candidate thresholds are midpoints between consecutive distinct values of
    each candidate feature within ``row_subset``; both sides must keep at
    least ``min_samples_leaf`` rows.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(targets, dtype=np.float64)
    rows = np.arange(X.shape[0]) if row_subset is None else np.asarray(row_subset, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("row_subset must be non-empty")
    if min_samples_leaf < 1:
        raise ValueError("min_samples_leaf must be >= 1")
    feats = np.arange(X.shape[1]) if candidate_features is None else np.unique(np.asarray(candidate_features, dtype=np.int64))
    f, thr, gain = _best_split_kernel(X, y, rows.astype(np.int64), feats.astype(np.int64), int(min_samples_leaf))
    if f < 0:
        return None
    return int(f), float(thr), float(gain)


class _TreeBuilder:
    def __init__(self, n_features: int):
        self.n_features = n_features
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add(self, value: float) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        return len(self.feature) - 1

    def split(self, node: int, feature: int, threshold: float, left: int, right: int) -> None:
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = left
        self.right[node] = right

    def build(self) -> RegressionTree:
        return RegressionTree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=np.float64),
            n_features=self.n_features,
        )


FeatureSampler = Callable[[], np.ndarray]


def fit_tree(
    features,
    targets,
    row_subset=None,
    max_depth: Optional[int] = None,
    min_samples_leaf: int = 1,
    candidate_feature_sampler: Optional[FeatureSampler] = None,
) -> RegressionTree:
    """Grow a tree depth-first until the depth cap, the leaf-size floor, or no gain.

    ``max_depth=None`` means unlimited.  ``candidate_feature_sampler`` is called
    once per node and returns the feature indices to scan; by default every
    feature is a candidate.  Leaves predict the mean target of their rows.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(targets, dtype=np.float64)
    rows = np.arange(X.shape[0], dtype=np.int64) if row_subset is None else np.asarray(row_subset, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("row_subset must be non-empty")
    all_features = np.arange(X.shape[1], dtype=np.int64)
    builder = _TreeBuilder(X.shape[1])
    root = builder.add(float(y[rows].mean()))
    stack = [(root, rows, 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        if node_rows.size < 2 * min_samples_leaf:
            continue
        feats = all_features if candidate_feature_sampler is None else np.unique(np.asarray(candidate_feature_sampler(), dtype=np.int64))
        f, thr, gain = _best_split_kernel(X, y, node_rows, feats, int(min_samples_leaf))
        if f < 0:
            continue
        go_left = X[node_rows, f] <= thr
        left_rows = node_rows[go_left]
        right_rows = node_rows[~go_left]
        left = builder.add(float(y[left_rows].mean()))
        right = builder.add(float(y[right_rows].mean()))
        builder.split(node, int(f), float(thr), left, right)
        # right pushed first so the left subtree is expanded first
        stack.append((right, right_rows, depth + 1))
        stack.append((left, left_rows, depth + 1))
    return builder.build()


def canonical_order(features: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Row permutation that sorts rows by (features..., target).

    Fitters reorder their training rows with this so results do not depend on
    the order rows were supplied in.
    """
    keys = [targets] + [features[:, j] for j in range(features.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)
