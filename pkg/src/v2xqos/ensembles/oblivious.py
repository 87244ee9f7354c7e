"""Boosting with oblivious (symmetric) trees.

Every level of an oblivious tree applies one shared ``x[feature] <= threshold``
test, so a depth-``d`` tree has ``2**d`` leaves addressed by the bit pattern of
the test outcomes (first level is the most significant bit, 1 = right).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boosting import BoostedModel
from .histogram import TIE_RTOL, HistogramBins, build_histogram_bins
from .tree import canonical_order, check_features

DEFAULT_MAX_BIN = 255


@dataclass(frozen=True, eq=False)
class ObliviousTree:
    features: np.ndarray  # one per level
    thresholds: np.ndarray
    leaf_values: np.ndarray  # 2**depth entries
    n_features: int

    @property
    def depth(self) -> int:
        return self.features.size

    def leaf_index(self, features) -> np.ndarray:
        X = check_features(features, self.n_features)
        idx = np.zeros(X.shape[0], dtype=np.int64)
        for f, thr in zip(self.features, self.thresholds):
            idx = 2 * idx + (X[:, f] > thr)
        return idx

    def predict(self, features) -> np.ndarray:
        return self.leaf_values[self.leaf_index(features)]


def _level_split(binned, residual, leaf_of, n_leaves, n_bins, min_child_samples):
    """Pick the (feature, bin) whose shared cut most reduces SSE over all leaves.

    A cut is illegal if it leaves any non-empty child below
    ``min_child_samples`` rows.  Returns (-1, -1, 0.0) when nothing legal has
    positive gain.
    """
    n = residual.size
    leaf_counts = np.bincount(leaf_of, minlength=n_leaves)
    leaf_sums = np.bincount(leaf_of, weights=residual, minlength=n_leaves)
    with np.errstate(divide="ignore", invalid="ignore"):
        leaf_means = np.where(leaf_counts > 0, leaf_sums / leaf_counts, 0.0)
    centered = residual - leaf_means[leaf_of]
    sse = float(centered @ centered)
    if sse <= 0.0:
        return -1, -1, 0.0
    sums_c = np.bincount(leaf_of, weights=centered, minlength=n_leaves)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = np.where(leaf_counts > 0, sums_c**2 / leaf_counts, 0.0).sum()

    best = -np.inf
    candidates = []
    for f in range(binned.shape[1]):
        nb = n_bins[f]
        if nb < 2:
            continue
        key = leaf_of * nb + binned[:, f]
        sums = np.bincount(key, weights=centered, minlength=n_leaves * nb).reshape(n_leaves, nb)
        counts = np.bincount(key, minlength=n_leaves * nb).reshape(n_leaves, nb)
        left_s = np.cumsum(sums, axis=1)[:, :-1]
        left_n = np.cumsum(counts, axis=1)[:, :-1]
        right_s = sums_c[:, None] - left_s
        right_n = leaf_counts[:, None] - left_n
        bad = ((left_n > 0) & (left_n < min_child_samples)) | ((right_n > 0) & (right_n < min_child_samples))
        legal = ~bad.any(axis=0)
        if not legal.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            part = np.where(left_n > 0, left_s**2 / left_n, 0.0) + np.where(right_n > 0, right_s**2 / right_n, 0.0)
        gains = part.sum(axis=0) - base
        gains = np.where(legal, gains, -np.inf)
        candidates.append((f, gains))
        best = max(best, gains.max())
    tol = TIE_RTOL * sse
    if best <= tol:
        return -1, -1, 0.0
    for f, gains in candidates:
        hits = np.flatnonzero(gains >= best - tol)
        if hits.size:
            return f, int(hits[0]), float(gains[hits[0]])
    return -1, -1, 0.0


def grow_oblivious(
    binned: np.ndarray,
    residual: np.ndarray,
    bins: HistogramBins,
    depth: int,
    min_child_samples: int = 1,
) -> ObliviousTree:
    """Add levels greedily; stop early if no legal level has positive gain.

    Leaves with no rows predict 0.
    """
    n_bins = [bins.n_bins(j) for j in range(bins.n_features)]
    leaf_of = np.zeros(residual.size, dtype=np.int64)
    feats, thresholds = [], []
    for level in range(depth):
        f, b, gain = _level_split(binned, residual, leaf_of, 2**level, n_bins, min_child_samples)
        if f < 0:
            break
        feats.append(f)
        thresholds.append(float(bins.edges[f][b]))
        leaf_of = 2 * leaf_of + (binned[:, f] > b)
    n_leaves = 2 ** len(feats)
    counts = np.bincount(leaf_of, minlength=n_leaves)
    sums = np.bincount(leaf_of, weights=residual, minlength=n_leaves)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    return ObliviousTree(
        np.asarray(feats, dtype=np.int64),
        np.asarray(thresholds, dtype=np.float64),
        values,
        bins.n_features,
    )


def fit_oblivious_boosting(
    features,
    targets,
    depth: int = 6,
    min_child_samples: int = 1,
    learning_rate: float = 0.03,
    iterations: int = 200,
    max_bin: int = DEFAULT_MAX_BIN,
) -> BoostedModel:
    """Residual boosting with oblivious trees on histogram-bin thresholds."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    X = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(targets, dtype=np.float64).ravel()
    order = canonical_order(X, y)
    X, y = np.ascontiguousarray(X[order]), np.ascontiguousarray(y[order])
    bins = build_histogram_bins(X, None, max_bin)
    binned = bins.transform(X)
    f0 = float(y.mean())
    current = np.full(y.size, f0)
    stages = []
    for _ in range(iterations):
        tree = grow_oblivious(binned, y - current, bins, depth, min_child_samples)
        current = current + learning_rate * tree.predict(X)
        stages.append((tree, float(learning_rate)))
    return BoostedModel(f0, tuple(stages), "oblivious", X.shape[1])

