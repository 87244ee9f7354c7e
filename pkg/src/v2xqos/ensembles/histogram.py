"""Quantile feature binning and leaf-wise histogram boosting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..seeding import derive_seed
from .boosting import BoostedModel
from .tree import RegressionTree, _TreeBuilder, canonical_order

TIE_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class HistogramBins:
    """Per-feature bin upper edges; the last edge of every feature is +inf.

    A value ``x`` falls in the first bin whose edge is ``>= x``.
    """

    edges: tuple[np.ndarray, ...]

    @property
    def n_features(self) -> int:
        return len(self.edges)

    def n_bins(self, feature: int) -> int:
        return self.edges[feature].size

    def transform(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, got shape {X.shape}")
        out = np.empty(X.shape, dtype=np.int64)
        for j, e in enumerate(self.edges):
            out[:, j] = np.searchsorted(e, X[:, j], side="left")
        return out


def _midpoint(lo: float, hi: float) -> float:
    mid = 0.5 * (lo + hi)
    return lo if mid >= hi else mid


def _feature_edges(values: np.ndarray, max_bin: int) -> np.ndarray:
    distinct = np.unique(values)
    if distinct.size <= max_bin:
        cuts = [_midpoint(a, b) for a, b in zip(distinct[:-1], distinct[1:])]
    else:
        ordered = np.sort(values)
        n = ordered.size
        cuts = []
        for i in range(1, max_bin):
            pos = int(round(i * n / max_bin))
            below = ordered[pos - 1]
            k = np.searchsorted(distinct, below, side="right")
            if k >= distinct.size:
                continue
            cuts.append(_midpoint(below, distinct[k]))
        cuts = sorted(set(cuts))
    return np.asarray(list(cuts) + [np.inf], dtype=np.float64)


def build_histogram_bins(features, row_subset=None, max_bin: int = 255) -> HistogramBins:
    """Quantile bin edges from the rows in ``row_subset``.

    Features with at most ``max_bin`` distinct values get one bin per value,
    with edges halfway between neighbours.  Otherwise the sorted values are
    cut into ``max_bin`` nearly equal-count groups, each cut moved to the
    next change of value when it lands inside a run of ties.
    """
    if max_bin < 2:
        raise ValueError("max_bin must be >= 2")
    X = np.asarray(features, dtype=np.float64)
    rows = np.arange(X.shape[0]) if row_subset is None else np.asarray(row_subset, dtype=np.intp)
    if rows.size == 0:
        raise ValueError("row_subset must be non-empty")
    return HistogramBins(tuple(_feature_edges(X[rows, j], max_bin) for j in range(X.shape[1])))


def histogram_split(
    binned: np.ndarray,
    residual: np.ndarray,
    rows: np.ndarray,
    candidate_features: np.ndarray,
    n_bins: list[int],
    min_child_samples: int,
) -> tuple[int, int, float]:
    """Best (feature, bin) cut for one leaf; feature -1 if none has positive gain.

    Rows with bin ``<= b`` go left.  Ties within a relative 1e-10 resolve to
    the lower feature, then the lower bin.
    """
    r = residual[rows]
    r = r - r.mean()
    n = rows.size
    parent_sse = float(r @ r)
    if n < 2 * min_child_samples or parent_sse <= 0.0:
        return -1, -1, 0.0
    total = float(r.sum())
    base = total * total / n
    best, best_f, best_b = -np.inf, -1, -1
    candidates = []
    for f in candidate_features:
        nb = n_bins[f]
        if nb < 2:
            continue
        codes = binned[rows, f]
        sums = np.cumsum(np.bincount(codes, weights=r, minlength=nb))[:-1]
        counts = np.cumsum(np.bincount(codes, minlength=nb))[:-1]
        n_right = n - counts
        legal = (counts >= min_child_samples) & (n_right >= min_child_samples)
        if not legal.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            gains = sums**2 / counts + (total - sums) ** 2 / n_right - base
        gains = np.where(legal, gains, -np.inf)
        candidates.append((int(f), gains))
        top = gains.max()
        if top > best:
            best = top
    tol = TIE_RTOL * parent_sse
    if best <= tol:
        return -1, -1, 0.0
    for f, gains in candidates:
        hits = np.flatnonzero(gains >= best - tol)
        if hits.size:
            best_f, best_b = f, int(hits[0])
            return best_f, best_b, float(gains[best_b])
    return -1, -1, 0.0


def grow_leafwise(
    binned: np.ndarray,
    residual: np.ndarray,
    bins: HistogramBins,
    candidate_features: np.ndarray,
    num_leaves: int,
    min_child_samples: int = 1,
) -> RegressionTree:
    """Best-first growth: always split the leaf with the largest gain.

    Equal gains go to the leaf created first.  Stops at ``num_leaves`` leaves
    or when no leaf has a positive-gain split.
    """
    if num_leaves < 1:
        raise ValueError("num_leaves must be >= 1")
    n_bins = [bins.n_bins(j) for j in range(bins.n_features)]
    feats = np.unique(np.asarray(candidate_features, dtype=np.int64))
    builder = _TreeBuilder(bins.n_features)
    all_rows = np.arange(residual.size)
    root = builder.add(float(residual.mean()))
    frontier = {}

    def consider(node, rows):
        frontier[node] = (rows, histogram_split(binned, residual, rows, feats, n_bins, min_child_samples))

    consider(root, all_rows)
    leaves = 1
    while leaves < num_leaves and frontier:
        node = max(frontier, key=lambda k: (frontier[k][1][2], -k))
        rows, (f, b, gain) = frontier.pop(node)
        if f < 0:
            break
        go_left = binned[rows, f] <= b
        left_rows, right_rows = rows[go_left], rows[~go_left]
        left = builder.add(float(residual[left_rows].mean()))
        right = builder.add(float(residual[right_rows].mean()))
        builder.split(node, f, float(bins.edges[f][b]), left, right)
        leaves += 1
        consider(left, left_rows)
        consider(right, right_rows)
    return builder.build()


def n_sampled_features(colsample_bytree: float, n_features: int) -> int:
    # round() guards products such as 0.75 * 4 landing a hair above an integer
    return max(1, min(n_features, math.ceil(round(colsample_bytree * n_features, 9))))


def fit_lgbm_style(
    features,
    targets,
    learning_rate: float = 0.1,
    n_estimators: int = 100,
    num_leaves: int = 31,
    colsample_bytree: float = 1.0,
    max_bin: int = 255,
    seed: int = 0,
    min_child_samples: int = 20,
    bins: Optional[HistogramBins] = None,
) -> BoostedModel:
    """Residual boosting with leaf-wise trees searched on histogram bins.

    Each tree sees ``ceil(colsample_bytree * d)`` features drawn without
    replacement by a generator seeded with ``derive_seed(seed, tree_index)``.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(targets, dtype=np.float64).ravel()
    order = canonical_order(X, y)
    X, y = np.ascontiguousarray(X[order]), np.ascontiguousarray(y[order])
    d = X.shape[1]
    bins = bins or build_histogram_bins(X, None, max_bin)
    binned = bins.transform(X)
    k = n_sampled_features(colsample_bytree, d)
    f0 = float(y.mean())
    current = np.full(y.size, f0)
    stages = []
    for t in range(n_estimators):
        rng = np.random.default_rng(derive_seed(seed, t))
        feats = np.sort(rng.choice(d, size=k, replace=False))
        residual = y - current
        tree = grow_leafwise(binned, residual, bins, feats, num_leaves, min_child_samples)
        current = current + learning_rate * tree.predict(X)
        stages.append((tree, float(learning_rate)))
    return BoostedModel(f0, tuple(stages), "leafwise", d)
