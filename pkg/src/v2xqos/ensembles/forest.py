"""Bagged CART forest."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..seeding import derive_seed
from .tree import RegressionTree, canonical_order, check_features, fit_tree


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[RegressionTree, ...]
    tree_seeds: tuple[int, ...]
    n_features: int

    def predict(self, features) -> np.ndarray:
        X = check_features(features, self.n_features)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)


def fit_random_forest(
    features,
    targets,
    n_estimators: int = 100,
    min_samples_leaf: int = 1,
    seed: int = 0,
    bootstrap: bool = True,
) -> ForestModel:
    """Fit ``n_estimators`` unlimited-depth trees on bootstrap resamples.

    Every split considers all features.  Tree ``i`` draws its resample with a
    generator seeded by ``derive_seed(seed, i)``; draws index the rows in
    canonical (sorted) order, so shuffling the input rows changes nothing.
    """
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    X = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(targets, dtype=np.float64).ravel()
    order = canonical_order(X, y)
    X, y = np.ascontiguousarray(X[order]), np.ascontiguousarray(y[order])
    n = X.shape[0]
    trees, seeds = [], []
    for i in range(n_estimators):
        tree_seed = derive_seed(seed, i)
        if bootstrap:
            rows = np.sort(np.random.default_rng(tree_seed).integers(0, n, size=n))
        else:
            rows = np.arange(n)
        trees.append(fit_tree(X, y, rows, max_depth=None, min_samples_leaf=min_samples_leaf))
        seeds.append(tree_seed)
    return ForestModel(tuple(trees), tuple(seeds), X.shape[1])
