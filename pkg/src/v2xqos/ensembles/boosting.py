"""Squared-loss gradient boosting with depth-capped CART stages."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .tree import canonical_order, check_features, fit_tree

VARIANTS = ("depthwise", "leafwise", "oblivious")


class Stage(Protocol):
    def predict(self, features) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class BoostedModel:
    f0: float
    stages: tuple[tuple[Stage, float], ...]
    variant: str
    n_features: int

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown boosting variant {self.variant!r}")

    def predict(self, features) -> np.ndarray:
        X = check_features(features, self.n_features)
        out = np.full(X.shape[0], self.f0)
        for tree, lr in self.stages:
            out += lr * tree.predict(X)
        return out

    def staged_predict(self, features):
        X = check_features(features, self.n_features)
        out = np.full(X.shape[0], self.f0)
        yield out.copy()
        for tree, lr in self.stages:
            out += lr * tree.predict(X)
            yield out.copy()


def fit_gbr(
    features,
    targets,
    n_estimators: int = 100,
    max_depth: int = 3,
    learning_rate: float = 0.1,
    min_samples_leaf: int = 1,
) -> BoostedModel:
    """Start from the target mean and add ``learning_rate`` times a tree fit to the residuals, per stage."""
    X = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(targets, dtype=np.float64).ravel()
    order = canonical_order(X, y)
    X, y = np.ascontiguousarray(X[order]), np.ascontiguousarray(y[order])
    f0 = float(y.mean())
    current = np.full(y.size, f0)
    stages = []
    for _ in range(n_estimators):
        residual = y - current
        tree = fit_tree(X, residual, None, max_depth=max_depth, min_samples_leaf=min_samples_leaf)
        current = current + learning_rate * tree.predict(X)
        stages.append((tree, float(learning_rate)))
    return BoostedModel(f0, tuple(stages), "depthwise", X.shape[1])
