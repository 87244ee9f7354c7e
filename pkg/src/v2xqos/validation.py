"""K-fold planning, inner-loop model selection and nested cross-validation.

The outer loop estimates generalization; the inner loop, run only on each
outer-training split, picks the hyperparameters.  Outer-test rows are read
exactly once per fold, after the winning configuration has been refit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import models
from .dataset import Dataset
from .grid import ParamGrid, ParamPoint, enumerate_grid
from .metrics import METRIC_NAMES, MetricsTriple, score, score_all
from .seeding import derive_seed

log = logging.getLogger(__name__)

SELECTION_METRICS = ("rmse", "mae", "r2")
AGGREGATIONS = ("per-fold-mean", "pooled")

# second key of derive_seed, one per randomized role
_REFIT, _INNER_FIT, _INNER_SPLIT = 1, 2, 3


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    folds: tuple[tuple[np.ndarray, np.ndarray], ...]
    seed: int

    @property
    def n(self) -> int:
        return sum(test.size for _, test in self.folds)

    def __iter__(self):
        return iter(self.folds)

    def __len__(self) -> int:
        return self.k


def kfold_split(n: int, k: int, seed: int) -> FoldPlan:
    """Shuffle ``range(n)`` with a seeded permutation and cut it into ``k`` blocks.

    The first ``n % k`` blocks get the extra row.  Index arrays are returned
    sorted.
    """
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    if k > n:
        raise ValueError(f"cannot split {n} rows into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        test = np.sort(perm[start:start + size])
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        folds.append((np.flatnonzero(mask), test))
        start += size
    return FoldPlan(k, tuple(folds), seed)


def _better(metric: str, candidate: float, incumbent: float) -> bool:
    return candidate > incumbent if metric == "r2" else candidate < incumbent


def _check_metric(metric: str) -> str:
    if metric not in SELECTION_METRICS:
        raise ValueError(f"unknown selection metric {metric!r}; expected one of {SELECTION_METRICS}")
    return metric


@dataclass(frozen=True)
class InnerSelection:
    best: ParamPoint
    best_score: float
    scores: tuple[float, ...]  # mean inner score per grid point, enumeration order


def _inner_point_score(args) -> float:
    dataset, train_indices, kind, point, plan, target, metric, seed, outer = args
    fold_scores = []
    for j, (tr, va) in enumerate(plan):
        fitted = models.fit_on_rows(kind, dataset, train_indices[tr], target, point, derive_seed(seed, _INNER_FIT, outer, j))
        X_va, y_va = dataset.take(train_indices[va], target)
        fold_scores.append(score(metric, y_va, fitted.predict(X_va)))
    return float(np.mean(fold_scores))


def inner_select(
    dataset: Dataset,
    train_indices,
    model_kind: str,
    grid: ParamGrid,
    k_inner: int = 6,
    selection_metric: str = "rmse",
    seed: int = 0,
    target: str = "throughput",
    outer_fold: int = 0,
    map_fn: Callable = map,
) -> InnerSelection:
    """Score every grid point by ``k_inner``-fold CV inside ``train_indices``.

    The best mean wins (lowest for RMSE/MAE, highest for R²); ties go to the
    earlier point in enumeration order.  ``map_fn`` may be a parallel map as
    long as it preserves order.
    """
    models.check_kind(model_kind)
    _check_metric(selection_metric)
    train_indices = np.asarray(train_indices, dtype=np.intp)
    if train_indices.size < k_inner:
        raise ValueError(f"{train_indices.size} training rows cannot fill {k_inner} inner folds")
    points = enumerate_grid(grid)
    if not points:
        raise ValueError("empty grid")
    plan = kfold_split(train_indices.size, k_inner, derive_seed(seed, _INNER_SPLIT, outer_fold))
    for tr, _ in plan:
        if tr.size < 1:
            raise ValueError("an inner fold has no training rows")
    jobs = [(dataset, train_indices, model_kind, p, plan, target, selection_metric, seed, outer_fold) for p in points]
    scores = list(map_fn(_inner_point_score, jobs))
    best_i = 0
    for i in range(1, len(scores)):
        if _better(selection_metric, scores[i], scores[best_i]):
            best_i = i
    return InnerSelection(points[best_i], scores[best_i], tuple(scores))


@dataclass(frozen=True, eq=False)
class OuterFold:
    index: int
    params: ParamPoint
    inner_score: float
    metrics: MetricsTriple
    test_indices: np.ndarray
    predictions: np.ndarray
    inner_scores: tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class NestedCvResult:
    model_kind: str
    target: str
    folds: tuple[OuterFold, ...]
    aggregation: str = "per-fold-mean"
    selection_metric: str = "rmse"
    seed: int = 0
    k_inner: int = 6
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    @property
    def k_outer(self) -> int:
        return len(self.folds)

    def oof_predictions(self, n: int) -> np.ndarray:
        out = np.full(n, np.nan)
        for fold in self.folds:
            out[fold.test_indices] = fold.predictions
        return out


def aggregate(folds: Sequence[OuterFold], aggregation: str, y_true: Optional[np.ndarray] = None) -> tuple[dict, dict]:
    """Mean and population std of each metric over folds.

    With ``aggregation="pooled"`` the reported value is instead each metric on
    all outer-test predictions concatenated (``y_true`` indexed by row).
    """
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {aggregation!r}; expected one of {AGGREGATIONS}")
    table = {m: np.array([getattr(f.metrics, m) for f in folds]) for m in METRIC_NAMES}
    std = {m: float(v.std()) for m, v in table.items()}
    if aggregation == "per-fold-mean":
        mean = {m: float(v.mean()) for m, v in table.items()}
    else:
        if y_true is None:
            raise ValueError("pooled aggregation needs the target vector")
        idx = np.concatenate([f.test_indices for f in folds])
        pred = np.concatenate([f.predictions for f in folds])
        mean = score_all(y_true[idx], pred).as_dict()
    return mean, std


def run_outer_fold(
    dataset: Dataset,
    model_kind: str,
    grid: ParamGrid,
    plan: FoldPlan,
    fold_index: int,
    k_inner: int,
    target: str,
    seed: int,
    selection_metric: str = "rmse",
    map_fn: Callable = map,
) -> OuterFold:
    train, test = plan.folds[fold_index]
    selection = inner_select(dataset, train, model_kind, grid, k_inner, selection_metric, seed, target, fold_index, map_fn)
    fitted = models.fit_on_rows(model_kind, dataset, train, target, selection.best, derive_seed(seed, _REFIT, fold_index))
    X_test, y_test = dataset.take(test, target)
    pred = fitted.predict(X_test)
    log.debug("%s/%s outer fold %d: %s", model_kind, target, fold_index, selection.best)
    return OuterFold(fold_index, selection.best, selection.best_score, score_all(y_test, pred), test, pred, selection.scores)


def _run_outer_fold_packed(args) -> OuterFold:
    return run_outer_fold(*args)


def nested_cv(
    dataset: Dataset,
    model_kind: str,
    grid: ParamGrid,
    k_outer: int = 8,
    k_inner: int = 6,
    target_name: str = "throughput",
    seed: int = 0,
    selection_metric: str = "rmse",
    aggregation: str = "per-fold-mean",
    map_fn: Callable = map,
) -> NestedCvResult:
    """Nested cross-validation of one model kind on one target.

    Per outer fold: inner selection on the outer-training rows, refit of the
    winner on all of them, one evaluation on the outer-test rows.  Outer folds
    are dispatched through ``map_fn`` (order-preserving) and reduced in fold
    order, so parallel and serial runs agree bit for bit.
    """
    models.check_kind(model_kind)
    _check_metric(selection_metric)
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {aggregation!r}")
    n = dataset.row_count
    if n < k_outer * k_inner:
        raise ValueError(f"{n} rows is too few for {k_outer} x {k_inner} nested folds")
    plan = kfold_split(n, k_outer, seed)
    jobs = [(dataset, model_kind, grid, plan, i, k_inner, target_name, seed, selection_metric) for i in range(k_outer)]
    folds = tuple(map_fn(_run_outer_fold_packed, jobs))
    mean, std = aggregate(folds, aggregation, dataset.target(target_name))
    return NestedCvResult(model_kind, target_name, folds, aggregation, selection_metric, seed, k_inner, mean, std)


def kfold_evaluate(
    dataset: Dataset,
    model_kind: str,
    params: ParamPoint,
    k: int = 8,
    target_name: str = "throughput",
    seed: int = 0,
) -> list[MetricsTriple]:
    """Plain K-fold test metrics of one fixed configuration.

    Uses the same fold plan and per-fold fit seeds as :func:`nested_cv`, so a
    one-point grid reproduces these numbers exactly.
    """
    plan = kfold_split(dataset.row_count, k, seed)
    out = []
    for i, (train, test) in enumerate(plan):
        fitted = models.fit_on_rows(model_kind, dataset, train, target_name, params, derive_seed(seed, _REFIT, i))
        X_test, y_test = dataset.take(test, target_name)
        out.append(score_all(y_test, fitted.predict(X_test)))
    return out
