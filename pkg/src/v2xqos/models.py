"""The six regressor families behind one fit/predict interface.

Each kind has its hyperparameter grid, the fixed settings the grid leaves
open, and a flag saying whether inputs are standardized first (only the
network and the SVR are).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional

import numpy as np

from .dataset import Dataset, Scaler, apply_scaler, fit_scaler
from .ensembles.forest import fit_random_forest
from .ensembles.boosting import fit_gbr
from .ensembles.histogram import fit_lgbm_style
from .ensembles.oblivious import DEFAULT_MAX_BIN, fit_oblivious_boosting
from .grid import ParamGrid
from .mlp import fit_mlp
from .svr import fit_svr

MODEL_KINDS = ("cbr", "svr", "rf", "gbr", "ann", "lgbm")
ENSEMBLE_KINDS = ("cbr", "rf", "gbr", "lgbm")

PAPER_GRIDS: dict[str, list[tuple[str, list]]] = {
    "cbr": [
        ("depth", [4, 5, 7, 10]),
        ("min_child_samples", [1, 4, 8, 16]),
        ("learning_rate", [0.01, 0.03, 0.09, 0.1, 0.5, 0.9]),
        ("iterations", [150, 200]),
    ],
    "svr": [
        ("C", [1, 3]),
        ("epsilon", [0.1, 0.3]),
    ],
    "rf": [
        ("n_estimators", [50, 100, 200]),
        ("min_samples_leaf", [2, 3, 4, 6]),
    ],
    "gbr": [
        ("n_estimators", [1, 10, 50, 100, 300, 500, 700]),
        ("max_depth", [1, 3, 5, 7]),
        ("learning_rate", [0.01, 0.03, 0.09, 0.3]),
    ],
    "ann": [
        ("hidden_size", [5, 10, 25]),
        ("max_iter", [500, 1500, 2500]),
    ],
    "lgbm": [
        ("learning_rate", [0.003, 0.006, 0.009, 0.01, 0.03, 0.06, 0.09, 0.3, 0.6]),
        ("n_estimators", [20, 40, 80, 100]),
        ("num_leaves", [10, 15, 20, 25]),
        ("colsample_bytree", [0.7, 0.8, 0.9]),
        ("max_bin", [75, 150, 255, 510]),
    ],
}

# settings the grids leave open; overridable per run
FIXED_PARAMS: dict[str, dict[str, Any]] = {
    "cbr": {"max_bin": DEFAULT_MAX_BIN},
    "svr": {"gamma": "scale"},
    "rf": {},
    "gbr": {"min_samples_leaf": 1},
    "ann": {},
    "lgbm": {"min_child_samples": 20},
}

SCALED_KINDS = frozenset({"svr", "ann"})


def _fit_cbr(X, y, p, seed):
    return fit_oblivious_boosting(
        X, y, depth=p["depth"], min_child_samples=p["min_child_samples"],
        learning_rate=p["learning_rate"], iterations=p["iterations"], max_bin=p["max_bin"],
    )


def _fit_svr(X, y, p, seed):
    return fit_svr(X, y, C=p["C"], epsilon=p["epsilon"], gamma=p["gamma"], seed=seed)


def _fit_rf(X, y, p, seed):
    return fit_random_forest(X, y, n_estimators=p["n_estimators"], min_samples_leaf=p["min_samples_leaf"], seed=seed)


def _fit_gbr(X, y, p, seed):
    return fit_gbr(
        X, y, n_estimators=p["n_estimators"], max_depth=p["max_depth"],
        learning_rate=p["learning_rate"], min_samples_leaf=p["min_samples_leaf"],
    )


def _fit_ann(X, y, p, seed):
    return fit_mlp(X, y, hidden_size=p["hidden_size"], max_iter=p["max_iter"], seed=seed)


def _fit_lgbm(X, y, p, seed):
    return fit_lgbm_style(
        X, y, learning_rate=p["learning_rate"], n_estimators=p["n_estimators"],
        num_leaves=p["num_leaves"], colsample_bytree=p["colsample_bytree"],
        max_bin=p["max_bin"], seed=seed, min_child_samples=p["min_child_samples"],
    )


FITTERS: dict[str, Callable] = {
    "cbr": _fit_cbr,
    "svr": _fit_svr,
    "rf": _fit_rf,
    "gbr": _fit_gbr,
    "ann": _fit_ann,
    "lgbm": _fit_lgbm,
}


def check_kind(kind: str) -> str:
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {', '.join(MODEL_KINDS)}")
    return kind


def allowed_params(kind: str) -> tuple[str, ...]:
    check_kind(kind)
    return tuple(name for name, _ in PAPER_GRIDS[kind]) + tuple(FIXED_PARAMS[kind])


def paper_grid(kind: str) -> ParamGrid:
    return ParamGrid(PAPER_GRIDS[check_kind(kind)])


def build_grid(kind: str, overrides: Optional[Mapping[str, Any]] = None) -> ParamGrid:
    """Default grid for ``kind`` with per-parameter value overrides applied.

    An override replaces the value list of a grid dimension, or turns a fixed
    setting into a dimension of its own.  Scalars are treated as one-value
    lists.
    """
    dims = [(name, list(values)) for name, values in PAPER_GRIDS[check_kind(kind)]]
    allowed = allowed_params(kind)
    for name, values in (overrides or {}).items():
        if name not in allowed:
            raise ValueError(f"unknown parameter {name!r} for model kind {kind!r}; expected one of {allowed}")
        values = list(values) if isinstance(values, (list, tuple)) else [values]
        if not values:
            raise ValueError(f"override for {kind}.{name} is empty")
        for i, (dim, _) in enumerate(dims):
            if dim == name:
                dims[i] = (name, values)
                break
        else:
            dims.append((name, values))
    return ParamGrid(dims)


def full_params(kind: str, point: Mapping[str, Any]) -> dict[str, Any]:
    params = dict(FIXED_PARAMS[check_kind(kind)])
    params.update(point)
    return params


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A fitted model of one kind plus the scaler its inputs go through, if any."""

    kind: str
    params: Mapping[str, Any]
    model: Any
    scaler: Optional[Scaler] = None

    def predict(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=np.float64)
        if self.scaler is not None:
            X = apply_scaler(self.scaler, X)
        return self.model.predict(X)


def fit_model(kind: str, features, targets, params: Mapping[str, Any], seed: int, scaler: Optional[Scaler] = None) -> TrainedModel:
    """Fit ``kind`` on raw features; standardizes first when ``scaler`` is given."""
    X = np.asarray(features, dtype=np.float64)
    if scaler is not None:
        X = apply_scaler(scaler, X)
    p = full_params(kind, params)
    return TrainedModel(kind, p, FITTERS[kind](X, np.asarray(targets, dtype=np.float64), p, seed), scaler)


def fit_on_rows(kind: str, dataset: Dataset, rows, target: str, params: Mapping[str, Any], seed: int) -> TrainedModel:
    """Fit on ``dataset`` rows ``rows``; any scaler sees those rows only."""
    rows = np.asarray(rows, dtype=np.intp)
    X, y = dataset.take(rows, target)
    scaler = fit_scaler(dataset, rows) if kind in SCALED_KINDS else None
    return fit_model(kind, X, y, params, seed, scaler)
