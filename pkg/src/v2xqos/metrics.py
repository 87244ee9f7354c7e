"""Regression scores: MAE, RMSE and the coefficient of determination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UndefinedMetricError(ValueError):
    """R² requested on a constant target that the predictions do not match."""


@dataclass(frozen=True)
class MetricsTriple:
    mae: float
    rmse: float
    r2: float

    def as_dict(self) -> dict[str, float]:
        return {"mae": self.mae, "rmse": self.rmse, "r2": self.r2}


METRIC_NAMES = ("mae", "rmse", "r2")


def _check(y, yhat, min_len: int = 1) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.size} targets vs {yhat.size} predictions")
    if y.size < min_len:
        raise ValueError(f"need at least {min_len} values, got {y.size}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(yhat))):
        raise ValueError("non-finite values in targets or predictions")
    return y, yhat


def mae(y, yhat) -> float:
    y, yhat = _check(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def rmse(y, yhat) -> float:
    y, yhat = _check(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def r2(y, yhat) -> float:
    """1 - SS_res / SS_tot, with the baseline mean taken over the evaluated rows.

    A constant target gives 0 when the predictions match it exactly and
    raises :class:`UndefinedMetricError` otherwise.
    """
    y, yhat = _check(y, yhat, min_len=2)
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        if ss_res == 0.0:
            return 0.0
        raise UndefinedMetricError("R² undefined: zero target variance with non-zero residuals")
    return 1.0 - ss_res / ss_tot


def score_all(y, yhat) -> MetricsTriple:
    return MetricsTriple(mae=mae(y, yhat), rmse=rmse(y, yhat), r2=r2(y, yhat))


def score(name: str, y, yhat) -> float:
    if name == "mae":
        return mae(y, yhat)
    if name == "rmse":
        return rmse(y, yhat)
    if name == "r2":
        return r2(y, yhat)
    raise ValueError(f"unknown metric {name!r}")
