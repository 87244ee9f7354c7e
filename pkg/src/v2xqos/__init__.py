"""Nested cross-validation benchmark of six regressors for NR-V2X QoS prediction."""

__version__ = "0.1.0"

from .dataset import ColumnMapping, Dataset, clean, fit_scaler, apply_scaler, generate_synthetic, load_table  # noqa: E402
from .grid import ParamGrid, enumerate_grid  # noqa: E402
from .metrics import MetricsTriple, mae, r2, rmse  # noqa: E402
from .models import MODEL_KINDS, build_grid, paper_grid  # noqa: E402
from .validation import inner_select, kfold_split, nested_cv  # noqa: E402

__all__ = [
    "ColumnMapping",
    "Dataset",
    "MODEL_KINDS",
    "MetricsTriple",
    "ParamGrid",
    "apply_scaler",
    "build_grid",
    "clean",
    "enumerate_grid",
    "fit_scaler",
    "generate_synthetic",
    "inner_select",
    "kfold_split",
    "load_table",
    "mae",
    "nested_cv",
    "paper_grid",
    "r2",
    "rmse",
]
