"""Experiment configuration: YAML in, validated dataclass out, and back.

Recognised keys (dotted paths)::

    data.path                     CSV export to read
    data.columns.<role>           source column for mcs, distance, sinr,
                                  packet_size, throughput, pdr
    data.synthetic.rows/.seed     use the synthetic generator instead of a file
    data.subsample                keep a seeded random subset of this many rows
    models                        list drawn from cbr, svr, rf, gbr, ann, lgbm
    targets                       list drawn from throughput, pdr
    cv.outer / cv.inner           fold counts (8 / 6)
    cv.selection_metric           rmse | mae | r2
    cv.aggregation                per-fold-mean | pooled
    seed                          master seed (42)
    repeats                       independent nested-CV repetitions (1)
    overrides.<model>.<param>     value or list replacing that grid dimension
    output                        report directory
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .dataset import TARGET_ROLES, ColumnMapping
from .models import MODEL_KINDS, allowed_params
from .validation import AGGREGATIONS, SELECTION_METRICS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    rows: int
    seed: int


@dataclass(frozen=True)
class ExperimentConfig:
    models: tuple[str, ...]
    targets: tuple[str, ...]
    data_path: Optional[str] = None
    columns: ColumnMapping = field(default_factory=ColumnMapping)
    synthetic: Optional[SyntheticSpec] = None
    subsample: Optional[int] = None
    k_outer: int = 8
    k_inner: int = 6
    selection_metric: str = "rmse"
    aggregation: str = "per-fold-mean"
    seed: int = 42
    repeats: int = 1
    overrides: dict = field(default_factory=dict)
    output: str = "results"
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    def __post_init__(self):
        if not self.models:
            raise ConfigError("at least one model kind is required")
        if not self.targets:
            raise ConfigError("at least one target is required")
        for kind in self.models:
            if kind not in MODEL_KINDS:
                raise ConfigError(f"unknown model kind {kind!r}; expected one of {', '.join(MODEL_KINDS)}")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("duplicate model kinds")
        for target in self.targets:
            if target not in TARGET_ROLES:
                raise ConfigError(f"unknown target {target!r}; expected one of {', '.join(TARGET_ROLES)}")
        if len(set(self.targets)) != len(self.targets):
            raise ConfigError("duplicate targets")
        for name, k in (("cv.outer", self.k_outer), ("cv.inner", self.k_inner)):
            if not isinstance(k, int) or isinstance(k, bool) or k < 2:
                raise ConfigError(f"invalid fold count {name}={k!r}; must be an integer >= 2")
        if self.selection_metric not in SELECTION_METRICS:
            raise ConfigError(f"unknown selection metric {self.selection_metric!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"unknown aggregation {self.aggregation!r}")
        if (self.data_path is None) == (self.synthetic is None):
            raise ConfigError("exactly one of data.path and data.synthetic must be given")
        if self.subsample is not None and self.subsample < 2:
            raise ConfigError("data.subsample must be >= 2")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        for kind, params in self.overrides.items():
            if kind not in MODEL_KINDS:
                raise ConfigError(f"overrides for unknown model kind {kind!r}")
            if not isinstance(params, dict):
                raise ConfigError(f"overrides.{kind} must be a mapping")
            for name in params:
                if name not in allowed_params(kind):
                    raise ConfigError(f"unknown parameter overrides.{kind}.{name}")

    def resolved_data_path(self) -> Path:
        path = Path(self.data_path)
        return path if path.is_absolute() else self.base_dir / path

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {}
        if self.data_path is not None:
            data["path"] = self.data_path
        if self.synthetic is not None:
            data["synthetic"] = {"rows": self.synthetic.rows, "seed": self.synthetic.seed}
        data["columns"] = self.columns.as_dict()
        if self.subsample is not None:
            data["subsample"] = self.subsample
        return {
            "data": data,
            "models": list(self.models),
            "targets": list(self.targets),
            "cv": {
                "outer": self.k_outer,
                "inner": self.k_inner,
                "selection_metric": self.selection_metric,
                "aggregation": self.aggregation,
            },
            "seed": self.seed,
            "repeats": self.repeats,
            "overrides": {k: {p: _plain(v) for p, v in params.items()} for k, params in self.overrides.items()},
            "output": self.output,
        }

    def config_hash(self) -> str:
        """SHA-256 over the canonical JSON form, ignoring the output directory."""
        body = self.to_dict()
        body.pop("output")
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, list):
        return [_plain(v) for v in value]
    return value


_TOP_KEYS = {"data", "models", "targets", "cv", "seed", "repeats", "overrides", "output"}
_DATA_KEYS = {"path", "columns", "synthetic", "subsample"}
_CV_KEYS = {"outer", "inner", "selection_metric", "aggregation"}


def _reject_unknown(section: str, mapping: dict, allowed: set) -> None:
    extra = sorted(set(mapping) - allowed)
    if extra:
        prefix = f"{section}." if section else ""
        raise ConfigError("unknown config key(s): " + ", ".join(prefix + str(k) for k in extra))


def _mapping(value, name: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{name} must be a mapping")
    return value


def _str_list(value, name: str) -> tuple[str, ...]:
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ConfigError(f"{name} must be a list of names")
    return tuple(value)


def config_from_dict(raw: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    raw = _mapping(raw, "config")
    _reject_unknown("", raw, _TOP_KEYS)
    data = _mapping(raw.get("data"), "data")
    _reject_unknown("data", data, _DATA_KEYS)
    columns = _mapping(data.get("columns"), "data.columns")
    _reject_unknown("data.columns", columns, set(ColumnMapping.__dataclass_fields__))
    cv = _mapping(raw.get("cv"), "cv")
    _reject_unknown("cv", cv, _CV_KEYS)
    synthetic = None
    if data.get("synthetic") is not None:
        syn = _mapping(data["synthetic"], "data.synthetic")
        _reject_unknown("data.synthetic", syn, {"rows", "seed"})
        synthetic = SyntheticSpec(int(syn.get("rows", 500)), int(syn.get("seed", 7)))
    overrides = {}
    for kind, params in _mapping(raw.get("overrides"), "overrides").items():
        params = _mapping(params, f"overrides.{kind}")
        overrides[str(kind)] = {str(k): (list(v) if isinstance(v, (list, tuple)) else v) for k, v in params.items()}
    if "models" not in raw or "targets" not in raw:
        raise ConfigError("config needs 'models' and 'targets'")
    try:
        mapping = ColumnMapping(**{k: str(v) for k, v in columns.items()})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(
        models=_str_list(raw["models"], "models"),
        targets=_str_list(raw["targets"], "targets"),
        data_path=None if data.get("path") is None else str(data["path"]),
        columns=mapping,
        synthetic=synthetic,
        subsample=None if data.get("subsample") is None else int(data["subsample"]),
        k_outer=cv.get("outer", 8),
        k_inner=cv.get("inner", 6),
        selection_metric=cv.get("selection_metric", "rmse"),
        aggregation=cv.get("aggregation", "per-fold-mean"),
        seed=int(raw.get("seed", 42)),
        repeats=int(raw.get("repeats", 1)),
        overrides=overrides,
        output=str(raw.get("output", "results")),
        base_dir=base_dir,
    )


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"parse error in {path}: {exc}") from exc
    return config_from_dict(raw, base_dir=path.parent)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)


def save_config(config: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(dump_config(config), encoding="utf-8")
    return path
