"""Ingestion, cleaning, fold-local scaling and synthetic data for the QoS tables.

Rows are read from comma-separated text into a :class:`Dataset` holding the
four radio inputs (MCS, distance to base station, SINR, packet size) and the
two QoS targets (throughput, PDR).  Scaling is always fitted on an explicit
set of row indices so callers can keep it inside a training split.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

FEATURE_ROLES = ("mcs", "distance", "sinr", "packet_size")
TARGET_ROLES = ("throughput", "pdr")
MISSING_TOKENS = frozenset({"", "nan", "na"})

STD_FLOOR = 1e-12


class DataError(ValueError):
    """Raised for unreadable, malformed or degenerate input tables."""


@dataclass(frozen=True)
class ColumnMapping:
    """Source column name for every feature and target role."""

    mcs: str = "mcs"
    distance: str = "distance"
    sinr: str = "sinr"
    packet_size: str = "packet_size"
    throughput: str = "throughput"
    pdr: str = "pdr"

    def __post_init__(self):
        names = self.names()
        if len(set(names)) != len(names):
            raise DataError(f"column mapping names must be distinct, got {names}")

    def names(self) -> tuple[str, ...]:
        return tuple(getattr(self, role) for role in FEATURE_ROLES + TARGET_ROLES)

    def feature_columns(self) -> tuple[str, ...]:
        return tuple(getattr(self, role) for role in FEATURE_ROLES)

    def target_columns(self) -> dict[str, str]:
        return {role: getattr(self, role) for role in TARGET_ROLES}

    def as_dict(self) -> dict[str, str]:
        return {role: getattr(self, role) for role in FEATURE_ROLES + TARGET_ROLES}


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix (n x 4) and one target vector per target name.

    ``features`` and target arrays are read-only.  All reads of row subsets go
    through :meth:`rows`, which gives instrumentation a single choke point.
    Before :func:`clean` a dataset may contain NaN as the missing marker.
    """

    features: np.ndarray
    targets: Mapping[str, np.ndarray]
    feature_names: tuple[str, ...] = FEATURE_ROLES
    source: str = "memory"
    allow_missing: bool = field(default=False, repr=False)

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64, copy=True)
        if features.ndim != 2 or features.shape[1] != len(self.feature_names):
            raise DataError(f"features must be n x {len(self.feature_names)}, got {features.shape}")
        n = features.shape[0]
        targets = {}
        for name, values in self.targets.items():
            arr = np.array(values, dtype=np.float64, copy=True).ravel()
            if arr.size != n:
                raise DataError(f"target {name!r} has {arr.size} values for {n} rows")
            arr.flags.writeable = False
            targets[name] = arr
        if not self.allow_missing:
            if n < 2:
                raise DataError(f"a dataset needs at least 2 rows, got {n}")
            if not np.all(np.isfinite(features)) or not all(np.all(np.isfinite(t)) for t in targets.values()):
                raise DataError("dataset contains missing or non-finite cells")
        features.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)

    @property
    def row_count(self) -> int:
        return self.features.shape[0]

    def __len__(self) -> int:
        return self.row_count

    def target(self, name: str) -> np.ndarray:
        try:
            return self.targets[name]
        except KeyError:
            raise KeyError(f"unknown target {name!r}; have {sorted(self.targets)}") from None

    def rows(self, indices) -> np.ndarray:
        """Feature rows at ``indices``; every row read goes through here."""
        return self.features[np.asarray(indices, dtype=np.intp)]

    def take(self, indices, target: str) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(features[indices], target[indices])`` as fresh arrays."""
        idx = np.asarray(indices, dtype=np.intp)
        return self.rows(idx), self.target(target)[idx]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(
            self.features[idx],
            {k: v[idx] for k, v in self.targets.items()},
            self.feature_names,
            self.source,
        )

    def to_rows(self) -> np.ndarray:
        """Features and targets side by side, targets in sorted-name order."""
        cols = [self.features] + [self.targets[k][:, None] for k in sorted(self.targets)]
        return np.hstack(cols)


def _parse_cell(text: str) -> float:
    token = text.strip()
    if token.lower() in MISSING_TOKENS:
        return math.nan
    try:
        value = float(token)
    except ValueError:
        return math.nan
    return value if math.isfinite(value) else math.nan


def load_table(path, mapping: ColumnMapping | None = None) -> Dataset:
    """Read a comma-separated table with a header line.

    Non-numeric, empty and NaN/NA cells become NaN and are left for
    :func:`clean` to drop.
    """
    mapping = mapping or ColumnMapping()
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        positions = {}
        for role, name in mapping.as_dict().items():
            if name not in header:
                raise DataError(f"missing column {name!r} (role {role}) in {path}")
            positions[role] = header.index(name)
        rows = []
        for record in reader:
            if not record or all(not cell.strip() for cell in record):
                continue
            cells = [record[positions[r]] if positions[r] < len(record) else "" for r in FEATURE_ROLES + TARGET_ROLES]
            rows.append([_parse_cell(c) for c in cells])
    if not rows:
        raise DataError(f"{path} has no data rows")
    table = np.array(rows, dtype=np.float64)
    nf = len(FEATURE_ROLES)
    return Dataset(
        table[:, :nf],
        {role: table[:, nf + i] for i, role in enumerate(TARGET_ROLES)},
        source=str(path),
        allow_missing=True,
    )


def write_table(dataset: Dataset, path, mapping: ColumnMapping | None = None) -> Path:
    """Write ``dataset`` in the format :func:`load_table` reads.

    Values are written with ``repr`` so they round-trip bit-exactly.
    """
    mapping = mapping or ColumnMapping()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    target_names = [t for t in TARGET_ROLES if t in dataset.targets]
    header = list(mapping.feature_columns()) + [mapping.target_columns()[t] for t in target_names]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        targets = [dataset.targets[t] for t in target_names]
        for i in range(dataset.row_count):
            row = [repr(float(v)) for v in dataset.features[i]] + [repr(float(t[i])) for t in targets]
            writer.writerow(row)
    return path


def clean(dataset: Dataset) -> Dataset:
    """Drop rows with any missing cell, then exact duplicates (first kept).

    Duplicates compare every feature and target cell.  Relative row order is
    preserved.
    """
    rows = dataset.to_rows()
    complete = np.all(np.isfinite(rows), axis=1)
    kept = np.flatnonzero(complete)
    seen = set()
    unique = []
    for i in kept:
        key = rows[i].tobytes()
        if key in seen:
            continue
        seen.add(key)
        unique.append(i)
    if len(unique) < 2:
        raise DataError(f"only {len(unique)} rows left after cleaning")
    idx = np.asarray(unique, dtype=np.intp)
    return Dataset(
        dataset.features[idx],
        {k: v[idx] for k, v in dataset.targets.items()},
        dataset.feature_names,
        dataset.source,
    )


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    fitted_on: int

    def transform(self, features) -> np.ndarray:
        return apply_scaler(self, features)

    def inverse_transform(self, scaled) -> np.ndarray:
        scaled = np.asarray(scaled, dtype=np.float64)
        return scaled * np.maximum(self.std, STD_FLOOR) + self.mean


def fit_scaler_arrays(features) -> Scaler:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ValueError("cannot fit a scaler on an empty row set")
    return Scaler(
        mean=features.mean(axis=0),
        std=features.std(axis=0),
        fitted_on=features.shape[0],
    )


def fit_scaler(dataset: Dataset, row_indices: Sequence[int]) -> Scaler:
    """Per-feature mean and population std over ``row_indices`` only."""
    idx = np.asarray(row_indices, dtype=np.intp)
    if idx.size == 0:
        raise ValueError("cannot fit a scaler on an empty index list")
    if idx.min() < 0 or idx.max() >= dataset.row_count:
        raise IndexError("row index out of range")
    return fit_scaler_arrays(dataset.rows(idx))


def apply_scaler(scaler: Scaler, features) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != scaler.mean.size:
        raise ValueError(f"expected {scaler.mean.size} feature columns, got shape {features.shape}")
    return (features - scaler.mean) / np.maximum(scaler.std, STD_FLOOR)


def generate_synthetic(n: int, seed: int) -> Dataset:
    """Deterministic stand-in for the simulator export.

    Inputs are drawn from plausible NR-V2X ranges.  Throughput (Mbit/s) follows
    a smooth link-adaptation curve: MCS sets the peak spectral efficiency, a
    logistic in (SINR - MCS threshold) gates it, and packet size scales the
    offered load.  PDR (percent) decays with the same SINR margin and with
    distance.  A small seeded noise term keeps the problem non-trivial.
    """
    if n < 2:
        raise DataError(f"synthetic dataset needs n >= 2, got {n}")
    rng = np.random.default_rng(seed)
    mcs = rng.integers(0, 29, size=n).astype(np.float64)
    distance = rng.uniform(10.0, 2000.0, size=n)
    path_term = 48.0 * np.log10(distance / 10.0) / np.log10(200.0)
    sinr = np.clip(38.0 - path_term + rng.normal(0.0, 4.0, size=n), -10.0, 40.0)
    packet_size = rng.uniform(100.0, 1500.0, size=n)

    threshold = -6.0 + 0.6 * mcs
    margin = sinr - threshold
    efficiency = 0.3 + 5.2 * mcs / 28.0
    gate = 1.0 / (1.0 + np.exp(-margin / 6.0))
    load = 0.4 + 0.6 * packet_size / 1500.0
    throughput = 1.8 * efficiency * gate * load
    throughput = throughput + rng.normal(0.0, 0.1 * throughput.std(), size=n)

    pdr = 100.0 * (1.0 / (1.0 + np.exp(-(margin + 4.0) / 3.0))) * np.exp(-distance / 6000.0)
    pdr = np.clip(pdr + rng.normal(0.0, 2.0, size=n), 0.0, 100.0)

    features = np.column_stack([mcs, distance, sinr, packet_size])
    return Dataset(features, {"throughput": throughput, "pdr": pdr}, source=f"synthetic(n={n}, seed={seed})")
