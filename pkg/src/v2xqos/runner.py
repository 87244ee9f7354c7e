"""Config-driven experiment execution and report files.

One nested-CV run per configured (model, target) pair, optionally repeated
with derived seeds.  Every (pair, repeat, outer fold) is an independent work
unit; units may run in worker processes, and results are reduced in a fixed
order so the metric section of the report does not depend on ``jobs``.
"""

from __future__ import annotations

import csv
import json
import logging
import platform
import time
import traceback
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .dataset import Dataset, clean, generate_synthetic, load_table
from .grid import ParamPoint
from .metrics import METRIC_NAMES, MetricsTriple
from .models import SCALED_KINDS, build_grid
from .seeding import derive_seed
from .validation import NestedCvResult, OuterFold, aggregate, kfold_split, run_outer_fold

log = logging.getLogger(__name__)

SCHEMA = "v2xqos.report/1"
SUMMARY_FILE = "summary.csv"
TABLE_FILE = "table.csv"
DETAIL_FILE = "detail.json"

DECISIONS = {
    "scaling": "z-score fitted on training rows only, for ann and svr",
    "fold_shuffle": "seeded permutation before folding",
    "selection": "lowest mean inner-fold score; earliest grid point wins ties",
    "cleaning": "drop rows with missing cells, then exact duplicate rows",
    "r2_baseline": "mean of the evaluated rows",
    "cbr": "gradient boosting with oblivious trees (no ordered boosting)",
    "ann_optimizer": "full-batch Adam, step 1e-3, best-training-loss snapshot",
    "svr_gamma": "1 / (d * variance of scaled training features)",
    "lgbm_min_child_samples": 20,
    "cbr_max_bin": 255,
}


def round3(value: float) -> str:
    """Three decimals, half-even on the shortest decimal form of ``value``."""
    return str(Decimal(repr(float(value))).quantize(Decimal("0.001"), rounding=ROUND_HALF_EVEN))


@dataclass
class PairReport:
    model: str
    target: str
    status: str  # "ok" | "failed"
    runs: list[NestedCvResult] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    grid_size: int = 0
    seconds: float = 0.0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def value(self, metric: str) -> float:
        """Headline number: aggregate over outer folds, averaged over repeats."""
        return float(np.mean([r.mean[metric] for r in self.runs]))

    def repeat_std(self, metric: str) -> float:
        return float(np.std([r.mean[metric] for r in self.runs]))

    def params_histogram(self) -> list[tuple[ParamPoint, int]]:
        counts = Counter(json.dumps(f.params, sort_keys=True) for r in self.runs for f in r.folds)
        return [(json.loads(k), n) for k, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]


@dataclass
class ReportDocument:
    pairs: list[PairReport]
    config: dict
    environment: dict

    def pair(self, model: str, target: str) -> PairReport:
        for p in self.pairs:
            if p.model == model and p.target == target:
                return p
        raise KeyError((model, target))

    @property
    def models(self) -> list[str]:
        return list(dict.fromkeys(p.model for p in self.pairs))

    @property
    def targets(self) -> list[str]:
        return list(dict.fromkeys(p.target for p in self.pairs))

    @property
    def failed(self) -> list[PairReport]:
        return [p for p in self.pairs if not p.ok]

    def results_section(self) -> list[dict]:
        return [_pair_to_dict(p) for p in self.pairs]

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "environment": self.environment,
            "config": self.config,
            "results": self.results_section(),
            "timing": {f"{p.model}/{p.target}": p.seconds for p in self.pairs},
        }


def _fold_to_dict(fold: OuterFold) -> dict:
    return {
        "index": fold.index,
        "params": fold.params,
        "inner_score": fold.inner_score,
        "inner_scores": list(fold.inner_scores),
        "metrics": fold.metrics.as_dict(),
        "test_indices": fold.test_indices.tolist(),
        "predictions": fold.predictions.tolist(),
    }


def _pair_to_dict(p: PairReport) -> dict:
    out: dict[str, Any] = {"model": p.model, "target": p.target, "status": p.status, "grid_size": p.grid_size}
    if not p.ok:
        out["error"] = p.error
        return out
    out["value"] = {m: p.value(m) for m in METRIC_NAMES}
    out["repeat_std"] = {m: p.repeat_std(m) for m in METRIC_NAMES}
    out["selected_params"] = [{"params": params, "count": n} for params, n in p.params_histogram()]
    out["runs"] = [
        {
            "seed": seed,
            "aggregation": run.aggregation,
            "selection_metric": run.selection_metric,
            "k_outer": run.k_outer,
            "k_inner": run.k_inner,
            "mean": run.mean,
            "std": run.std,
            "folds": [_fold_to_dict(f) for f in run.folds],
        }
        for seed, run in zip(p.seeds, p.runs)
    ]
    return out


def _pair_from_dict(d: dict, seconds: float) -> PairReport:
    if d["status"] != "ok":
        return PairReport(d["model"], d["target"], d["status"], grid_size=d.get("grid_size", 0), seconds=seconds, error=d.get("error"))
    runs, seeds = [], []
    for r in d["runs"]:
        folds = tuple(
            OuterFold(
                f["index"], f["params"], f["inner_score"], MetricsTriple(**f["metrics"]),
                np.asarray(f["test_indices"], dtype=np.intp), np.asarray(f["predictions"], dtype=np.float64),
                tuple(f.get("inner_scores", ())),
            )
            for f in r["folds"]
        )
        runs.append(NestedCvResult(d["model"], d["target"], folds, r["aggregation"], r["selection_metric"], r["seed"], r["k_inner"], r["mean"], r["std"]))
        seeds.append(r["seed"])
    return PairReport(d["model"], d["target"], "ok", runs, seeds, d.get("grid_size", 0), seconds)


def report_from_dict(doc: dict) -> ReportDocument:
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"not a {SCHEMA} document")
    timing = doc.get("timing", {})
    pairs = [_pair_from_dict(d, timing.get(f"{d['model']}/{d['target']}", 0.0)) for d in doc["results"]]
    return ReportDocument(pairs, doc.get("config", {}), doc.get("environment", {}))


def load_report(path) -> ReportDocument:
    with Path(path).open(encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


def load_dataset(config: ExperimentConfig) -> Dataset:
    if config.synthetic is not None:
        data = generate_synthetic(config.synthetic.rows, config.synthetic.seed)
    else:
        data = clean(load_table(config.resolved_data_path(), config.columns))
    if config.subsample is not None and config.subsample < data.row_count:
        rng = np.random.default_rng(derive_seed(config.seed, 0xD5))
        data = data.subset(np.sort(rng.choice(data.row_count, size=config.subsample, replace=False)))
    return data


def _run_unit(args):
    """Worker entry: one outer fold, errors returned rather than raised."""
    t0 = time.perf_counter()
    try:
        fold = run_outer_fold(*args)
        return fold, None, time.perf_counter() - t0
    except Exception as exc:  # reported per pair, not fatal for the run
        return None, "".join(traceback.format_exception_only(type(exc), exc)).strip(), time.perf_counter() - t0


def repeat_seeds(seed: int, repeats: int) -> list[int]:
    return [seed] + [derive_seed(seed, 0x5EED, r) for r in range(1, repeats)]


def run_experiment(config: ExperimentConfig, jobs: int = 1, dataset: Optional[Dataset] = None) -> ReportDocument:
    """Nested CV for every configured (model, target) pair.

    A pair whose any fold fails is kept in the report with status ``failed``
    and the error text; other pairs are unaffected.
    """
    data = dataset if dataset is not None else load_dataset(config)
    n = data.row_count
    units, owners = [], []
    pairs: list[PairReport] = []
    seeds = repeat_seeds(config.seed, config.repeats)
    for kind in config.models:
        grid = build_grid(kind, config.overrides.get(kind))
        for target in config.targets:
            pair = PairReport(kind, target, "ok", seeds=list(seeds), grid_size=len(grid))
            pairs.append(pair)
            if n < config.k_outer * config.k_inner:
                pair.status, pair.error = "failed", f"{n} rows is too few for {config.k_outer} x {config.k_inner} nested folds"
                continue
            for r, seed in enumerate(seeds):
                plan = kfold_split(n, config.k_outer, seed)
                for i in range(config.k_outer):
                    units.append((data, kind, grid, plan, i, config.k_inner, target, seed, config.selection_metric))
                    owners.append((len(pairs) - 1, r))

    t0 = time.perf_counter()
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_unit, units, chunksize=1))
    else:
        outcomes = [_run_unit(u) for u in units]
    log.info("ran %d fold units in %.1fs", len(units), time.perf_counter() - t0)

    collected: dict[tuple[int, int], list[OuterFold]] = {}
    for (pi, r), (fold, error, seconds) in zip(owners, outcomes):
        pair = pairs[pi]
        pair.seconds += seconds
        if error is not None:
            if pair.ok:
                pair.status, pair.error = "failed", error
            continue
        collected.setdefault((pi, r), []).append(fold)
    for pi, pair in enumerate(pairs):
        if not pair.ok:
            pair.runs = []
            continue
        for r, seed in enumerate(seeds):
            folds = tuple(collected[(pi, r)])
            mean, std = aggregate(folds, config.aggregation, data.target(pair.target))
            pair.runs.append(NestedCvResult(pair.model, pair.target, folds, config.aggregation, config.selection_metric, seed, config.k_inner, mean, std))

    environment = {
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": config.seed,
        "repeat_seeds": seeds,
        "config_hash": config.config_hash(),
        "rows": n,
        "data_source": data.source,
        "scaled_models": sorted(SCALED_KINDS & set(config.models)),
        "decisions": DECISIONS,
    }
    return ReportDocument(pairs, config.to_dict(), environment)


def emit_report(report: ReportDocument, directory) -> list[Path]:
    """Write the summary CSV, a Table-I-shaped wide CSV and the full JSON detail.

    Summary values carry three decimals; the detail file keeps full precision.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    summary = out / SUMMARY_FILE
    with summary.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "target", "metric", "value"])
        for p in report.pairs:
            for m in METRIC_NAMES:
                w.writerow([p.model, p.target, m, round3(p.value(m)) if p.ok else "failed"])
    table = out / TABLE_FILE
    with table.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        targets = report.targets
        w.writerow(["model"] + [f"{m}_{t}" for m in METRIC_NAMES for t in targets])
        for model in report.models:
            row = [model]
            for m in METRIC_NAMES:
                for t in targets:
                    p = report.pair(model, t)
                    row.append(round3(p.value(m)) if p.ok else "failed")
            w.writerow(row)
    detail = out / DETAIL_FILE
    detail.write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return [summary, table, detail]


def metric_section_bytes(report: ReportDocument) -> bytes:
    """Canonical serialization of the results section, for reproducibility checks."""
    return json.dumps(report.results_section(), sort_keys=True).encode()
