"""Static bar charts of a report: MAE and RMSE per target, plus one R² chart."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from .runner import ReportDocument, round3  # noqa: E402

TARGET_LABELS = {"throughput": "throughput", "pdr": "PDR"}
METRIC_LABELS = {"mae": "MAE", "rmse": "RMSE", "r2": "R²"}


def _values(report: ReportDocument, metric: str, target: str) -> list[float]:
    out = []
    for model in report.models:
        p = report.pair(model, target)
        out.append(p.value(metric) if p.ok else float("nan"))
    return out


def _bar_chart(models, values, title, ylabel) -> Figure:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    bars = ax.bar(models, values, color="#4c72b0")
    ax.bar_label(bars, labels=[round3(v) if v == v else "n/a" for v in values], padding=2, fontsize=8)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    ax.margins(y=0.15)
    fig.tight_layout()
    return fig


def _grouped_chart(models, series: dict[str, list[float]], title) -> Figure:
    fig, ax = plt.subplots(figsize=(7.2, 4.0))
    width = 0.8 / max(1, len(series))
    xs = range(len(models))
    for k, (target, values) in enumerate(series.items()):
        offset = (k - (len(series) - 1) / 2) * width
        bars = ax.bar([x + offset for x in xs], values, width, label=TARGET_LABELS.get(target, target))
        ax.bar_label(bars, labels=[round3(v) if v == v else "n/a" for v in values], padding=2, fontsize=7)
    ax.set_xticks(list(xs), models)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_title(title)
    ax.set_ylabel(METRIC_LABELS["r2"])
    ax.legend()
    ax.margins(y=0.15)
    fig.tight_layout()
    return fig


def chart_figures(report: ReportDocument) -> dict[str, Figure]:
    """Figures keyed by output file stem, bars in configured model order."""
    if not report.pairs:
        raise ValueError("cannot chart an empty report")
    models = report.models
    figures = {}
    for metric in ("mae", "rmse"):
        for target in report.targets:
            label = TARGET_LABELS.get(target, target)
            figures[f"{metric}_{target}"] = _bar_chart(
                models, _values(report, metric, target), f"{METRIC_LABELS[metric]} results for {label} predictions", METRIC_LABELS[metric]
            )
    figures["r2"] = _grouped_chart(models, {t: _values(report, "r2", t) for t in report.targets}, "R² scores for the predictions")
    return figures


def emit_charts(report: ReportDocument, directory) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for stem, fig in chart_figures(report).items():
        path = out / f"{stem}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
