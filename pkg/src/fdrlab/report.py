"""Report assembly and matplotlib figures written next to the CSV output."""
from __future__ import annotations

import json
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evalharness import METRIC_LABELS, METRICS, CvResult  # noqa: E402

REPORT_FORMAT = "fdrlab-report"
REPORT_VERSION = 1

MODEL_LABELS = {"ols": "Linear Least Squares", "knn": "k-NN", "svr": "SVR w/ RBF kernel"}
MODEL_COLORS = {"ols": "#7f7f7f", "knn": "#1f77b4", "svr": "#d62728"}

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 150,
}


def _clean(x):
    if isinstance(x, float) and math.isnan(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        return _clean(x.item())
    return x


def table1_entries(results: Dict[str, CvResult]) -> List[dict]:
    rows = []
    for kind, r in results.items():
        row = {"model": kind}
        row.update({METRIC_LABELS[m]: r.mean(m) for m in METRICS})
        row["std"] = {METRIC_LABELS[m]: r.std(m) for m in METRICS}
        rows.append(row)
    return rows


def build_report(**sections) -> dict:
    doc = {"format": REPORT_FORMAT, "version": REPORT_VERSION}
    doc.update(sections)
    return _clean(doc)


@lru_cache(maxsize=None)
def report_schema() -> dict:
    return json.loads(resources.files("fdrlab").joinpath("data/report.schema.json").read_text())


def write_report(report: dict, path) -> None:
    import jsonschema

    jsonschema.validate(report, report_schema())
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def _save(fig, path: Path) -> None:
    fig.savefig(path, metadata={"Software": None}, bbox_inches="tight")
    plt.close(fig)


def plot_learning_curves(curves: Dict[str, List[CvResult]], path, metrics=("r2", "mae"),
                         score_floor: float = -1.0) -> Path:
    """Mean +/- one sigma of each metric against the training size.

    Scores (EV, R2) of badly underdetermined fits can reach large negative
    values; their axis is cut at ``score_floor`` so the useful range stays
    readable. Error bands never extend below zero.
    """
    path = Path(path)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, len(metrics), figsize=(3.3 * len(metrics), 2.6))
        for ax, metric in zip(np.atleast_1d(axes), metrics):
            for kind, results in curves.items():
                x = np.array([r.training_size for r in results]) * 100
                mu = np.array([r.mean(metric) for r in results])
                sd = np.array([r.std(metric) for r in results])
                c = MODEL_COLORS.get(kind)
                ax.plot(x, mu, "o-", ms=3, color=c, label=MODEL_LABELS.get(kind, kind))
                lo = mu - sd if metric in ("ev", "r2") else np.maximum(mu - sd, 0.0)
                ax.fill_between(x, lo, mu + sd, color=c, alpha=0.15, lw=0)
            if metric in ("ev", "r2"):
                bottom, top = ax.get_ylim()
                if bottom < score_floor:
                    ax.set_ylim(score_floor, max(1.0, min(top, 1.05)))
                    ax.text(0.02, 0.02, f"axis cut at {score_floor:g}", transform=ax.transAxes,
                            fontsize="x-small", color="0.4")
            ax.set_xlabel("training size [%]")
            ax.set_ylabel(METRIC_LABELS[metric])
            ax.grid(alpha=0.3)
        np.atleast_1d(axes)[0].legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)
    return path


def plot_fold_estimates(results: Dict[str, CvResult], y: np.ndarray, path, fold: int = 0) -> Path:
    """Measured vs. estimated FDR on one test fold, flip-flops sorted by
    measured FDR."""
    path = Path(path)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(len(results), 1, figsize=(5.0, 1.9 * len(results)), sharex=True)
        for ax, (kind, r) in zip(np.atleast_1d(axes), results.items()):
            idx = np.flatnonzero(r.fold_of == fold)
            idx = idx[np.argsort(y[idx], kind="stable")]
            pos = np.arange(len(idx))
            ax.plot(pos, y[idx], "s", ms=3.5, mfc="none", color="k", label="fault injection")
            ax.plot(pos, r.predictions[idx], "o", ms=3, color=MODEL_COLORS.get(kind), label="estimate")
            ax.set_ylabel("FDR")
            ax.set_title(MODEL_LABELS.get(kind, kind), loc="left")
            ax.grid(alpha=0.3)
        np.atleast_1d(axes)[0].legend(frameon=False, ncol=2, loc="upper left")
        np.atleast_1d(axes)[-1].set_xlabel("flip-flop (test fold, sorted by measured FDR)")
        fig.tight_layout()
        _save(fig, path)
    return path


def plot_fdr_histogram(fdr: np.ndarray, path, bins: int = 20) -> Path:
    path = Path(path)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.3, 2.4))
        ax.hist(fdr, bins=bins, range=(0, 1), color="#4c72b0", edgecolor="white")
        ax.set_xlabel("measured FDR")
        ax.set_ylabel("flip-flops")
        fig.tight_layout()
        _save(fig, path)
    return path


def format_table1(results: Dict[str, CvResult], title: Optional[str] = None) -> str:
    """Plain-text rendering of the model comparison table."""
    head = f"{'Model':<22}" + "".join(f"{METRIC_LABELS[m]:>9}" for m in METRICS)
    lines = [title] if title else []
    lines += [head, "-" * len(head)]
    for kind, r in results.items():
        lines.append(f"{MODEL_LABELS.get(kind, kind):<22}" + "".join(f"{r.mean(m):9.3f}" for m in METRICS))
    return "\n".join(lines)
