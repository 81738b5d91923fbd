"""Figure rendering. Every figure is saved as SVG next to a CSV holding
exactly the plotted values, so plots stay diffable and auditable.

SVG output is made byte-deterministic by pinning the hash salt and
stripping the creation date, which keeps artifact digests replayable.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "lucidtab"

import matplotlib.pyplot as plt
import numpy as np

from .errors import StageError
from .metrics import ConfusionMatrix, RocCurve

_SAVE_OPTS = {"format": "svg", "metadata": {"Date": None}, "bbox_inches": "tight"}


class IoError(StageError):
    pass


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _save(fig, svg_path: str | Path) -> None:
    svg_path = Path(svg_path)
    try:
        svg_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(svg_path, **_SAVE_OPTS)
    except OSError as exc:
        raise IoError(f"cannot write {svg_path}: {exc}") from exc
    finally:
        plt.close(fig)


def histogram_grid(X: np.ndarray, names: list[str], svg_path, csv_path, bins: int = 20) -> None:
    """One histogram panel per feature."""
    n = len(names)
    cols = 5
    rows_n = -(-n // cols)
    fig, axes = plt.subplots(rows_n, cols, figsize=(3.0 * cols, 2.2 * rows_n))
    csv_rows = []
    for j, name in enumerate(names):
        ax = axes.flat[j]
        counts, edges, _ = ax.hist(X[:, j], bins=bins, color="#3B5BA5")
        ax.set_title(name, fontsize=7)
        ax.tick_params(labelsize=6)
        for b in range(len(counts)):
            csv_rows.append([name, repr(float(edges[b])), repr(float(edges[b + 1])), int(counts[b])])
    for k in range(n, rows_n * cols):
        axes.flat[k].axis("off")
    fig.tight_layout()
    _save(fig, svg_path)
    write_csv(csv_path, ["feature", "bin_left", "bin_right", "count"], csv_rows)


def feature_boxplot(X: np.ndarray, names: list[str], svg_path, csv_path) -> None:
    """Five-number-summary boxplot (whiskers at min/max, so the CSV is the
    complete description of what is drawn)."""
    stats = []
    csv_rows = []
    for j, name in enumerate(names):
        col = X[:, j]
        q1, med, q3 = (float(np.percentile(col, q)) for q in (25, 50, 75))
        lo, hi = float(col.min()), float(col.max())
        stats.append({"label": name, "med": med, "q1": q1, "q3": q3, "whislo": lo, "whishi": hi, "fliers": []})
        csv_rows.append([name, repr(lo), repr(q1), repr(med), repr(q3), repr(hi)])
    fig, ax = plt.subplots(figsize=(max(8.0, 0.35 * len(names)), 4.5))
    ax.bxp(stats, showfliers=False)
    ax.tick_params(axis="x", rotation=90, labelsize=6)
    ax.set_ylabel("standardized value")
    fig.tight_layout()
    _save(fig, svg_path)
    write_csv(csv_path, ["feature", "min", "q1", "median", "q3", "max"], csv_rows)


def rfe_heatmap(names: list[str], ranks: list[int], svg_path, csv_path) -> None:
    """Single-row heatmap of elimination ranks; rank 1 = kept."""
    arr = np.array(ranks, dtype=float)[None, :]
    fig, ax = plt.subplots(figsize=(max(8.0, 0.35 * len(names)), 1.8))
    im = ax.imshow(arr, aspect="auto", cmap="Blues_r")
    ax.set_yticks([])
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=90, fontsize=6)
    for j, rank in enumerate(ranks):
        ax.text(j, 0, str(rank), ha="center", va="center", fontsize=6)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    _save(fig, svg_path)
    write_csv(csv_path, ["feature", "rank"], [[n, r] for n, r in zip(names, ranks)])


def confusion_heatmap(cm: ConfusionMatrix, svg_path, csv_path) -> None:
    grid = np.array([[cm.tn, cm.fp], [cm.fn, cm.tp]], dtype=float)
    fig, ax = plt.subplots(figsize=(3.6, 3.2))
    ax.imshow(grid, cmap="Blues")
    for (i, j), val in np.ndenumerate(grid):
        ax.text(j, i, str(int(val)), ha="center", va="center",
                color="white" if val > grid.max() / 2 else "black")
    ax.set_xticks([0, 1], labels=["pred 0", "pred 1"])
    ax.set_yticks([0, 1], labels=["true 0", "true 1"])
    ax.set_title("Confusion matrix")
    fig.tight_layout()
    _save(fig, svg_path)
    write_csv(
        csv_path,
        ["", "pred_0", "pred_1"],
        [["true_0", cm.tn, cm.fp], ["true_1", cm.fn, cm.tp]],
    )


def roc_plot(curve: RocCurve, svg_path, csv_path) -> None:
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    ax.plot(curve.fpr, curve.tpr, color="#3B5BA5", label=f"classifier (AUC = {curve.auc:.2f})")
    ax.plot([0, 1], [0, 1], "--", color="gray", label="random (AUC = 0.50)")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    _save(fig, svg_path)
    rows = [
        [repr(float(f)), repr(float(t)), repr(float(th))]
        for f, t, th in zip(curve.fpr, curve.tpr, curve.thresholds)
    ]
    write_csv(csv_path, ["fpr", "tpr", "threshold"], rows)


def shap_bar(names: list[str], mean_abs: list[float], svg_path, csv_path, top: int = 20) -> None:
    """Horizontal bars of mean |contribution| per feature, largest first."""
    order = np.argsort(-np.asarray(mean_abs), kind="stable")
    shown = order[:top][::-1]
    fig, ax = plt.subplots(figsize=(5.0, 0.3 * len(shown) + 1.2))
    ax.barh([names[j] for j in shown], [mean_abs[j] for j in shown], color="#E45756")
    ax.set_xlabel("mean |contribution| (probability scale)")
    ax.tick_params(labelsize=7)
    fig.tight_layout()
    _save(fig, svg_path)
    write_csv(
        csv_path,
        ["feature", "mean_abs_contribution"],
        [[names[j], repr(float(mean_abs[j]))] for j in order],
    )


def lime_bar(names: list[str], contributions: list[float], predicted: float, svg_path, csv_path) -> None:
    """Signed contribution bars for a single instance."""
    order = np.argsort(np.abs(np.asarray(contributions)), kind="stable")[::-1]
    nonzero = [j for j in order if contributions[j] != 0.0]
    shown = nonzero[::-1]
    colors = ["#E45756" if contributions[j] > 0 else "#3B5BA5" for j in shown]
    fig, ax = plt.subplots(figsize=(5.0, 0.3 * max(len(shown), 1) + 1.2))
    ax.barh([names[j] for j in shown], [contributions[j] for j in shown], color=colors)
    ax.axvline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel(f"local contribution (prediction = {predicted:.3f})")
    ax.tick_params(labelsize=7)
    fig.tight_layout()
    _save(fig, svg_path)
    write_csv(
        csv_path,
        ["feature", "contribution"],
        [[names[j], repr(float(contributions[j]))] for j in order],
    )


def lime_text_report(names, contributions, predicted, fidelity, instance_id) -> str:
    """Plain-text per-instance report with signed contribution lines."""
    lines = [
        f"Instance {instance_id}: predicted probability of class 1 = {predicted:.4f}",
        f"Local surrogate fidelity (weighted R^2) = {fidelity:.4f}",
        "Top signed contributions:",
    ]
    order = np.argsort(-np.abs(np.asarray(contributions)), kind="stable")
    for j in order:
        if contributions[j] == 0.0:
            continue
        lines.append(f"  {names[j]} (contribution: {contributions[j]:+.4f})")
    return "\n".join(lines) + "\n"
