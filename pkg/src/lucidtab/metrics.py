"""Threshold classification metrics, confusion matrix, ROC/AUC, and the
per-class classification report.

Conventions: positive class is 1 (malignant); degenerate denominators give
0.0 with a flag rather than an error, because hyperparameter search can
produce candidates that never predict one of the classes. Rendered report
values round half-up to two decimals; full precision stays on the objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import DataError
from .rng import derived_rng


class LengthMismatch(DataError):
    pass


class SingleClass(DataError):
    pass


def round_half_up(x: float, places: int = 2) -> float:
    """Decimal rounding with ties away from zero, matching report tables."""
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    tp: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tn + self.tp + self.fp + self.fn


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    degenerate: bool = False


@dataclass(frozen=True)
class ClassificationReport:
    per_class: dict[int, ClassMetrics]
    macro: ClassMetrics
    weighted: ClassMetrics
    accuracy: float


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def _check_binary(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(f"lengths differ: {y_true.shape} vs {y_pred.shape}")
    for arr, name in ((y_true, "y_true"), (y_pred, "y_pred")):
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise DataError(f"{name} must contain only 0/1 entries")
    return y_true.astype(np.int64), y_pred.astype(np.int64)


def confusion(y_true, y_pred) -> ConfusionMatrix:
    y_true, y_pred = _check_binary(y_true, y_pred)
    return ConfusionMatrix(
        tn=int(np.sum((y_true == 0) & (y_pred == 0))),
        tp=int(np.sum((y_true == 1) & (y_pred == 1))),
        fp=int(np.sum((y_true == 0) & (y_pred == 1))),
        fn=int(np.sum((y_true == 1) & (y_pred == 0))),
    )


def precision_recall_f1_accuracy(cm: ConfusionMatrix) -> tuple[float, float, float, float]:
    """(precision, recall, f1, accuracy); zero denominators yield 0.0."""
    precision = cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    accuracy = (cm.tp + cm.tn) / cm.total if cm.total else 0.0
    return precision, recall, f1, accuracy


def accuracy_score(y_true, y_pred) -> float:
    y_true, y_pred = _check_binary(y_true, y_pred)
    if y_true.size == 0:
        return 0.0
    return float(np.mean(y_true == y_pred))


def roc_curve(y_true, scores) -> RocCurve:
    """ROC points swept over unique score thresholds (descending); tied
    scores collapse into one step. AUC by trapezoidal integration."""
    y_true = np.asarray(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    if y_true.shape != scores.shape:
        raise LengthMismatch(f"lengths differ: {y_true.shape} vs {scores.shape}")
    if not np.isfinite(scores).all():
        raise DataError("scores must be finite")
    pos = int(np.sum(y_true == 1))
    neg = int(np.sum(y_true == 0))
    if pos == 0 or neg == 0:
        raise SingleClass("roc_curve needs both classes present")
    order = np.argsort(-scores, kind="stable")
    y_sorted = y_true[order]
    s_sorted = scores[order]
    # indices where a threshold group ends (last occurrence of each score)
    distinct = np.flatnonzero(np.diff(s_sorted))
    ends = np.r_[distinct, y_sorted.size - 1]
    tp_cum = np.cumsum(y_sorted == 1)[ends]
    fp_cum = np.cumsum(y_sorted == 0)[ends]
    tpr = np.r_[0.0, tp_cum / pos]
    fpr = np.r_[0.0, fp_cum / neg]
    thresholds = np.r_[np.inf, s_sorted[ends]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1])) / 2.0)  # trapezoid rule
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)


def _one_class(y_true: np.ndarray, y_pred: np.ndarray, positive: int) -> ClassMetrics:
    t = (y_true == positive).astype(np.int64)
    p = (y_pred == positive).astype(np.int64)
    cm = confusion(t, p)
    precision, recall, f1, _ = precision_recall_f1_accuracy(cm)
    degenerate = (cm.tp + cm.fp) == 0 or (cm.tp + cm.fn) == 0
    return ClassMetrics(precision, recall, f1, support=int(t.sum()), degenerate=degenerate)


def classification_report(y_true, y_pred) -> ClassificationReport:
    """Per-class precision/recall/F1/support with macro and weighted rows.

    Class 0's row treats 0 as the positive label. Macro is the unweighted
    mean; weighted is the support-weighted mean.
    """
    y_true, y_pred = _check_binary(y_true, y_pred)
    per_class = {c: _one_class(y_true, y_pred, c) for c in (0, 1)}
    n = y_true.size
    supports = {c: per_class[c].support for c in (0, 1)}
    macro = ClassMetrics(
        precision=float(np.mean([per_class[c].precision for c in (0, 1)])),
        recall=float(np.mean([per_class[c].recall for c in (0, 1)])),
        f1=float(np.mean([per_class[c].f1 for c in (0, 1)])),
        support=n,
    )
    if n:
        weighted = ClassMetrics(
            precision=sum(per_class[c].precision * supports[c] for c in (0, 1)) / n,
            recall=sum(per_class[c].recall * supports[c] for c in (0, 1)) / n,
            f1=sum(per_class[c].f1 * supports[c] for c in (0, 1)) / n,
            support=n,
        )
        accuracy = float(np.mean(y_true == y_pred))
    else:
        weighted = ClassMetrics(0.0, 0.0, 0.0, 0)
        accuracy = 0.0
    return ClassificationReport(per_class=per_class, macro=macro, weighted=weighted, accuracy=accuracy)


def render_report(report: ClassificationReport) -> str:
    """Aligned plain-text table with two-decimal half-up rounding."""
    rows = [("", "Precision", "Recall", "F1-Score", "Support")]

    def fmt(m: ClassMetrics, label: str) -> tuple[str, ...]:
        return (
            label,
            f"{round_half_up(m.precision):.2f}",
            f"{round_half_up(m.recall):.2f}",
            f"{round_half_up(m.f1):.2f}",
            str(m.support),
        )

    rows.append(fmt(report.per_class[0], "0"))
    rows.append(fmt(report.per_class[1], "1"))
    rows.append(fmt(report.macro, "Macro Average"))
    rows.append(fmt(report.weighted, "Weighted Average"))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = []
    for r in rows:
        lines.append("  ".join(cell.rjust(w) if i else cell.ljust(w) for i, (cell, w) in enumerate(zip(r, widths))))
    return "\n".join(lines)


def permutation_score_drop(
    model,
    X: np.ndarray,
    y: np.ndarray,
    metric,
    repeats: int = 5,
    seed: int = 0,
) -> np.ndarray:
    """Baseline metric minus the metric after shuffling one column, averaged
    over `repeats` seeded shuffles; one value per feature.

    `model` is a callable mapping a feature matrix to probability scores;
    `metric` maps (y_true, scores) to a scalar where higher is better.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] != y.shape[0]:
        raise LengthMismatch("X and y row counts differ")
    baseline = metric(y, model(X))
    drops = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        acc = 0.0
        for r in range(repeats):
            rng = derived_rng(seed, "permute", j, r)
            shuffled = X.copy()
            shuffled[:, j] = shuffled[rng.permutation(X.shape[0]), j]
            acc += baseline - metric(y, model(shuffled))
        drops[j] = acc / repeats
    return drops


def accuracy_metric(y_true: np.ndarray, scores: np.ndarray, threshold: float = 0.5) -> float:
    """Thresholded accuracy for use as a permutation-importance metric."""
    return accuracy_score(y_true, (np.asarray(scores) >= threshold).astype(np.int64))
