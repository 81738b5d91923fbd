"""Column statistics and transforms: imputation, min-max scaling,
z-score standardization, and log transforms.

Statistics are fitted once on training data and then applied unchanged to
any dataset, so test rows can never leak into the fit. Standard deviation
uses the population convention (denominator N); medians of even-length
vectors average the two middle values.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import DataError

log = logging.getLogger(__name__)

STEP_KINDS = ("impute", "minmax", "zscore", "log")
IMPUTE_STRATEGIES = ("mean", "median", "mode")


class EmptyColumn(DataError):
    pass


class AllMissing(DataError):
    pass


class DegenerateRange(DataError):
    pass


class ZeroVariance(DataError):
    pass


class NonPositiveInput(DataError):
    def __init__(self, row: int, value: float):
        super().__init__(f"log transform needs x + offset > 0; row {row} has {value}")
        self.row = row


class PlanAlreadyFitted(DataError):
    pass


@dataclass(frozen=True)
class ColumnStats:
    mean: float
    std: float
    min: float
    max: float
    median: float
    mode: float

    @property
    def degenerate_range(self) -> bool:
        return self.max == self.min


@dataclass(frozen=True)
class Step:
    """One transform applied to a set of columns.

    kind: "impute" | "minmax" | "zscore" | "log"
    strategy: imputation strategy (impute only)
    offset: additive offset (log only)
    columns: None means every feature column.
    """

    kind: str
    strategy: str = "mean"
    offset: float = 1.0
    columns: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in STEP_KINDS:
            raise DataError(f"unknown step kind {self.kind!r}")
        if self.kind == "impute" and self.strategy not in IMPUTE_STRATEGIES:
            raise DataError(f"unknown imputation strategy {self.strategy!r}")


def parse_steps(text: str) -> list[Step]:
    """Parse a comma-separated step list, e.g. "impute:mean,zscore" or "log:1.0"."""
    steps = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        kind, _, arg = token.partition(":")
        if kind == "impute":
            steps.append(Step(kind="impute", strategy=arg or "mean"))
        elif kind == "log":
            steps.append(Step(kind="log", offset=float(arg) if arg else 1.0))
        elif kind in ("minmax", "zscore"):
            steps.append(Step(kind=kind))
        else:
            raise DataError(f"unknown preprocessing step {token!r}")
    return steps


def _column_stats(values: np.ndarray, name: str) -> ColumnStats:
    present = values[~np.isnan(values)]
    if present.size == 0:
        raise EmptyColumn(f"column {name!r} has no non-missing values")
    ordered = np.sort(present)
    n = ordered.size
    if n % 2:
        median = float(ordered[n // 2])
    else:
        median = float((ordered[n // 2 - 1] + ordered[n // 2]) / 2.0)
    counts = Counter(present.tolist())
    top = max(counts.values())
    mode = min(v for v, c in counts.items() if c == top)  # ties -> smallest value
    return ColumnStats(
        mean=float(present.mean()),
        std=float(present.std()),  # population: denominator N
        min=float(ordered[0]),
        max=float(ordered[-1]),
        median=median,
        mode=float(mode),
    )


@dataclass
class PreprocessPlan:
    """Fitted per-column statistics plus the ordered step list."""

    steps: list[Step]
    stats: dict[str, ColumnStats] = field(default_factory=dict)
    fitted: bool = False

    def to_rows(self) -> list[tuple[str, str, float]]:
        """Serialize as (column, statistic, value) rows for the manifest."""
        rows = []
        for name in sorted(self.stats):
            s = self.stats[name]
            for stat in ("mean", "std", "min", "max", "median", "mode"):
                rows.append((name, stat, getattr(s, stat)))
        return rows


def fit_plan(train: Dataset, steps: list[Step]) -> PreprocessPlan:
    """Compute per-column statistics from training data only."""
    if len(train) == 0:
        raise EmptyColumn("cannot fit a plan on an empty dataset")
    plan = PreprocessPlan(steps=list(steps))
    if plan.fitted:
        raise PlanAlreadyFitted("plan was already fitted")
    X = train.X
    for j, name in enumerate(train.feature_names):
        stats = _column_stats(X[:, j], name)
        if stats.degenerate_range:
            log.warning("column %s is constant (min == max == %g)", name, stats.min)
        plan.stats[name] = stats
    plan.fitted = True
    return plan


def refit_plan(plan: PreprocessPlan, train: Dataset) -> PreprocessPlan:
    """Fitting twice is a contract violation."""
    if plan.fitted:
        raise PlanAlreadyFitted("plan was already fitted; build a new one instead")
    return fit_plan(train, plan.steps)


def impute(column: np.ndarray, strategy: str, stats: ColumnStats | None = None) -> np.ndarray:
    """Fill NaN gaps with the column's mean/median/mode.

    When `stats` is given the fill value comes from it (fit-on-train);
    otherwise it is computed from the column's own non-missing entries.
    Non-missing entries pass through bit-identical.
    """
    column = np.asarray(column, dtype=np.float64)
    gaps = np.isnan(column)
    if gaps.all():
        raise AllMissing("cannot impute a column with no observed values")
    if strategy not in IMPUTE_STRATEGIES:
        raise DataError(f"unknown imputation strategy {strategy!r}")
    if stats is None:
        stats = _column_stats(column, "<anonymous>")
    fill = {"mean": stats.mean, "median": stats.median, "mode": stats.mode}[strategy]
    out = column.copy()
    out[gaps] = fill
    return out


def min_max_apply(column: np.ndarray, stats: ColumnStats) -> np.ndarray:
    """x -> (x - min) / (max - min). Values outside the fitted range pass
    through unclipped (and are counted by the caller via `out_of_range`)."""
    if stats.degenerate_range:
        raise DegenerateRange("max == min; min-max scaling undefined")
    return (np.asarray(column, dtype=np.float64) - stats.min) / (stats.max - stats.min)


def min_max_invert(scaled: np.ndarray, stats: ColumnStats) -> np.ndarray:
    return np.asarray(scaled, dtype=np.float64) * (stats.max - stats.min) + stats.min


def zscore_apply(column: np.ndarray, stats: ColumnStats) -> np.ndarray:
    """x -> (x - mean) / std, population std."""
    if stats.std <= 0.0:
        raise ZeroVariance("column has zero variance; z-score undefined")
    return (np.asarray(column, dtype=np.float64) - stats.mean) / stats.std


def log_transform(column: np.ndarray, offset: float = 1.0) -> np.ndarray:
    """x -> ln(x + offset); every shifted value must be positive."""
    column = np.asarray(column, dtype=np.float64)
    shifted = column + offset
    bad = np.flatnonzero(shifted <= 0.0)
    if bad.size:
        raise NonPositiveInput(int(bad[0]), float(column[bad[0]]))
    return np.log(shifted)


def out_of_range(column: np.ndarray, stats: ColumnStats) -> int:
    return int(np.sum((column < stats.min) | (column > stats.max)))


def apply_plan(plan: PreprocessPlan, d: Dataset) -> Dataset:
    """Apply the fitted steps to a dataset; the plan itself never changes.

    Min-max applied to non-training data may produce values outside [0, 1];
    these pass through and the count is logged.
    """
    if not plan.fitted:
        raise DataError("plan must be fitted before it can be applied")
    if len(d) == 0:
        return d
    X = d.X.copy()
    oor_total = 0
    for step in plan.steps:
        names = step.columns if step.columns is not None else tuple(d.feature_names)
        for name in names:
            j = d.feature_names.index(name)
            stats = plan.stats[name]
            if step.kind == "impute":
                X[:, j] = impute(X[:, j], step.strategy, stats)
            elif step.kind == "minmax":
                oor_total += out_of_range(X[:, j], stats)
                X[:, j] = min_max_apply(X[:, j], stats)
            elif step.kind == "zscore":
                X[:, j] = zscore_apply(X[:, j], stats)
            elif step.kind == "log":
                X[:, j] = log_transform(X[:, j], step.offset)
    if oor_total:
        log.info("min-max: %d values fell outside the fitted range (passed through)", oor_total)
    return d.replace_features(X, d.feature_names)
