"""Shapley-value attribution by exact coalition enumeration and by the
kernel weighted-least-squares estimator.

Exact mode enumerates all 2^m coalitions of the features in play (m <= 20)
and applies the combinatorial weights |S|!(m-|S|-1)!/m!. Kernel mode
enumerates coalition sizes from the outside in while the budget allows,
samples the remainder, weights rows by (n-1)/(C(n,s)*s*(n-s)), and solves
the weighted least squares with the efficiency constraint eliminating one
unknown, so the all-on/all-off anchors hold exactly instead of carrying
large finite weights.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, StageError
from ..featsel import FeatureScore, _competition_ranks
from ..rng import derived_rng
from .masking import BackgroundSet, batch_masked_predict

EXACT_FEATURE_LIMIT = 20
_MAX_ROWS_PER_CALL = 65536  # coalition x background rows per model call


class TooManyFeatures(DataError):
    pass


class SingularSystem(StageError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class Attribution:
    """Per-feature contributions with the baseline they are measured from."""

    feature_names: tuple[str, ...]
    phi: np.ndarray
    base_value: float
    predicted: float

    @property
    def efficiency_gap(self) -> float:
        return float(self.phi.sum() - (self.predicted - self.base_value))


def _names_for(subset: list[int], feature_names=None) -> tuple[str, ...]:
    if feature_names is None:
        return tuple(f"f{j}" for j in subset)
    return tuple(feature_names[j] for j in subset)


def _game_values(model, x, bg, subset: list[int], masks_bits: np.ndarray) -> np.ndarray:
    """Evaluate f_x(S) for coalition bit-rows over `subset`; features outside
    the subset stay pinned at the instance values."""
    x = np.asarray(x, dtype=np.float64)
    n_all = x.shape[0]
    full = np.ones(n_all, dtype=bool)
    step = max(1, _MAX_ROWS_PER_CALL // len(bg))
    values = np.empty(masks_bits.shape[0])
    for start in range(0, masks_bits.shape[0], step):
        chunk = masks_bits[start : start + step]
        expanded = np.tile(full, (chunk.shape[0], 1))
        expanded[:, subset] = chunk
        values[start : start + step] = batch_masked_predict(model, x, expanded, bg)
    return values


def _popcounts(n_bits: int) -> np.ndarray:
    """Population count for every integer < 2**n_bits, by doubling."""
    pc = np.zeros(1, dtype=np.int64)
    for _ in range(n_bits):
        pc = np.concatenate([pc, pc + 1])
    return pc


def exact_shapley(model, x, bg: BackgroundSet, feature_subset=None, feature_names=None) -> Attribution:
    """Shapley values by full enumeration of coalitions.

    `feature_subset` restricts the game to those feature indices (the rest
    stay at their instance values); at most 20 features may play.
    """
    x = np.asarray(x, dtype=np.float64)
    subset = list(range(x.shape[0])) if feature_subset is None else [int(j) for j in feature_subset]
    m = len(subset)
    if m == 0:
        raise DataError("feature subset must be non-empty")
    if m > EXACT_FEATURE_LIMIT:
        raise TooManyFeatures(f"exact enumeration capped at {EXACT_FEATURE_LIMIT} features, got {m}")

    ints = np.arange(2**m, dtype=np.int64)
    bits = (ints[:, None] >> np.arange(m)[None, :]) & 1
    values = _game_values(model, x, bg, subset, bits.astype(bool))

    sizes = _popcounts(m)
    fact = [math.factorial(i) for i in range(m + 1)]
    weights = np.array([fact[s] * fact[m - s - 1] / fact[m] for s in range(m)])

    phi = np.zeros(m)
    for i in range(m):
        without = ints[(ints >> i) & 1 == 0]
        w = weights[sizes[without]]
        phi[i] = np.sum(w * (values[without + (1 << i)] - values[without]))

    return Attribution(
        feature_names=_names_for(subset, feature_names),
        phi=phi,
        base_value=float(values[0]),
        predicted=float(values[-1]),
    )


def _shapley_kernel_weight(n: int, s: int) -> float:
    return (n - 1) / (math.comb(n, s) * s * (n - s))


def _coalition_rows(n: int, budget: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Coalition bit rows (sizes 1..n-1 only) and their kernel weights.

    Sizes are enumerated exhaustively from the outside in (1 and n-1 first)
    while they fit in the budget; any remaining budget is filled by seeded
    sampling over the leftover sizes, weighted so each size keeps its total
    kernel mass.
    """
    size_order: list[int] = []
    for s in range(1, n // 2 + 1):
        size_order.append(s)
        if s != n - s:
            size_order.append(n - s)

    rows: list[np.ndarray] = []
    weights: list[float] = []
    remaining_sizes = []
    budget_left = budget
    for s in size_order:
        count = math.comb(n, s)
        if count <= budget_left:
            w = _shapley_kernel_weight(n, s)
            base = np.zeros(n, dtype=bool)
            for combo in itertools.combinations(range(n), s):
                row = base.copy()
                row[list(combo)] = True
                rows.append(row)
                weights.append(w)
            budget_left -= count
        else:
            remaining_sizes.append(s)

    if remaining_sizes and budget_left > 0:
        mass = np.array([(n - 1) / (s * (n - s)) for s in remaining_sizes])
        probs = mass / mass.sum()
        rng = derived_rng(seed, "kernel-coalitions")
        sampled: dict[bytes, tuple[np.ndarray, int]] = {}
        for _ in range(budget_left):
            s = remaining_sizes[rng.choice(len(remaining_sizes), p=probs)]
            members = rng.choice(n, size=s, replace=False)
            row = np.zeros(n, dtype=bool)
            row[members] = True
            key = row.tobytes()
            prev = sampled.get(key)
            sampled[key] = (row, (prev[1] if prev else 0) + 1)
        total = sum(c for _, c in sampled.values())
        for row, count in sampled.values():
            rows.append(row)
            weights.append(float(mass.sum() * count / total))

    return np.array(rows, dtype=bool), np.array(weights)


def kernel_shap(
    model,
    x,
    bg: BackgroundSet,
    n_coalitions: int = 2048,
    seed: int = 0,
    feature_subset=None,
    feature_names=None,
) -> Attribution:
    """Shapley values estimated by constrained weighted least squares.

    With budget >= 2^n - 2 every coalition is enumerated and the result
    matches exact enumeration to solver precision.
    """
    x = np.asarray(x, dtype=np.float64)
    subset = list(range(x.shape[0])) if feature_subset is None else [int(j) for j in feature_subset]
    n = len(subset)
    if n < 2:
        raise DataError("kernel_shap needs at least two features in play")
    if n_coalitions < 2:
        raise DataError("n_coalitions must be at least 2")

    Z, w = _coalition_rows(n, n_coalitions, seed)
    anchors = np.array([[False] * n, [True] * n], dtype=bool)
    values = _game_values(model, x, bg, subset, np.vstack([anchors, Z]))
    base, fx = float(values[0]), float(values[1])
    v = values[2:]

    # Efficiency constraint folded in by eliminating the last unknown:
    # phi_last = (fx - base) - sum(phi_rest).
    ey = v - base - Z[:, -1] * (fx - base)
    Zt = Z[:, :-1].astype(np.float64) - Z[:, -1:].astype(np.float64)
    A = (Zt.T * w) @ Zt
    b = (Zt.T * w) @ ey
    try:
        phi_rest = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(
            "kernel system is singular; raise n_coalitions",
            diagnostics={"n_features": n, "n_rows": int(Z.shape[0]), "budget": n_coalitions},
        ) from exc
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularSystem(
            f"kernel system is ill-conditioned (cond={cond:.3g}); raise n_coalitions",
            diagnostics={"cond": float(cond), "n_rows": int(Z.shape[0]), "budget": n_coalitions},
        )
    phi = np.append(phi_rest, (fx - base) - phi_rest.sum())

    return Attribution(
        feature_names=_names_for(subset, feature_names),
        phi=phi,
        base_value=base,
        predicted=fx,
    )


def global_mean_abs_shap(
    model,
    X_sample: np.ndarray,
    bg: BackgroundSet,
    method: str = "kernel",
    seed: int = 0,
    n_coalitions: int = 2048,
    feature_names=None,
    feature_subset=None,
) -> list[FeatureScore]:
    """Mean |phi| per feature over a sample of instances, ranked descending:
    the bar-chart statistic of the global attribution summaries.

    With `feature_subset` only those features play (the rest stay pinned at
    each instance's values), which is how exact enumeration stays feasible.
    """
    X_sample = np.atleast_2d(np.asarray(X_sample, dtype=np.float64))
    if X_sample.shape[0] == 0:
        raise DataError("need at least one instance to summarize")
    if method not in ("exact", "kernel"):
        raise DataError(f"unknown method {method!r}")
    subset = list(range(X_sample.shape[1])) if feature_subset is None else [int(j) for j in feature_subset]
    totals = np.zeros(len(subset))
    for i, row in enumerate(X_sample):
        if method == "exact":
            attr = exact_shapley(model, row, bg, feature_subset=subset, feature_names=feature_names)
        else:
            attr = kernel_shap(
                model,
                row,
                bg,
                n_coalitions=n_coalitions,
                seed=seed + i,
                feature_subset=subset,
                feature_names=feature_names,
            )
        totals += np.abs(attr.phi)
    means = totals / X_sample.shape[0]
    names = _names_for(subset, feature_names)
    ranks = _competition_ranks(means)
    scores = [FeatureScore(name=names[j], score=float(means[j]), rank=int(ranks[j])) for j in range(len(names))]
    return sorted(scores, key=lambda fs: (fs.rank, fs.name))
