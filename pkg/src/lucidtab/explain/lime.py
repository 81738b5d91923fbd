"""Local linear surrogates fitted around one instance.

Perturbations add Gaussian noise scaled by the training-column standard
deviations; sample weights come from an exponential kernel over Euclidean
distance in that standardized space. The surrogate is a weighted ridge
regression; complexity is enforced by keeping the top-K features ranked by
their weighted univariate slope and refitting on that subset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..rng import derived_rng
from .shapley import Attribution, _names_for


class DegeneratePerturbations(DataError):
    pass


@dataclass(frozen=True)
class LimeConfig:
    n_samples: int = 5000
    kernel_width: float | None = None  # None -> 0.75 * sqrt(n_features)
    max_features: int | None = 10  # None -> keep every feature
    ridge: float = 1e-3

    def __post_init__(self):
        if self.n_samples < 10:
            raise DataError(f"n_samples must be >= 10, got {self.n_samples}")
        if self.kernel_width is not None and self.kernel_width <= 0:
            raise DataError("kernel width must be positive")
        if self.ridge < 0:
            raise DataError("ridge strength must be non-negative")


@dataclass(frozen=True)
class LimeResult:
    attribution: Attribution
    fidelity: float  # weighted R^2 of the surrogate on the perturbed sample
    kernel_width: float
    kept: tuple[str, ...]


def _weighted_ridge(Z: np.ndarray, y: np.ndarray, w: np.ndarray, ridge: float) -> tuple[np.ndarray, float]:
    """Solve min sum w_i (y_i - b - z_i.beta)^2 + ridge*|beta|^2; returns
    (beta, intercept). The intercept is not penalized."""
    n, k = Z.shape
    A = np.hstack([np.ones((n, 1)), Z])
    G = (A.T * w) @ A
    reg = np.eye(k + 1) * ridge
    reg[0, 0] = 0.0
    coef = np.linalg.solve(G + reg, (A.T * w) @ y)
    return coef[1:], float(coef[0])


def lime_explain(model, x, column_scales, cfg: LimeConfig, seed: int, feature_names=None) -> LimeResult:
    """Fit a local weighted-ridge surrogate around `x`.

    `column_scales` holds per-feature standard deviations of the training
    data; they scale both the Gaussian perturbations and the distance
    metric. Returns attributions (surrogate coefficients), the surrogate's
    weighted R^2 fidelity, and which features survived the complexity cap.
    """
    x = np.asarray(x, dtype=np.float64)
    scales = np.asarray(column_scales, dtype=np.float64)
    if scales.shape != x.shape:
        raise DataError("column_scales must match the instance shape")
    if np.any(scales <= 0):
        raise DataError("column scales must be positive")
    n_feat = x.shape[0]
    width = cfg.kernel_width if cfg.kernel_width is not None else 0.75 * np.sqrt(n_feat)

    rng = derived_rng(seed, "lime-perturb")
    Z = x[None, :] + rng.standard_normal((cfg.n_samples, n_feat)) * scales[None, :]
    Z[0] = x  # anchor the instance itself

    dist2 = np.sum(((Z - x) / scales) ** 2, axis=1)
    weights = np.exp(-dist2 / width**2)
    if np.max(weights[1:]) < 1e-200:
        raise DegeneratePerturbations("kernel width too small: every perturbed sample has zero weight")

    y = np.asarray(model(Z), dtype=np.float64)

    # Complexity cap: rank features by weighted univariate slope magnitude.
    k_keep = n_feat if cfg.max_features is None else min(cfg.max_features, n_feat)
    wsum = weights.sum()
    z_mean = (weights @ Z) / wsum
    y_mean = float(weights @ y / wsum)
    dz = Z - z_mean
    dy = y - y_mean
    var = (weights @ (dz**2)).clip(min=1e-300)
    slopes = (weights * dy) @ dz / var
    kept_idx = np.sort(np.argsort(-np.abs(slopes), kind="stable")[:k_keep])

    beta_kept, intercept = _weighted_ridge(Z[:, kept_idx], y, weights, cfg.ridge)
    phi = np.zeros(n_feat)
    phi[kept_idx] = beta_kept

    y_hat = intercept + Z[:, kept_idx] @ beta_kept
    ss_res = float(weights @ (y - y_hat) ** 2)
    ss_tot = float(weights @ (y - y_mean) ** 2)
    fidelity = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0

    names = _names_for(list(range(n_feat)), feature_names)
    attribution = Attribution(
        feature_names=names,
        phi=phi,
        base_value=intercept,
        predicted=float(np.asarray(model(x[None, :]))[0]),
    )
    return LimeResult(
        attribution=attribution,
        fidelity=fidelity,
        kernel_width=float(width),
        kept=tuple(names[j] for j in kept_idx),
    )
