"""Model-agnostic attribution: exact Shapley values over enumerated
coalitions, a weighted-least-squares kernel estimator, local linear
surrogates, and permutation importance."""

from .lime import DegeneratePerturbations, LimeConfig, LimeResult, lime_explain
from .masking import BackgroundSet, CoalitionMask, EmptyBackground, masked_predict
from .permutation import permutation_importance
from .shapley import (
    Attribution,
    SingularSystem,
    TooManyFeatures,
    exact_shapley,
    global_mean_abs_shap,
    kernel_shap,
)

__all__ = [
    "Attribution",
    "BackgroundSet",
    "CoalitionMask",
    "DegeneratePerturbations",
    "EmptyBackground",
    "LimeConfig",
    "LimeResult",
    "SingularSystem",
    "TooManyFeatures",
    "exact_shapley",
    "global_mean_abs_shap",
    "kernel_shap",
    "lime_explain",
    "masked_predict",
    "permutation_importance",
]
