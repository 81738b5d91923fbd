"""Permutation importance: score drop caused by shuffling one feature."""

from __future__ import annotations

import numpy as np

from ..featsel import FeatureScore, _competition_ranks
from ..metrics import permutation_score_drop


def permutation_importance(
    model,
    X: np.ndarray,
    y: np.ndarray,
    metric,
    repeats: int = 5,
    seed: int = 0,
    feature_names=None,
) -> list[FeatureScore]:
    """Mean score drop per shuffled feature, ranked descending.

    Features whose shuffling hurts the metric most rank first; a feature
    the model provably ignores drops the score by exactly zero.
    """
    drops = permutation_score_drop(model, X, y, metric, repeats=repeats, seed=seed)
    names = feature_names if feature_names is not None else [f"f{j}" for j in range(len(drops))]
    ranks = _competition_ranks(drops)
    scores = [
        FeatureScore(name=names[j], score=float(drops[j]), rank=int(ranks[j])) for j in range(len(drops))
    ]
    return sorted(scores, key=lambda fs: (fs.rank, fs.name))
