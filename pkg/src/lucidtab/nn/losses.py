"""Binary cross-entropy with epsilon clipping."""

from __future__ import annotations

import numpy as np

CLIP_EPS = 1e-12


def bce_loss(probs: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. the probabilities.

    Probabilities are clipped to [eps, 1-eps] before the logs; the gradient
    is evaluated at the clipped values and already carries the 1/N factor.
    """
    probs = np.asarray(probs, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p = np.clip(probs, CLIP_EPS, 1.0 - CLIP_EPS)
    n = p.size
    loss = float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
    grad = (p - y) / (p * (1.0 - p)) / n
    return loss, grad
