"""Feature-absence semantics for coalition games.

A feature is "absent" when its column is replaced by background values;
the coalition value is the model's mean prediction over the background
rows with present features pinned to the instance. A means-only background
collapses that average to a single substituted row, which keeps exact
enumeration cheap in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..rng import derived_rng


class EmptyBackground(DataError):
    pass


@dataclass(frozen=True)
class CoalitionMask:
    """Bit vector over features; 1 = feature present (taken from the instance)."""

    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=bool))

    @staticmethod
    def from_indices(indices, n: int) -> "CoalitionMask":
        bits = np.zeros(n, dtype=bool)
        bits[list(indices)] = True
        return CoalitionMask(bits)

    def size(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class BackgroundSet:
    """Reference rows defining feature absence."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        if rows.shape[0] == 0:
            raise EmptyBackground("background set needs at least one row")
        object.__setattr__(self, "rows", rows)

    @staticmethod
    def sample(X: np.ndarray, n: int, seed: int) -> "BackgroundSet":
        """Up to n rows drawn without replacement from X with a derived seed."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[0] == 0:
            raise EmptyBackground("cannot sample a background from an empty matrix")
        take = min(n, X.shape[0])
        idx = derived_rng(seed, "background").choice(X.shape[0], size=take, replace=False)
        return BackgroundSet(X[np.sort(idx)])

    @staticmethod
    def means_only(X: np.ndarray) -> "BackgroundSet":
        return BackgroundSet(np.atleast_2d(np.asarray(X, dtype=np.float64)).mean(axis=0, keepdims=True))

    @property
    def means(self) -> np.ndarray:
        return self.rows.mean(axis=0)

    def __len__(self) -> int:
        return int(self.rows.shape[0])


def coalition_matrix(x: np.ndarray, masks: np.ndarray, bg: BackgroundSet) -> np.ndarray:
    """Rows for every (mask, background row) pair: present features from x,
    absent features from the background row.

    masks: (n_masks, n_features) boolean. Returns (n_masks * n_bg, n_features)
    ordered mask-major.
    """
    x = np.asarray(x, dtype=np.float64)
    masks = np.asarray(masks, dtype=bool)
    n_masks = masks.shape[0]
    n_bg = len(bg)
    tiled_bg = np.tile(bg.rows, (n_masks, 1))
    masks_rep = np.repeat(masks, n_bg, axis=0)
    return np.where(masks_rep, x[None, :], tiled_bg)


def masked_predict(model, x: np.ndarray, mask: CoalitionMask, bg: BackgroundSet) -> float:
    """Coalition value f_x(S): mean model output over background rows with
    the masked-in features pinned to the instance."""
    rows = coalition_matrix(x, mask.bits[None, :], bg)
    return float(np.mean(model(rows)))


def batch_masked_predict(model, x: np.ndarray, masks: np.ndarray, bg: BackgroundSet) -> np.ndarray:
    """f_x(S) for many coalitions at once; one model call."""
    masks = np.asarray(masks, dtype=bool)
    rows = coalition_matrix(x, masks, bg)
    preds = np.asarray(model(rows), dtype=np.float64)
    return preds.reshape(masks.shape[0], len(bg)).mean(axis=1)
