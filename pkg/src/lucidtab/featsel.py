"""Feature scoring and selection: Pearson correlation, chi-square scores,
recursive feature elimination over a built-in logistic regression, and PCA
backed by a cyclic Jacobi eigensolver.

The pipeline's selected features are the RFE survivors; chi-square and PCA
results are reported alongside. Chi-square runs on a min-max rescaled copy
of the data because the statistic requires non-negative inputs, which
z-scored features are not.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import DataError, StageError
from .preprocess import ZeroVariance

log = logging.getLogger(__name__)


class NegativeInput(DataError):
    def __init__(self, col: str):
        super().__init__(f"chi-square requires non-negative values; column {col!r} has negatives")
        self.col = col


class KOutOfRange(DataError):
    pass


class EigenFailure(StageError):
    pass


class NonConvergence(UserWarning):
    """Gradient descent hit max_iters before reaching tolerance."""


@dataclass(frozen=True)
class FeatureScore:
    name: str
    score: float
    rank: int  # 1 = best; ties share a rank


def _competition_ranks(scores: np.ndarray) -> np.ndarray:
    """Descending competition ranking: ties share the smallest rank ("1224")."""
    order = np.argsort(-scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.int64)
    rank = 0
    prev = None
    for pos, idx in enumerate(order, start=1):
        if prev is None or scores[idx] != prev:
            rank = pos
            prev = scores[idx]
        ranks[idx] = rank
    return ranks


def pearson_corr(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation of two equal-length, non-constant vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise DataError("pearson_corr needs two 1-D vectors of equal length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = np.sqrt(np.sum(dx * dx) * np.sum(dy * dy))
    if denom == 0.0:
        raise ZeroVariance("pearson_corr undefined for constant input")
    r = float(np.sum(dx * dy) / denom)
    return max(-1.0, min(1.0, r))


def chi2_scores(X: np.ndarray, y: np.ndarray, names: list[str]) -> np.ndarray:
    """Chi-square statistic of class-conditional feature sums against the
    expectation under class priors. Input values must be non-negative."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    for j, name in enumerate(names):
        if np.any(X[:, j] < 0):
            raise NegativeInput(name)
    n = len(y)
    priors = np.array([(y == 0).sum() / n, (y == 1).sum() / n])
    observed = np.stack([X[y == 0].sum(axis=0), X[y == 1].sum(axis=0)])  # (2, k)
    expected = priors[:, None] * X.sum(axis=0)[None, :]
    scores = np.zeros(X.shape[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(expected > 0, (observed - expected) ** 2 / expected, 0.0)
    scores = terms.sum(axis=0)
    return scores


def chi2_select(d: Dataset, k: int) -> tuple[list[FeatureScore], list[str]]:
    """Score every feature by chi-square on a [0, 1] min-max rescaled copy
    and select the top k (ties broken by column order)."""
    n_feat = len(d.feature_names)
    if not 1 <= k <= n_feat:
        raise KOutOfRange(f"k must lie in [1, {n_feat}], got {k}")
    X = d.X.copy()
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = hi - lo
    constant = span == 0
    span[constant] = 1.0
    X = (X - lo) / span
    X[:, constant] = 0.0
    scores = chi2_scores(X, d.y, d.feature_names)
    ranks = _competition_ranks(scores)
    result = [FeatureScore(name, float(s), int(r)) for name, s, r in zip(d.feature_names, scores, ranks)]
    order = sorted(range(n_feat), key=lambda j: (-scores[j], j))
    selected = [d.feature_names[j] for j in sorted(order[:k])]
    return result, selected


@dataclass
class LogisticConfig:
    learning_rate: float | None = None  # None -> 1/L from a power-iteration Lipschitz estimate
    max_iters: int = 20000
    l2: float = 1e-3
    tol: float = 1e-5  # on the gradient norm


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    iterations: int
    converged: bool
    config: LogisticConfig = field(default_factory=LogisticConfig)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss(X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, l2: float) -> float:
    """Mean log loss plus (l2/2)||w||^2; the bias is not penalized."""
    z = X @ w + b
    # log(1 + exp(-z*y')) with y' in {-1, +1}, stable form
    ys = 2.0 * y - 1.0
    m = np.maximum(0.0, -ys * z)
    loss = np.mean(m + np.log(np.exp(-m) + np.exp(-ys * z - m)))
    return float(loss + 0.5 * l2 * np.dot(w, w))


def _gradient_lipschitz(X: np.ndarray, l2: float) -> float:
    """Upper bound on the logistic-gradient Lipschitz constant:
    lambda_max(X^T X)/(4n) + l2, with lambda_max by power iteration."""
    G = X.T @ X
    v = np.ones(G.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(50):
        v = G @ v
        norm = np.linalg.norm(v)
        if norm == 0.0:
            return l2 if l2 > 0 else 1.0
        v /= norm
    return float((v @ G @ v) / (4.0 * X.shape[0]) + l2)


def logistic_fit(X: np.ndarray, y: np.ndarray, config: LogisticConfig | None = None) -> LogisticModel:
    """L2-regularized logistic regression by full-batch gradient descent.

    The default step size is 1/L for a power-iteration estimate of the
    gradient's Lipschitz constant, which guarantees monotone descent.
    Stops when the gradient norm (weights and bias jointly) falls below
    config.tol; hitting max_iters first emits a NonConvergence warning and
    returns the best iterate seen.
    """
    config = config or LogisticConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("logistic_fit needs a non-empty 2-D matrix")
    n, k = X.shape
    lr = config.learning_rate
    if lr is None:
        lr = 1.0 / max(_gradient_lipschitz(X, config.l2), 1e-12)
    w = np.zeros(k)
    b = 0.0
    best = (np.inf, w.copy(), b, 0)
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        p = _sigmoid(X @ w + b)
        resid = (p - y) / n
        gw = X.T @ resid + config.l2 * w
        gb = float(resid.sum())
        gnorm = float(np.sqrt(np.dot(gw, gw) + gb * gb))
        if gnorm <= config.tol:
            converged = True
            break
        w -= lr * gw
        b -= lr * gb
        loss = logistic_loss(X, y, w, b, config.l2)
        if loss < best[0]:
            best = (loss, w.copy(), b, it)
    if not converged:
        warnings.warn(
            f"logistic_fit: gradient norm above tol after {config.max_iters} iters",
            NonConvergence,
        )
        _, w, b, it = best
    return LogisticModel(weights=w, bias=b, iterations=it, converged=converged, config=config)


def logistic_predict_proba(model: LogisticModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return _sigmoid(X @ model.weights + model.bias)


def rfe(d: Dataset, n_keep: int, config: LogisticConfig | None = None) -> list[FeatureScore]:
    """Recursive feature elimination over the built-in logistic regression.

    Each round fits on the surviving (already standardized) features and
    drops the one with the smallest |weight|, rightmost column first on
    ties. Survivors share rank 1; eliminated features get ranks 2, 3, ...
    in reverse elimination order, so the first-dropped feature carries the
    largest rank number.
    """
    n_feat = len(d.feature_names)
    if not 1 <= n_keep <= n_feat:
        raise KOutOfRange(f"n_keep must lie in [1, {n_feat}], got {n_keep}")
    X = d.X
    y = d.y
    surviving = list(range(n_feat))
    eliminated: list[int] = []
    while len(surviving) > n_keep:
        model = logistic_fit(X[:, surviving], y, config)
        mags = np.abs(model.weights)
        # ties -> rightmost column dropped first
        weakest_pos = int(np.flatnonzero(mags == mags.min())[-1])
        eliminated.append(surviving.pop(weakest_pos))
    ranks = {j: 1 for j in surviving}
    for step, j in enumerate(reversed(eliminated), start=2):
        ranks[j] = step
    scores = []
    for j, name in enumerate(d.feature_names):
        scores.append(FeatureScore(name=name, score=float(-ranks[j]), rank=ranks[j]))
    return scores


@dataclass
class PcaModel:
    components: np.ndarray  # orthonormal columns, descending eigenvalue order
    eigenvalues: np.ndarray
    explained_variance_ratio: np.ndarray
    means: np.ndarray


def jacobi_eigh(A: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps over all off-diagonal pairs until the off-diagonal Frobenius
    norm drops below tol (relative to the matrix norm). Returns
    (eigenvalues, eigenvectors-as-columns) sorted descending.
    """
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DataError("jacobi_eigh needs a square matrix")
    if not np.allclose(A, A.T, atol=1e-10):
        raise DataError("jacobi_eigh needs a symmetric matrix")
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.linalg.norm(A), 1.0)

    mask = ~np.eye(n, dtype=bool)

    def off_norm() -> float:
        # summed directly over off-diagonal entries; subtracting the
        # diagonal from the total norm cancels catastrophically
        return float(np.sqrt(np.sum(A[mask] ** 2)))

    for _ in range(max_sweeps):
        if off_norm() <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) >= 1e150:  # theta**2 would overflow
                    t = 1.0 / (2.0 * theta)
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                J_p, J_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * J_p - s * J_q
                A[:, q] = s * J_p + c * J_q
                R_p, R_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * R_p - s * R_q
                A[q, :] = s * R_p + c * R_q
                V_p, V_q = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * V_p - s * V_q
                V[:, q] = s * V_p + c * V_q
    if off_norm() > tol * scale:
        raise EigenFailure(f"Jacobi sweeps did not converge in {max_sweeps} sweeps")
    eigvals = np.diag(A).copy()
    order = np.argsort(-eigvals, kind="stable")
    return eigvals[order], V[:, order]


def pca_fit(X: np.ndarray, tol: float = 1e-12) -> PcaModel:
    """PCA of the (internally centered) data via the Jacobi eigensolver.

    Covariance uses the population convention (denominator N). Eigenvector
    sign is fixed so each component's largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("pca_fit needs at least two rows")
    means = X.mean(axis=0)
    C = (X - means).T @ (X - means) / X.shape[0]
    eigvals, V = jacobi_eigh(C, tol=tol)
    eigvals = np.clip(eigvals, 0.0, None)  # numerical negatives
    for j in range(V.shape[1]):
        lead = np.argmax(np.abs(V[:, j]))
        if V[lead, j] < 0:
            V[:, j] = -V[:, j]
    total = eigvals.sum()
    ratios = eigvals / total if total > 0 else np.zeros_like(eigvals)
    return PcaModel(components=V, eigenvalues=eigvals, explained_variance_ratio=ratios, means=means)


def pca_transform(model: PcaModel, X: np.ndarray, m: int | None = None) -> np.ndarray:
    """Project rows onto the first m components: Y = (X - means) V[:, :m]."""
    X = np.asarray(X, dtype=np.float64)
    m = model.components.shape[1] if m is None else m
    if not 1 <= m <= model.components.shape[1]:
        raise KOutOfRange(f"m must lie in [1, {model.components.shape[1]}]")
    return (X - model.means) @ model.components[:, :m]


def pca_inverse_transform(model: PcaModel, Y: np.ndarray) -> np.ndarray:
    m = Y.shape[1]
    return Y @ model.components[:, :m].T + model.means
