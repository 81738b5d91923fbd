"""Hyperparameter search with 5-fold cross-validation, plus final training
with early stopping and checkpointing.

Grid search walks the full Cartesian product of the value lists; random
search draws uniformly per hyperparameter and deduplicates before
evaluating. Both rank candidates by mean fold accuracy, ties broken by
enumeration order. Early-stopping defaults (patience 30, min_delta 0.01)
intentionally never fire within the default 10 epochs; they are kept as
configuration keys.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import save_checkpoint
from .dataset import Dataset
from .errors import DataError, LucidtabError
from .metrics import accuracy_metric
from .nn import NetworkSpec, build_network, cnn_spec, make_optimizer, mlp_spec
from .nn.optim import KINDS as OPTIMIZER_KINDS
from .rng import derive_seed, derived_rng

GRID_FIELDS = {
    "mlp": ("activation", "dropout", "hidden_layer_sizes", "optimizer"),
    "cnn": ("activation", "dropout", "filters", "kernel_size", "optimizer", "pool_size"),
}
ACTIVATIONS = ("relu", "tanh", "sigmoid")
DEFAULT_GRIDS = {
    "mlp": {
        "activation": ("relu", "tanh", "sigmoid"),
        "dropout": (0.1, 0.3, 0.5),
        "hidden_layer_sizes": (50, 100, 150),
        "optimizer": ("sgd", "adam", "rmsprop"),
    },
    "cnn": {
        "activation": ("relu", "tanh", "sigmoid"),
        "dropout": (0.1, 0.3, 0.5),
        "filters": (16, 32),
        "kernel_size": (3, 5),
        "optimizer": ("sgd", "adam", "rmsprop"),
        "pool_size": (2,),
    },
}


class KTooLarge(DataError):
    pass


@dataclass(frozen=True)
class ParamGrid:
    """Per-hyperparameter value lists for one model kind."""

    kind: str
    values: dict[str, tuple]

    def __post_init__(self):
        if self.kind not in GRID_FIELDS:
            raise DataError(f"unknown model kind {self.kind!r}")
        fields = GRID_FIELDS[self.kind]
        if set(self.values) != set(fields):
            raise DataError(f"{self.kind} grid must define exactly {fields}")
        for name, vals in self.values.items():
            if not vals:
                raise DataError(f"empty value list for {name!r}")
        for act in self.values["activation"]:
            if act not in ACTIVATIONS:
                raise DataError(f"unknown activation {act!r}")
        for opt in self.values["optimizer"]:
            if opt not in OPTIMIZER_KINDS:
                raise DataError(f"unknown optimizer {opt!r}")
        for rate in self.values["dropout"]:
            if not 0.0 <= rate < 1.0:
                raise DataError(f"dropout rate {rate} outside [0, 1)")

    @property
    def fields(self) -> tuple[str, ...]:
        return GRID_FIELDS[self.kind]

    def size(self) -> int:
        n = 1
        for name in self.fields:
            n *= len(self.values[name])
        return n


def default_grid(kind: str) -> ParamGrid:
    return ParamGrid(kind=kind, values=dict(DEFAULT_GRIDS[kind]))


@dataclass
class TrainSettings:
    epochs: int = 10
    batch_size: int = 32
    patience: int = 30
    min_delta: float = 0.01
    val_fraction: float = 0.1
    l1: float = 0.0
    l2: float = 0.0


@dataclass
class CvResult:
    kind: str
    params: dict
    fold_scores: list[float]
    mean: float
    std: float
    wall_time: float
    enum_index: int
    failed: bool = False
    error: str = ""


@dataclass
class EarlyStopState:
    """Accuracy-style monitor: improvement means metric >= best + min_delta."""

    min_delta: float
    patience: int
    best: float = -np.inf
    since_improvement: int = 0
    history: list[float] = field(default_factory=list)

    def update(self, metric: float) -> bool:
        """Record one epoch's metric; returns True when training should stop."""
        self.history.append(metric)
        if metric >= self.best + self.min_delta:
            self.best = metric
            self.since_improvement = 0
        else:
            self.since_improvement += 1
        return self.since_improvement >= self.patience


def candidate_spec(kind: str, params: dict, input_width: int) -> NetworkSpec:
    if kind == "mlp":
        return mlp_spec(
            input_width,
            hidden=int(params["hidden_layer_sizes"]),
            activation=params["activation"],
            dropout=float(params["dropout"]),
        )
    if kind == "cnn":
        return cnn_spec(
            input_width,
            filters=int(params["filters"]),
            kernel_size=int(params["kernel_size"]),
            pool_size=int(params["pool_size"]),
            activation=params["activation"],
            dropout=float(params["dropout"]),
        )
    raise DataError(f"unknown model kind {kind!r}")


def _params_key(kind: str, params: dict) -> str:
    return kind + "|" + "|".join(f"{k}={params[k]}" for k in sorted(params))


def kfold_split(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Shuffle 0..n-1 and cut into k folds whose sizes differ by at most 1."""
    if k < 2:
        raise KTooLarge(f"k must be >= 2, got {k}")
    if k > n:
        raise KTooLarge(f"k={k} exceeds n={n}")
    perm = derived_rng(seed, "kfold-shuffle").permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(np.sort(perm[start : start + size]))
        start += size
    return folds


def _fit_plain(net, X: np.ndarray, y: np.ndarray, optimizer, settings: TrainSettings, seed: int) -> list[float]:
    """Fixed-epoch mini-batch training; returns per-epoch mean batch loss."""
    n = X.shape[0]
    losses = []
    for epoch in range(settings.epochs):
        order = derived_rng(seed, "shuffle", epoch).permutation(n)
        drop_rng = derived_rng(seed, "dropout", epoch)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, settings.batch_size):
            batch = order[start : start + settings.batch_size]
            epoch_loss += net.train_step(X[batch], y[batch], optimizer, drop_rng, l1=settings.l1, l2=settings.l2)
            n_batches += 1
        losses.append(epoch_loss / max(n_batches, 1))
    return losses


def cross_validate(
    train: Dataset,
    kind: str,
    params: dict,
    k: int = 5,
    seed: int = 42,
    settings: TrainSettings | None = None,
    enum_index: int = 0,
) -> CvResult:
    """Train on k-1 folds and score accuracy on the held-out fold, k times.

    Per-fold failures mark the whole candidate failed; the exception text is
    kept on the result.
    """
    settings = settings or TrainSettings()
    started = time.perf_counter()
    X, y = train.X, train.y
    folds = kfold_split(len(train), k, derive_seed(seed, "cv-folds"))
    key = _params_key(kind, params)
    scores: list[float] = []
    try:
        spec = candidate_spec(kind, params, X.shape[1])
        for f, val_idx in enumerate(folds):
            train_idx = np.setdiff1d(np.arange(len(train)), val_idx)
            net = build_network(spec, derive_seed(seed, "cv-init", key, f))
            optimizer = make_optimizer(params["optimizer"])
            _fit_plain(net, X[train_idx], y[train_idx], optimizer, settings, derive_seed(seed, "cv-fit", key, f))
            scores.append(accuracy_metric(y[val_idx], net.predict_proba(X[val_idx])))
    except LucidtabError as exc:
        return CvResult(
            kind=kind,
            params=dict(params),
            fold_scores=scores,
            mean=-np.inf,
            std=0.0,
            wall_time=time.perf_counter() - started,
            enum_index=enum_index,
            failed=True,
            error=str(exc),
        )
    arr = np.array(scores)
    return CvResult(
        kind=kind,
        params=dict(params),
        fold_scores=scores,
        mean=float(arr.mean()),
        std=float(arr.std()),
        wall_time=time.perf_counter() - started,
        enum_index=enum_index,
    )


def _rank(results: list[CvResult]) -> list[CvResult]:
    return sorted(results, key=lambda r: (-r.mean, r.enum_index))


def enumerate_grid(grid: ParamGrid) -> list[dict]:
    """Cartesian product of the value lists, in declared field order."""
    fields = grid.fields
    return [dict(zip(fields, combo)) for combo in itertools.product(*(grid.values[f] for f in fields))]


def grid_search(
    train: Dataset,
    grid: ParamGrid,
    seed: int = 42,
    k: int = 5,
    settings: TrainSettings | None = None,
) -> list[CvResult]:
    """Evaluate every combination in the grid; result count equals the
    Cartesian-product size exactly."""
    results = [
        cross_validate(train, grid.kind, params, k=k, seed=seed, settings=settings, enum_index=i)
        for i, params in enumerate(enumerate_grid(grid))
    ]
    return _rank(results)


def sample_candidates(space: ParamGrid, n_iter: int, seed: int) -> list[dict]:
    """n_iter uniform draws per hyperparameter, deduplicated in draw order."""
    if n_iter < 1:
        raise DataError(f"n_iter must be >= 1, got {n_iter}")
    rng = derived_rng(seed, "random-search")
    seen = set()
    candidates = []
    for _ in range(n_iter):
        params = {f: space.values[f][rng.integers(len(space.values[f]))] for f in space.fields}
        key = _params_key(space.kind, params)
        if key not in seen:
            seen.add(key)
            candidates.append(params)
    return candidates


def random_search(
    train: Dataset,
    space: ParamGrid,
    n_iter: int,
    seed: int = 42,
    k: int = 5,
    settings: TrainSettings | None = None,
) -> list[CvResult]:
    results = [
        cross_validate(train, space.kind, params, k=k, seed=seed, settings=settings, enum_index=i)
        for i, params in enumerate(sample_candidates(space, n_iter, seed))
    ]
    return _rank(results)


@dataclass
class TrainHistory:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_metric: float = -np.inf
    stopped_early: bool = False


def train_final(
    train: Dataset,
    kind: str,
    params: dict,
    settings: TrainSettings | None = None,
    seed: int = 42,
    checkpoint_path=None,
):
    """Train the chosen candidate on the full training set.

    A validation slice (settings.val_fraction, derived seed) is carved off
    to monitor accuracy after each epoch. A checkpoint is written whenever
    the monitored metric reaches a new best; training halts early once no
    improvement of at least min_delta has been seen for `patience` epochs.
    Returns (network-with-best-weights, TrainHistory).
    """
    settings = settings or TrainSettings()
    X, y = train.X, train.y
    n = X.shape[0]
    n_val = max(1, int(round(n * settings.val_fraction)))
    if n_val >= n:
        raise DataError("validation slice would consume the whole training set")
    perm = derived_rng(seed, "final-val-slice").permutation(n)
    val_idx, fit_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    X_fit, y_fit, X_val, y_val = X[fit_idx], y[fit_idx], X[val_idx], y[val_idx]

    spec = candidate_spec(kind, params, X.shape[1])
    net = build_network(spec, derive_seed(seed, "final-init"))
    optimizer = make_optimizer(params["optimizer"])
    monitor = EarlyStopState(min_delta=settings.min_delta, patience=settings.patience)
    history = TrainHistory()
    best_weights = net.get_weights()
    best_ckpt = -np.inf

    fit_seed = derive_seed(seed, "final-fit")
    n_fit = X_fit.shape[0]
    for epoch in range(settings.epochs):
        order = derived_rng(fit_seed, "shuffle", epoch).permutation(n_fit)
        drop_rng = derived_rng(fit_seed, "dropout", epoch)
        epoch_loss, n_batches = 0.0, 0
        for start in range(0, n_fit, settings.batch_size):
            batch = order[start : start + settings.batch_size]
            epoch_loss += net.train_step(X_fit[batch], y_fit[batch], optimizer, drop_rng, l1=settings.l1, l2=settings.l2)
            n_batches += 1
        metric = accuracy_metric(y_val, net.predict_proba(X_val))
        checkpointed = metric > best_ckpt
        if checkpointed:
            best_ckpt = metric
            best_weights = net.get_weights()
            history.best_epoch = epoch
            history.best_metric = metric
            if checkpoint_path is not None:
                save_checkpoint(net, checkpoint_path, extra={"kind": kind, "params": {k: params[k] for k in sorted(params)}, "val_accuracy": metric, "epoch": epoch})
        history.epochs.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss / max(n_batches, 1),
                "val_accuracy": metric,
                "checkpointed": checkpointed,
            }
        )
        if monitor.update(metric):
            history.stopped_early = True
            break
    net.set_weights(best_weights)
    return net, history
