import numpy as np
import pytest

from lucidtab import tune
from lucidtab.checkpoint import load_checkpoint
from lucidtab.metrics import accuracy_metric
from lucidtab.rng import make_rng
from tests.conftest import make_dataset


def separable_dataset(n=120, width=4, seed=0, margin=2.0):
    rng = make_rng(seed)
    X = rng.standard_normal((n, width))
    y = (X[:, 0] > 0).astype(np.int64)
    X[:, 0] += np.where(y == 1, margin, -margin)
    return make_dataset(X, y)


MLP_PARAMS = {"activation": "relu", "dropout": 0.0, "hidden_layer_sizes": 8, "optimizer": "adam"}


# -- k-fold splitting ---------------------------------------------------------


def test_kfold_basic_cover():
    folds = tune.kfold_split(10, 5, seed=0)
    assert [len(f) for f in folds] == [2] * 5
    assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(10))


def test_kfold_455_into_5_equal_folds():
    folds = tune.kfold_split(455, 5, seed=42)
    assert [len(f) for f in folds] == [91] * 5


def test_kfold_uneven_sizes_differ_by_at_most_one():
    folds = tune.kfold_split(13, 5, seed=3)
    sizes = sorted(len(f) for f in folds)
    assert sizes == [2, 2, 3, 3, 3]
    assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(13))


def test_kfold_deterministic():
    a = tune.kfold_split(30, 4, seed=9)
    b = tune.kfold_split(30, 4, seed=9)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_kfold_errors():
    with pytest.raises(tune.KTooLarge):
        tune.kfold_split(4, 5, seed=0)
    with pytest.raises(tune.KTooLarge):
        tune.kfold_split(10, 1, seed=0)


# -- cross-validation ----------------------------------------------------------


def test_cross_validate_constant_labels():
    rng = make_rng(1)
    X = rng.standard_normal((60, 3))
    y = np.zeros(60, dtype=np.int64)
    settings = tune.TrainSettings(epochs=60, batch_size=16)  # enough steps to learn the majority
    res = tune.cross_validate(make_dataset(X, y), "mlp", MLP_PARAMS, k=5, seed=0, settings=settings)
    assert not res.failed
    assert res.fold_scores == [1.0] * 5  # the net learns the majority class


def test_cross_validate_mean_is_fold_average():
    res = tune.cross_validate(separable_dataset(), "mlp", MLP_PARAMS, k=5, seed=1)
    assert res.mean == pytest.approx(float(np.mean(res.fold_scores)), abs=1e-15)
    assert res.std == pytest.approx(float(np.std(res.fold_scores)), abs=1e-15)
    assert len(res.fold_scores) == 5


def test_cross_validate_records_failure():
    bad = dict(MLP_PARAMS, optimizer="adam", hidden_layer_sizes=8)
    d = separable_dataset(n=20, width=2)
    res = tune.cross_validate(d, "cnn", {**bad, "filters": 4, "kernel_size": 30, "pool_size": 2}, k=4, seed=0)
    assert res.failed
    assert res.mean == -np.inf
    assert "kernel" in res.error


# -- grid search -----------------------------------------------------------------


def small_mlp_grid():
    return tune.ParamGrid(
        kind="mlp",
        values={
            "activation": ("relu", "tanh", "sigmoid"),
            "dropout": (0.1, 0.3, 0.5),
            "hidden_layer_sizes": (8,),
            "optimizer": ("sgd", "adam", "rmsprop"),
        },
    )


def test_grid_enumeration_count():
    grid = small_mlp_grid()
    assert grid.size() == 27
    assert len(tune.enumerate_grid(grid)) == 27


def test_grid_search_evaluates_every_combination():
    d = separable_dataset(n=40, width=3)
    settings = tune.TrainSettings(epochs=2, batch_size=16)
    results = tune.grid_search(d, small_mlp_grid(), seed=0, k=2, settings=settings)
    assert len(results) == 27
    keys = {tune._params_key(r.kind, r.params) for r in results}
    assert len(keys) == 27
    assert all(results[i].mean >= results[i + 1].mean for i in range(len(results) - 1))


def test_single_combination_grid():
    grid = tune.ParamGrid(
        kind="mlp",
        values={"activation": ("relu",), "dropout": (0.0,), "hidden_layer_sizes": (4,), "optimizer": ("adam",)},
    )
    results = tune.grid_search(separable_dataset(n=30, width=2), grid, seed=0, k=2,
                               settings=tune.TrainSettings(epochs=2))
    assert len(results) == 1


def test_grid_rank_ties_broken_by_enumeration_order():
    d = make_dataset(np.zeros((20, 2)), np.zeros(20, dtype=np.int64))
    grid = tune.ParamGrid(
        kind="mlp",
        values={"activation": ("relu", "tanh"), "dropout": (0.0,), "hidden_layer_sizes": (2,), "optimizer": ("sgd",)},
    )
    results = tune.grid_search(d, grid, seed=0, k=2, settings=tune.TrainSettings(epochs=1))
    assert results[0].mean == results[1].mean  # constant data -> identical scores
    assert results[0].enum_index < results[1].enum_index


def test_grid_validation():
    with pytest.raises(tune.DataError):
        tune.ParamGrid(kind="mlp", values={"activation": ()})
    with pytest.raises(tune.DataError):
        tune.ParamGrid(
            kind="mlp",
            values={"activation": ("swish",), "dropout": (0.1,), "hidden_layer_sizes": (4,), "optimizer": ("adam",)},
        )


# -- random search -----------------------------------------------------------------


def test_random_search_single_iteration():
    results = tune.random_search(
        separable_dataset(n=30, width=2), small_mlp_grid(), n_iter=1, seed=5, k=2,
        settings=tune.TrainSettings(epochs=1),
    )
    assert len(results) == 1


def test_random_search_candidate_sequence_deterministic():
    space = small_mlp_grid()
    a = tune.sample_candidates(space, 20, seed=7)
    b = tune.sample_candidates(space, 20, seed=7)
    assert a == b
    c = tune.sample_candidates(space, 20, seed=8)
    assert a != c


def test_random_search_covers_small_space_and_matches_grid_best():
    d = separable_dataset(n=60, width=3)
    space = tune.ParamGrid(
        kind="mlp",
        values={"activation": ("relu", "tanh"), "dropout": (0.0, 0.2), "hidden_layer_sizes": (8,),
                "optimizer": ("adam", "sgd")},
    )
    settings = tune.TrainSettings(epochs=3, batch_size=16)
    grid_best = tune.grid_search(d, space, seed=3, k=3, settings=settings)[0]
    random_best = tune.random_search(d, space, n_iter=100, seed=3, k=3, settings=settings)[0]
    # 100 draws over an 8-point space covers it: same winner within tolerance
    assert abs(random_best.mean - grid_best.mean) <= 0.02


def test_random_search_dedupes():
    space = tune.ParamGrid(
        kind="mlp",
        values={"activation": ("relu",), "dropout": (0.0,), "hidden_layer_sizes": (4,), "optimizer": ("adam",)},
    )
    assert len(tune.sample_candidates(space, 50, seed=0)) == 1


# -- early stopping and final training ------------------------------------------------


def test_early_stop_counter_semantics():
    monitor = tune.EarlyStopState(min_delta=0.01, patience=1)
    assert monitor.update(3.0) is False  # first observation improves
    assert monitor.update(2.0) is True  # strictly decreasing -> stop after epoch 2
    assert monitor.history == [3.0, 2.0]


def test_early_stop_resets_on_improvement():
    monitor = tune.EarlyStopState(min_delta=0.01, patience=2)
    assert monitor.update(0.5) is False
    assert monitor.update(0.5) is False  # below min_delta: counter 1
    assert monitor.update(0.52) is False  # improvement >= min_delta resets
    assert monitor.since_improvement == 0
    assert monitor.best == 0.52


def test_early_stop_small_improvement_does_not_reset():
    monitor = tune.EarlyStopState(min_delta=0.01, patience=2)
    monitor.update(0.5)
    assert monitor.update(0.505) is False  # +0.005 < min_delta
    assert monitor.update(0.509) is True  # second stall epoch hits patience


def test_train_final_runs_all_epochs_when_patient():
    d = separable_dataset(n=80, width=3)
    settings = tune.TrainSettings(epochs=6, patience=30, min_delta=0.01)
    _, history = tune.train_final(d, "mlp", MLP_PARAMS, settings=settings, seed=0)
    assert len(history.epochs) == 6
    assert not history.stopped_early


def test_train_final_converges_on_separable_data():
    d = separable_dataset(n=150, width=1, margin=3.0)
    params = dict(MLP_PARAMS, activation="tanh")
    settings = tune.TrainSettings(epochs=80, batch_size=16, val_fraction=0.2)
    net, history = tune.train_final(d, "mlp", params, settings=settings, seed=1)
    acc = accuracy_metric(d.y, net.predict_proba(d.X))
    assert acc == 1.0
    assert history.best_metric >= max(e["val_accuracy"] for e in history.epochs) - 1e-12


def test_train_final_returns_best_checkpoint_weights(tmp_path):
    d = separable_dataset(n=100, width=3, seed=4)
    ckpt = tmp_path / "model.ltck"
    settings = tune.TrainSettings(epochs=5)
    net, history = tune.train_final(d, "mlp", MLP_PARAMS, settings=settings, seed=2, checkpoint_path=ckpt)
    assert ckpt.exists()
    loaded, extra = load_checkpoint(ckpt)
    assert np.array_equal(loaded.predict_proba(d.X), net.predict_proba(d.X))
    assert extra["epoch"] == history.best_epoch
    assert extra["val_accuracy"] == history.best_metric


def test_train_final_deterministic():
    d = separable_dataset(n=90, width=3, seed=6)
    settings = tune.TrainSettings(epochs=4)
    net_a, hist_a = tune.train_final(d, "mlp", MLP_PARAMS, settings=settings, seed=3)
    net_b, hist_b = tune.train_final(d, "mlp", MLP_PARAMS, settings=settings, seed=3)
    assert hist_a.epochs == hist_b.epochs
    assert all(np.array_equal(a, b) for a, b in zip(net_a.get_weights(), net_b.get_weights()))


def test_cnn_candidate_spec_topology():
    spec = tune.candidate_spec(
        "cnn",
        {"activation": "relu", "dropout": 0.3, "filters": 32, "kernel_size": 5, "optimizer": "adam", "pool_size": 2},
        input_width=27,
    )
    kinds = [d[0] for d in spec.layers]
    assert kinds == ["conv1d", "maxpool1d", "dropout", "flatten", "dense", "dropout", "output"]
    assert spec.layers[4][1] == 64  # dense head width
