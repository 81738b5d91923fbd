import itertools

import numpy as np
import pytest

from lucidtab.errors import DataError
from lucidtab.explain import (
    Attribution,
    BackgroundSet,
    CoalitionMask,
    DegeneratePerturbations,
    EmptyBackground,
    LimeConfig,
    TooManyFeatures,
    exact_shapley,
    global_mean_abs_shap,
    kernel_shap,
    lime_explain,
    masked_predict,
    permutation_importance,
)
from lucidtab.metrics import accuracy_metric
from lucidtab.rng import make_rng


def linear(w, b=0.0):
    w = np.asarray(w, dtype=np.float64)

    def model(X):
        return np.atleast_2d(np.asarray(X, dtype=np.float64)) @ w + b

    return model


def shapley_permutation_oracle(model, x, bg, n):
    """Independent Shapley values via the permutation-average formulation:
    phi_i = mean over orderings of [v(pre_i + i) - v(pre_i)]."""
    phi = np.zeros(n)
    orderings = list(itertools.permutations(range(n)))
    for order in orderings:
        present: list[int] = []
        prev = masked_predict(model, x, CoalitionMask.from_indices(present, n), bg)
        for feat in order:
            present.append(feat)
            cur = masked_predict(model, x, CoalitionMask.from_indices(present, n), bg)
            phi[feat] += cur - prev
            prev = cur
    return phi / len(orderings)


def random_game(rng, n):
    """A nonlinear but cheap model plus instance and background rows."""
    w1 = rng.standard_normal(n)
    w2 = rng.standard_normal(n)
    c = rng.standard_normal()

    def model(X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.tanh(X @ w1) + (X @ w2) ** 2 * 0.1 + c

    x = rng.standard_normal(n)
    bg = BackgroundSet(rng.standard_normal((4, n)))
    return model, x, bg


# -- masking -------------------------------------------------------------------


def test_masked_predict_full_and_empty():
    model = linear([2.0, 3.0], b=1.0)
    bg = BackgroundSet(np.array([[1.0, 1.0], [3.0, 3.0]]))
    x = np.array([5.0, 5.0])
    full = CoalitionMask(np.array([True, True]))
    empty = CoalitionMask(np.array([False, False]))
    assert masked_predict(model, x, full, bg) == pytest.approx(float(model(x[None])[0]), abs=1e-12)
    assert masked_predict(model, x, empty, bg) == pytest.approx(float(np.mean(model(bg.rows))), abs=1e-12)


def test_masked_predict_partial_mask():
    model = linear([2.0, 3.0])
    bg = BackgroundSet(np.zeros((1, 2)))
    out = masked_predict(model, np.array([1.0, 1.0]), CoalitionMask(np.array([True, False])), bg)
    assert out == pytest.approx(2.0, abs=1e-12)


def test_background_sampling():
    rng = make_rng(0)
    X = rng.standard_normal((50, 3))
    bg = BackgroundSet.sample(X, 10, seed=1)
    assert len(bg) == 10
    again = BackgroundSet.sample(X, 10, seed=1)
    assert np.array_equal(bg.rows, again.rows)
    with pytest.raises(EmptyBackground):
        BackgroundSet(np.empty((0, 3)))


# -- exact Shapley ---------------------------------------------------------------


def test_exact_linear_model_hand_enumerated():
    model = linear([2.0, 3.0])
    bg = BackgroundSet(np.zeros((1, 2)))
    attr = exact_shapley(model, np.array([1.0, 1.0]), bg)
    assert attr.phi == pytest.approx([2.0, 3.0], abs=1e-12)
    assert attr.base_value == pytest.approx(0.0, abs=1e-12)
    assert attr.predicted == pytest.approx(5.0, abs=1e-12)


def test_exact_dummy_feature_is_exactly_zero():
    def model(X):
        X = np.atleast_2d(X)
        return X[:, 0] ** 2 + 3.0  # ignores feature 1

    rng = make_rng(1)
    bg = BackgroundSet(rng.standard_normal((5, 2)))
    attr = exact_shapley(model, np.array([2.0, -7.0]), bg)
    assert attr.phi[1] == 0.0


def test_exact_efficiency_is_algebraic():
    rng = make_rng(2)
    for _ in range(25):
        n = int(rng.integers(2, 7))
        model, x, bg = random_game(rng, n)
        attr = exact_shapley(model, x, bg)
        assert abs(attr.efficiency_gap) <= 1e-10


def test_exact_matches_permutation_oracle():
    rng = make_rng(3)
    for _ in range(10):
        n = int(rng.integers(2, 6))
        model, x, bg = random_game(rng, n)
        attr = exact_shapley(model, x, bg)
        oracle = shapley_permutation_oracle(model, x, bg, n)
        assert attr.phi == pytest.approx(oracle, abs=1e-10)


def test_exact_symmetry():
    def model(X):
        X = np.atleast_2d(X)
        return np.sin(X[:, 0] + X[:, 1]) + X[:, 2]

    bg = BackgroundSet(np.array([[0.5, 0.5, 0.0]]))
    attr = exact_shapley(model, np.array([1.3, 1.3, 2.0]), bg)
    assert attr.phi[0] == pytest.approx(attr.phi[1], abs=1e-12)


def test_exact_linearity_across_models():
    rng = make_rng(4)
    n = 4
    f, x, bg = random_game(rng, n)
    g, _, _ = random_game(rng, n)

    def f_plus_g(X):
        return f(X) + g(X)

    phi_f = exact_shapley(f, x, bg).phi
    phi_g = exact_shapley(g, x, bg).phi
    phi_sum = exact_shapley(f_plus_g, x, bg).phi
    assert phi_sum == pytest.approx(phi_f + phi_g, abs=1e-10)


def test_exact_feature_subset_pins_others():
    model = linear([2.0, 3.0, 5.0])
    bg = BackgroundSet(np.zeros((1, 3)))
    x = np.array([1.0, 1.0, 1.0])
    attr = exact_shapley(model, x, bg, feature_subset=[0, 1])
    # feature 2 stays at its instance value in every coalition
    assert attr.feature_names == ("f0", "f1")
    assert attr.phi == pytest.approx([2.0, 3.0], abs=1e-12)
    assert attr.base_value == pytest.approx(5.0, abs=1e-12)


def test_exact_feature_limit():
    model = linear(np.ones(25))
    bg = BackgroundSet(np.zeros((1, 25)))
    with pytest.raises(TooManyFeatures):
        exact_shapley(model, np.ones(25), bg)


# -- kernel SHAP ------------------------------------------------------------------


def test_kernel_exhaustive_matches_exact_small():
    rng = make_rng(5)
    for n in range(2, 8):
        model, x, bg = random_game(rng, n)
        exact = exact_shapley(model, x, bg)
        kernel = kernel_shap(model, x, bg, n_coalitions=2**n, seed=0)
        assert kernel.phi == pytest.approx(exact.phi, abs=1e-6)


def test_kernel_linear_analytic():
    w = np.array([1.5, -2.0, 0.25])
    model = linear(w, b=4.0)
    rng = make_rng(6)
    bg = BackgroundSet(rng.standard_normal((20, 3)))
    x = np.array([2.0, 1.0, -1.0])
    attr = kernel_shap(model, x, bg, n_coalitions=8, seed=0)
    assert attr.phi == pytest.approx(w * (x - bg.means), abs=1e-8)


def test_kernel_symmetry():
    def model(X):
        X = np.atleast_2d(X)
        return X[:, 0] + X[:, 1]

    bg = BackgroundSet(np.array([[0.0, 0.0]]))
    attr = kernel_shap(model, np.array([3.0, 3.0]), bg, n_coalitions=4, seed=0)
    assert attr.phi[0] == pytest.approx(attr.phi[1], abs=1e-6)


def test_kernel_deterministic_under_seed():
    rng = make_rng(7)
    model, x, bg = random_game(rng, 12)
    a = kernel_shap(model, x, bg, n_coalitions=200, seed=11)
    b = kernel_shap(model, x, bg, n_coalitions=200, seed=11)
    assert np.array_equal(a.phi, b.phi)


def test_kernel_sampled_budget_tracks_exact():
    rng = make_rng(8)
    model, x, bg = random_game(rng, 10)
    exact = exact_shapley(model, x, bg)
    sampled = kernel_shap(model, x, bg, n_coalitions=600, seed=3)
    assert sampled.phi == pytest.approx(exact.phi, abs=0.1)
    assert abs(sampled.efficiency_gap) <= 1e-10  # constraint holds regardless of budget
    # an exhaustive budget collapses the estimator onto the exact values
    exhaustive = kernel_shap(model, x, bg, n_coalitions=2**10, seed=3)
    assert exhaustive.phi == pytest.approx(exact.phi, abs=1e-6)


def test_kernel_input_validation():
    model = linear([1.0, 1.0])
    bg = BackgroundSet(np.zeros((1, 2)))
    with pytest.raises(DataError):
        kernel_shap(model, np.ones(1), bg)
    with pytest.raises(DataError):
        kernel_shap(model, np.ones(2), bg, n_coalitions=1)


# -- LIME ----------------------------------------------------------------------------


def test_lime_recovers_linear_black_box():
    rng = make_rng(9)
    w = np.array([2.0, -1.0, 0.5, 3.0])
    model = linear(w, b=0.7)
    x = rng.standard_normal(4)
    scales = np.ones(4)
    cfg = LimeConfig(n_samples=5000, max_features=None, ridge=1e-3)
    res = lime_explain(model, x, scales, cfg, seed=0)
    assert res.attribution.phi == pytest.approx(w, rel=0.05)
    assert res.fidelity > 0.99


def test_lime_wide_kernel_approaches_global_least_squares():
    rng = make_rng(10)
    w = np.array([1.0, -2.0])
    model = linear(w)
    x = np.zeros(2)
    cfg_wide = LimeConfig(n_samples=2000, kernel_width=1e6, max_features=None, ridge=1e-9)
    res = lime_explain(model, x, np.ones(2), cfg_wide, seed=1)
    # with sigma -> inf all weights approach 1; a linear target is then
    # recovered exactly by plain least squares
    assert res.attribution.phi == pytest.approx(w, rel=1e-4)


def test_lime_determinism():
    model = linear([1.0, 2.0, 3.0])
    cfg = LimeConfig(n_samples=200, max_features=2)
    a = lime_explain(model, np.ones(3), np.ones(3), cfg, seed=5)
    b = lime_explain(model, np.ones(3), np.ones(3), cfg, seed=5)
    assert np.array_equal(a.attribution.phi, b.attribution.phi)
    assert a.fidelity == b.fidelity


def test_lime_complexity_cap_keeps_top_k():
    w = np.array([5.0, 0.01, 4.0, 0.02])
    model = linear(w)
    cfg = LimeConfig(n_samples=3000, max_features=2)
    res = lime_explain(model, np.zeros(4), np.ones(4), cfg, seed=2)
    assert set(res.kept) == {"f0", "f2"}
    assert res.attribution.phi[1] == 0.0 and res.attribution.phi[3] == 0.0


def test_lime_degenerate_kernel_width():
    model = linear([1.0, 1.0])
    cfg = LimeConfig(n_samples=50, kernel_width=1e-9)
    with pytest.raises(DegeneratePerturbations):
        lime_explain(model, np.zeros(2), np.ones(2), cfg, seed=3)


def test_lime_halving_width_never_favors_far_samples():
    rng = make_rng(11)
    Z = rng.standard_normal((400, 3))
    x = np.zeros(3)
    d2 = np.sum((Z - x) ** 2, axis=1)
    for width in (2.0, 1.0, 0.5):
        w_wide = np.exp(-d2 / width**2)
        w_narrow = np.exp(-d2 / (width / 2) ** 2)
        median = np.median(np.sqrt(d2))
        far = np.sqrt(d2) > median
        assert (w_narrow[far] <= w_wide[far] + 1e-15).all()


def test_lime_config_validation():
    with pytest.raises(DataError):
        LimeConfig(n_samples=5)
    with pytest.raises(DataError):
        LimeConfig(kernel_width=-1.0)


# -- permutation importance -----------------------------------------------------------


def test_permutation_importance_constant_model():
    def model(X):
        return np.full(np.atleast_2d(X).shape[0], 0.7)

    rng = make_rng(12)
    X = rng.standard_normal((40, 3))
    y = rng.integers(0, 2, size=40)
    scores = permutation_importance(model, X, y, accuracy_metric, repeats=3, seed=0)
    assert all(fs.score == 0.0 for fs in scores)


def test_permutation_importance_single_informative_feature():
    rng = make_rng(13)
    X = rng.standard_normal((300, 3))
    y = (X[:, 1] > 0).astype(np.int64)

    def model(Xin):
        return 1.0 / (1.0 + np.exp(-4.0 * np.atleast_2d(Xin)[:, 1]))

    scores = permutation_importance(model, X, y, accuracy_metric, repeats=5, seed=1, feature_names=["a", "b", "c"])
    assert scores[0].name == "b"
    assert scores[0].rank == 1
    assert scores[0].score > 0.3


def test_permutation_importance_deterministic():
    rng = make_rng(14)
    X = rng.standard_normal((60, 4))
    y = (X[:, 0] > 0).astype(np.int64)
    model = linear([3.0, 0.0, 0.0, 0.0])
    a = permutation_importance(model, X, y, accuracy_metric, repeats=5, seed=9)
    b = permutation_importance(model, X, y, accuracy_metric, repeats=5, seed=9)
    assert [(s.name, s.score, s.rank) for s in a] == [(s.name, s.score, s.rank) for s in b]


# -- global summaries --------------------------------------------------------------------


def test_global_mean_abs_ignoring_model_is_zero():
    def model(X):
        return np.full(np.atleast_2d(X).shape[0], 0.5)

    rng = make_rng(15)
    X = rng.standard_normal((5, 3))
    bg = BackgroundSet(rng.standard_normal((4, 3)))
    scores = global_mean_abs_shap(model, X, bg, method="exact", seed=0)
    assert all(fs.score == 0.0 for fs in scores)


def test_global_mean_abs_single_instance_equals_abs_phi():
    model = linear([2.0, -3.0])
    bg = BackgroundSet(np.zeros((1, 2)))
    x = np.array([[1.0, 1.0]])
    scores = global_mean_abs_shap(model, x, bg, method="exact", seed=0)
    by_name = {fs.name: fs.score for fs in scores}
    assert by_name == pytest.approx({"f0": 2.0, "f1": 3.0}, abs=1e-10)
    assert scores[0].name == "f1"  # sorted by rank: |-3| > |2|


def test_attribution_efficiency_gap_field():
    attr = Attribution(feature_names=("a",), phi=np.array([1.0]), base_value=0.5, predicted=1.5)
    assert attr.efficiency_gap == 0.0
