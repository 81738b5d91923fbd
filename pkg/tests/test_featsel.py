import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lucidtab import featsel as fs
from lucidtab.preprocess import ZeroVariance
from tests.conftest import make_dataset


# -- Pearson correlation ------------------------------------------------------


def pearson_oracle(x, y):
    """Direct evaluation of the correlation formula, kept independent of the
    implementation under test."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    num = np.sum((x - x.mean()) * (y - y.mean()))
    den = math.sqrt(np.sum((x - x.mean()) ** 2) * np.sum((y - y.mean()) ** 2))
    return num / den


def test_pearson_self_and_negation():
    x = np.array([1.0, 4.0, 2.0, 8.0])
    assert fs.pearson_corr(x, x) == pytest.approx(1.0, abs=1e-14)
    assert fs.pearson_corr(x, -x) == pytest.approx(-1.0, abs=1e-14)


def test_pearson_frozen_values():
    x = [1.0, 2.0, 3.0]
    # oracle-evaluated: r([1,2,3],[2,4,7]) = 0.9933992677987828
    assert fs.pearson_corr(x, [2.0, 4.0, 7.0]) == pytest.approx(0.9933992677987828, abs=1e-12)
    assert fs.pearson_corr(x, [2.0, 4.0, 8.0]) == pytest.approx(0.9819805060619659, abs=1e-12)
    assert fs.pearson_corr(x, [2.0, 4.0, 7.0]) == pytest.approx(pearson_oracle(x, [2.0, 4.0, 7.0]), abs=1e-14)


def test_pearson_errors():
    with pytest.raises(ZeroVariance):
        fs.pearson_corr([1.0, 1.0], [2.0, 3.0])
    with pytest.raises(fs.DataError):
        fs.pearson_corr([1.0], [2.0])


@given(
    data=st.lists(
        st.tuples(st.integers(-100, 100), st.integers(-100, 100)),
        min_size=3,
        max_size=30,
    ),
    a=st.floats(min_value=-50, max_value=50).filter(lambda v: abs(v) > 1e-2),
    b=st.floats(min_value=-50, max_value=50),
)
@settings(max_examples=60, deadline=None)
def test_pearson_symmetry_and_scale_invariance(data, a, b):
    # integer-valued samples keep the shifted copy a*x + b well conditioned;
    # arbitrary floats can lose x's variation to rounding against b
    x = np.array([p[0] for p in data], dtype=np.float64)
    y = np.array([p[1] for p in data], dtype=np.float64)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return
    r = fs.pearson_corr(x, y)
    assert -1.0 <= r <= 1.0
    assert fs.pearson_corr(y, x) == pytest.approx(r, abs=1e-12)
    assert fs.pearson_corr(a * x + b, y) == pytest.approx(math.copysign(1.0, a) * r, abs=1e-8)


# -- chi-square selection ------------------------------------------------------


def chi2_oracle(col, y):
    """Class-conditional sum statistic computed longhand on one column."""
    col = np.asarray(col, float)
    y = np.asarray(y)
    total = col.sum()
    score = 0.0
    for cls in (0, 1):
        prior = np.mean(y == cls)
        observed = col[y == cls].sum()
        expected = prior * total
        if expected > 0:
            score += (observed - expected) ** 2 / expected
    return score


def test_chi2_label_copy_beats_constant():
    y = np.array([0, 1, 0, 1, 1, 0])
    X = np.column_stack([y.astype(float), np.ones(6)])
    d = make_dataset(X, y)
    scores, selected = fs.chi2_select(d, 1)
    assert selected == ["f0"]
    assert scores[0].rank == 1 and scores[1].rank == 2
    # rescaled copy equals the raw columns here (already in [0, 1])
    assert scores[0].score == pytest.approx(chi2_oracle(y.astype(float), y), abs=1e-12)
    assert scores[1].score == pytest.approx(0.0, abs=1e-12)


def test_chi2_uninformative_feature_scores_zero():
    y = np.array([0, 0, 1, 1])
    X = np.column_stack([np.array([1.0, 3.0, 1.0, 3.0]), np.array([0.0, 1.0, 2.0, 5.0])])
    d = make_dataset(X, y)
    scores, selected = fs.chi2_select(d, 1)
    # feature 0 has identical class-conditional sums -> score 0, never first
    assert scores[0].score == pytest.approx(0.0, abs=1e-12)
    assert selected == ["f1"]


def test_chi2_all_features_when_k_max(wdbc_standardized):
    train, _ = wdbc_standardized
    scores, selected = fs.chi2_select(train, 30)
    assert sorted(selected) == sorted(train.feature_names)
    assert len(scores) == 30


def test_chi2_nested_selection(wdbc_standardized):
    train, _ = wdbc_standardized
    previous: set[str] = set()
    for k in (5, 10, 20, 30):
        _, selected = fs.chi2_select(train, k)
        assert previous <= set(selected)
        previous = set(selected)


def test_chi2_out_of_range_k(wdbc_standardized):
    train, _ = wdbc_standardized
    with pytest.raises(fs.KOutOfRange):
        fs.chi2_select(train, 0)
    with pytest.raises(fs.KOutOfRange):
        fs.chi2_select(train, 31)


def test_chi2_scores_reject_negatives():
    with pytest.raises(fs.NegativeInput):
        fs.chi2_scores(np.array([[-1.0], [2.0]]), np.array([0, 1]), ["f0"])


# -- logistic regression -------------------------------------------------------


def test_logistic_separable_1d():
    X = np.array([[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    model = fs.logistic_fit(X, y, fs.LogisticConfig(max_iters=5000))
    preds = fs.logistic_predict_proba(model, X) >= 0.5
    assert (preds == y.astype(bool)).all()


def test_logistic_zero_iterations():
    X = np.array([[1.0], [2.0]])
    y = np.array([0, 1])
    with pytest.warns(fs.NonConvergence):
        model = fs.logistic_fit(X, y, fs.LogisticConfig(max_iters=0))
    assert model.weights.tolist() == [0.0]
    assert fs.logistic_predict_proba(model, X).tolist() == [0.5, 0.5]


def test_logistic_gradient_vanishes_at_solution():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((60, 3))
    y = (X @ np.array([1.0, -2.0, 0.5]) > 0).astype(np.int64)
    config = fs.LogisticConfig(max_iters=50000, tol=1e-8, l2=0.05)
    model = fs.logistic_fit(X, y, config)
    assert model.converged

    # finite-difference check of the loss gradient at the returned weights
    def loss(w, b):
        return fs.logistic_loss(X, y, w, b, config.l2)

    h = 1e-6
    grad_fd = np.empty(4)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        grad_fd[j] = (loss(model.weights + e, model.bias) - loss(model.weights - e, model.bias)) / (2 * h)
    grad_fd[3] = (loss(model.weights, model.bias + h) - loss(model.weights, model.bias - h)) / (2 * h)
    assert np.linalg.norm(grad_fd) <= 10 * config.tol


def test_logistic_nonconvergence_returns_best_iterate():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((40, 2))
    y = (X[:, 0] > 0).astype(np.int64)
    with pytest.warns(fs.NonConvergence):
        model = fs.logistic_fit(X, y, fs.LogisticConfig(max_iters=3, tol=1e-12))
    assert not model.converged
    assert np.isfinite(model.weights).all()


# -- recursive feature elimination ----------------------------------------------


def test_rfe_keep_all_ranks_one():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((50, 4))
    y = (X[:, 0] > 0).astype(np.int64)
    scores = fs.rfe(make_dataset(X, y), 4)
    assert all(s.rank == 1 for s in scores)


def test_rfe_drops_noise_feature_first():
    rng = np.random.default_rng(5)
    n = 200
    informative = rng.standard_normal((n, 2))
    y = ((informative[:, 0] + informative[:, 1]) > 0).astype(np.int64)
    noise = rng.standard_normal((n, 1)) * 0.01
    X = np.hstack([informative, noise])
    X = (X - X.mean(0)) / X.std(0)
    scores = fs.rfe(make_dataset(X, y), 2)
    by_name = {s.name: s.rank for s in scores}
    assert by_name["f2"] == 2  # pure-noise column eliminated (only elimination round)
    assert by_name["f0"] == by_name["f1"] == 1

    # the fitted model's weight ordering confirms the elimination choice
    model = fs.logistic_fit(X, y)
    assert np.argmin(np.abs(model.weights)) == 2


def test_rfe_rank_structure(wdbc_standardized):
    train, _ = wdbc_standardized
    scores = fs.rfe(train, 27)
    ranks = sorted(s.rank for s in scores)
    assert ranks.count(1) == 27
    assert sorted(r for r in ranks if r > 1) == [2, 3, 4]


def test_rfe_k_out_of_range(wdbc_standardized):
    train, _ = wdbc_standardized
    with pytest.raises(fs.KOutOfRange):
        fs.rfe(train, 0)


# -- PCA and the Jacobi eigensolver ----------------------------------------------


def test_jacobi_analytic_2x2():
    # [[2, 1], [1, 2]] has eigenvalues 3 and 1 with eigenvectors (1,1)/sqrt2
    # and (-1,1)/sqrt2 (worked by hand from the characteristic polynomial)
    eigvals, V = fs.jacobi_eigh(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert eigvals == pytest.approx([3.0, 1.0], abs=1e-12)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    assert np.abs(V[:, 0]) == pytest.approx([inv_sqrt2, inv_sqrt2], abs=1e-12)
    assert V.T @ V == pytest.approx(np.eye(2), abs=1e-12)


def test_jacobi_matches_reconstruction():
    rng = np.random.default_rng(11)
    B = rng.standard_normal((12, 12))
    A = (B + B.T) / 2.0
    eigvals, V = fs.jacobi_eigh(A.copy())
    assert np.abs(V @ np.diag(eigvals) @ V.T - A).max() < 1e-9
    assert np.abs(V.T @ V - np.eye(12)).max() < 1e-10
    assert (np.diff(eigvals) <= 1e-12).all()  # descending


def test_jacobi_rejects_asymmetric():
    with pytest.raises(fs.DataError):
        fs.jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_pca_line_y_equals_x():
    rng = np.random.default_rng(2)
    t = rng.standard_normal(300)
    X = np.column_stack([t, t])
    model = fs.pca_fit(X)
    assert model.explained_variance_ratio[0] == pytest.approx(1.0, abs=1e-12)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    assert np.abs(model.components[:, 0]) == pytest.approx([inv_sqrt2, inv_sqrt2], abs=1e-10)
    assert model.components[np.argmax(np.abs(model.components[:, 0])), 0] > 0  # sign convention


def test_pca_full_reconstruction(wdbc_standardized):
    train, _ = wdbc_standardized
    model = fs.pca_fit(train.X)
    Y = fs.pca_transform(model, train.X)
    back = fs.pca_inverse_transform(model, Y)
    assert np.abs(back - train.X).max() <= 1e-8


def test_pca_transformed_covariance_diagonal(wdbc_standardized):
    train, _ = wdbc_standardized
    model = fs.pca_fit(train.X)
    Y = fs.pca_transform(model, train.X)
    C = (Y - Y.mean(0)).T @ (Y - Y.mean(0)) / Y.shape[0]
    off = C - np.diag(np.diag(C))
    assert np.abs(off).max() <= 1e-8
    assert np.diag(C) == pytest.approx(model.eigenvalues, abs=1e-8)


def test_pca_isotropic_gaussian_monte_carlo():
    X = np.random.default_rng(123).standard_normal((10000, 2))
    model = fs.pca_fit(X)
    assert model.explained_variance_ratio == pytest.approx([0.5, 0.5], abs=0.02)


def test_pca_ratio_properties(wdbc_standardized):
    train, _ = wdbc_standardized
    model = fs.pca_fit(train.X)
    ratios = model.explained_variance_ratio
    assert (ratios >= 0).all()
    assert (np.diff(ratios) <= 1e-12).all()
    assert ratios.sum() <= 1.0 + 1e-10
    with pytest.raises(fs.KOutOfRange):
        fs.pca_transform(model, train.X, 31)
