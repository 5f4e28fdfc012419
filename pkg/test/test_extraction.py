import numpy as np
import pytest

from richspec.errors import ConfigError, NumericalError, ValidationError
from richspec.extraction import (CCA, METHODS, PCA, PLS, component_scores,
                                 fit_cca, fit_extractor, fit_pca, fit_pls,
                                 transform, variance_table)

from .conftest import random_problem, synthetic


#: Components each method supports on 20x52 random problems.
COUNTS = {PCA: 4, PLS: 4, CCA: 2}


def assert_orthogonal_scores(model, X):
    T = transform(model, X)
    norms = np.linalg.norm(T, axis=0)
    G = T.T @ T
    for i in range(model.k):
        for j in range(i):
            assert abs(G[i, j]) <= 1e-8 * norms[i] * norms[j], (i, j)


def same_weights(a, b):
    return np.allclose(a.W, b.W, rtol=0, atol=1e-10)


@pytest.mark.parametrize('method', METHODS)
@pytest.mark.parametrize('seed', range(3))
def test_unit_weights_and_orthogonal_scores(method, seed):
    X, y = random_problem(seed)
    k = COUNTS[method]
    model = fit_extractor(method, X, y, k)
    assert model.method == method
    assert model.W.shape == (52, k)
    assert np.allclose(np.linalg.norm(model.W, axis=0), 1.0, atol=1e-10)
    assert_orthogonal_scores(model, X)


@pytest.mark.parametrize('method', METHODS)
def test_sign_convention(method):
    X, y = random_problem(1)
    k = COUNTS[method]
    W = fit_extractor(method, X, y, k).W
    rows = np.argmax(np.abs(W), axis=0)
    assert np.all(W[rows, np.arange(k)] > 0)


def test_cca_runs_out_of_directions():
    X, y = random_problem(0)
    fit_cca(X, y, 2)
    for k in (3, 4):
        with pytest.raises(NumericalError, match='degenerate direction'):
            fit_cca(X, y, k)


def test_pca_ignores_row_offset():
    X, _ = random_problem(15)
    model = fit_pca(X, 4)
    shifted = fit_pca(X + np.linspace(-3.0, 5.0, 52), 4)
    assert same_weights(model, shifted)
    assert np.allclose(model.eigenvalues, shifted.eigenvalues, rtol=1e-10)


@pytest.mark.parametrize('method, n, m, k', [
    (PLS, 20, 52, 4),
    (CCA, 40, 10, 1),
])
def test_supervised_weights_ignore_row_order(method, n, m, k):
    X, y = random_problem(16, n=n, m=m)
    perm = np.random.default_rng(16).permutation(n)
    a = fit_extractor(method, X, y, k)
    b = fit_extractor(method, X[perm], y[perm], k)
    assert same_weights(a, b)


def test_pca_reconstruction_error_decreases_with_k():
    X, _ = random_problem(17)
    Xc = X - X.mean(axis=0)
    errors = []
    for k in range(1, 11):
        W = fit_pca(X, k).W
        errors.append(np.linalg.norm(Xc - Xc @ W @ W.T))
    assert all(b <= a + 1e-10 for a, b in zip(errors, errors[1:]))


def test_pca_eigenvalues_descending():
    X, _ = random_problem(2)
    model = fit_pca(X, 5)
    assert np.all(np.diff(model.eigenvalues) <= 0)
    T = transform(model, X)
    assert np.allclose(T.var(axis=0, ddof=1), model.eigenvalues, rtol=1e-10)
    assert model.y_mean is None


def test_pca_scaled():
    X, _ = random_problem(3)
    X = X * np.linspace(1, 100, 52)
    model = fit_pca(X, 2, scale=True)
    assert model.x_scale is not None
    Z = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
    assert np.allclose(transform(model, X), Z @ model.W)


def test_pls_single_component_tracks_response():
    X, y = random_problem(4, n=30)
    T = transform(fit_pls(X, y, 1), X)
    assert abs(np.corrcoef(T[:, 0], y)[0, 1]) > 0.5


def test_pls_covariance_not_below_pca():
    X, y = random_problem(5)
    yc = y - y.mean()
    pls = transform(fit_pls(X, y, 1), X)[:, 0]
    pca = transform(fit_pca(X, 1), X)[:, 0]
    assert abs(pls @ yc) >= abs(pca @ yc)


def test_cca_correlation_not_below_pls():
    X, y = random_problem(6, n=40, m=10)
    cca = transform(fit_cca(X, y, 1), X)[:, 0]
    pls = transform(fit_pls(X, y, 1), X)[:, 0]
    assert abs(np.corrcoef(cca, y)[0, 1]) >= \
        abs(np.corrcoef(pls, y)[0, 1]) - 1e-12


def test_cca_ridge_when_underdetermined():
    X, y = random_problem(7, n=20, m=52)
    model = fit_cca(X, y, 2)
    assert model.ridge > 0
    assert_orthogonal_scores(model, X)
    X, y = random_problem(7, n=40, m=10)
    assert fit_cca(X, y, 1).ridge == 0.0
    with pytest.raises(NumericalError, match='degenerate direction'):
        fit_cca(X, y, 2)


@pytest.mark.parametrize('method', METHODS)
def test_insufficient_rank(method):
    X, y = random_problem(8, n=10, m=52)
    with pytest.raises(NumericalError, match='insufficient rank'):
        fit_extractor(method, X, y, 10)
    with pytest.raises(NumericalError, match='insufficient rank'):
        fit_extractor(method, X, y, 0)


def test_pca_rank_deficient():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((10, 2)) @ rng.standard_normal((2, 20))
    fit_pca(X, 2)
    with pytest.raises(NumericalError, match='insufficient rank'):
        fit_pca(X, 3)


def test_zero_variance():
    X = np.ones((5, 4))
    with pytest.raises(NumericalError, match='zero variance'):
        fit_pca(X, 1)


@pytest.mark.parametrize('method', [CCA, PLS])
def test_zero_response_variance(method):
    X, _ = random_problem(10)
    with pytest.raises(NumericalError, match='zero response variance'):
        fit_extractor(method, X, np.full(20, 7.0), 1)


def test_pls_degenerate_direction():
    rng = np.random.default_rng(11)
    X = np.outer(rng.standard_normal(12), rng.standard_normal(6))
    y = rng.standard_normal(12)
    fit_pls(X, y, 1)
    with pytest.raises(NumericalError, match='degenerate direction'):
        fit_pls(X, y, 2)


def test_supervised_needs_three_rows():
    with pytest.raises(ConfigError):
        fit_pls(np.eye(2), [1.0, 2.0], 1)
    with pytest.raises(ValidationError):
        fit_pls(np.eye(4), [1.0, 2.0], 1)


def test_unknown_method():
    with pytest.raises(ConfigError, match='unknown extraction method'):
        fit_extractor('ica', np.eye(4), [1, 2, 3, 4], 1)


def test_transform_dimension_mismatch():
    X, y = random_problem(12)
    model = fit_pls(X, y, 2)
    with pytest.raises(ValidationError, match='dimension mismatch'):
        transform(model, X[:, :10])


def test_transform_new_rows_use_training_center():
    X, y = random_problem(13)
    model = fit_pls(X, y, 2)
    x_new = X[:1] + 1.0
    expected = (x_new - X.mean(axis=0)) @ model.W
    assert np.allclose(transform(model, x_new), expected)


def test_variance_table():
    X, y = random_problem(14)
    for method in METHODS:
        k = COUNTS[method]
        model = fit_extractor(method, X, y, k)
        rows = variance_table(model, X)
        assert [row.component_index for row in rows] == list(range(1, k + 1))
        assert np.allclose(np.cumsum([r.pct_variance for r in rows]),
                           [r.cumulative_pct for r in rows])
        assert rows[-1].cumulative_pct <= 100.0 + 1e-9
    pca_rows = variance_table(fit_pca(X, 19), X)
    assert pca_rows[-1].cumulative_pct == pytest.approx(100.0)


def test_component_scores():
    d = synthetic(seed=5, n=12)
    model = fit_extractor(PCA, d.X, d.y, 2)
    plot_ids, T = component_scores(model, d)
    assert plot_ids == d.plot_ids
    assert T.shape == (12, 2)
