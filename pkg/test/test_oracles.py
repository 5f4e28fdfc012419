"""Checks against independent dense-linear-algebra computations."""
import time

import numpy as np
import pytest

from richspec.errors import NumericalError
from richspec.extraction import fit_cca, fit_pca, fit_pls, variance_table
from richspec.forest import fit_rfr
from richspec.kernel import (KernelConfig, free_parameters, get_theta,
                             kernel_eval, with_theta)
from richspec.preprocess import (BandMask, apply_band_mask,
                                 gaussian_resample, load_default_srf,
                                 make_bin_srf)
from richspec.regression import fit_krr, log_marginal_likelihood, predict

from .conftest import make_grid, random_matrix, random_problem, small_kernel


def sign_fixed(w):
    w = w / np.linalg.norm(w)
    return w if w[np.argmax(np.abs(w))] > 0 else -w


def check_pca_oracle(seed):
    X = random_matrix(seed, 20, 52)
    model = fit_pca(X, 5)
    evals, evecs = np.linalg.eigh(np.cov(X, rowvar=False))
    evals, evecs = evals[::-1][:5], evecs[:, ::-1][:, :5]
    assert np.allclose(model.eigenvalues, evals, rtol=1e-8, atol=0)
    for j in range(5):
        assert abs(model.W[:, j] @ evecs[:, j]) == pytest.approx(1.0,
                                                                 abs=1e-8)
    total = np.trace(np.cov(X, rowvar=False))
    rows = variance_table(model, X)
    pct = [row.pct_variance for row in rows]
    assert pct == pytest.approx(evals / total * 100, rel=1e-8)
    assert rows[-1].cumulative_pct == pytest.approx(
        evals.sum() / total * 100, rel=1e-8)


@pytest.mark.parametrize('seed', range(20))
def test_pca_matches_covariance_eigenpairs(seed):
    check_pca_oracle(seed)


def test_pca_oracle_runtime():
    start = time.perf_counter()
    for seed in range(20):
        check_pca_oracle(seed)
    assert time.perf_counter() - start < 5.0


@pytest.mark.parametrize('seed', range(20))
def test_pls_first_weight_is_cross_covariance(seed):
    X, y = random_problem(seed)
    Xc, yc = X - X.mean(axis=0), y - y.mean()
    model = fit_pls(X, y, 3)
    assert np.allclose(model.W[:, 0], sign_fixed(Xc.T @ yc), rtol=0,
                       atol=1e-10)


def test_cca_orthonormal_inputs():
    A = random_matrix(0, 30, 5)
    Q, _ = np.linalg.qr(A - A.mean(axis=0))
    y = random_matrix(1, 30, 1)[:, 0] + Q[:, 0]
    model = fit_cca(Q, y, 1)
    assert model.ridge == 0.0
    assert np.allclose(model.W[:, 0], sign_fixed(Q.T @ (y - y.mean())),
                       rtol=0, atol=1e-8)


@pytest.mark.parametrize('seed', range(20))
def test_cca_first_weight_solves_normal_equations(seed):
    X = random_matrix(seed, 40, 6)
    y = X @ np.arange(1.0, 7.0) + 2.0 * random_matrix(seed + 50, 40, 1)[:, 0]
    Xc, yc = X - X.mean(axis=0), y - y.mean()
    model = fit_cca(X, y, 1)
    expected = sign_fixed(np.linalg.solve(Xc.T @ Xc, Xc.T @ yc))
    assert np.allclose(model.W[:, 0], expected, rtol=0, atol=1e-8)
    best = abs(np.corrcoef(Xc @ model.W[:, 0], y)[0, 1])
    rng = np.random.default_rng(seed)
    for _ in range(20):
        other = abs(np.corrcoef(Xc @ rng.standard_normal(6), y)[0, 1])
        assert other <= best + 1e-12
    # Full-rank inputs leave no correlation for a second direction.
    with pytest.raises(NumericalError, match='degenerate direction'):
        fit_cca(X, y, 2)


@pytest.mark.parametrize('seed', range(20))
def test_krr_matches_dense_solve(seed):
    T = random_matrix(seed, 25, 3)
    y = np.sin(T[:, 0]) + T[:, 1] ** 2 + 5.0
    cfg = small_kernel()
    model = fit_krr(T, y, cfg, lam=0.3)
    K = np.array([[kernel_eval(cfg, a, b) for b in T] for a in T])
    yc = y - y.mean()
    residual = (K + 0.3 * np.eye(25)) @ model.alpha - yc
    assert np.linalg.norm(residual) <= 1e-8 * np.linalg.norm(yc)
    T_new = random_matrix(seed + 10, 4, 3)
    K_new = np.array([[kernel_eval(cfg, a, b) for b in T] for a in T_new])
    assert np.allclose(predict(model, T_new), K_new @ model.alpha + y.mean(),
                       rtol=1e-10)


def test_krr_recovers_linear_function():
    T = random_matrix(3, 30, 3)
    y = T @ np.array([2.0, -1.0, 0.5]) + 5.0
    cfg = KernelConfig(sigma=1.0, terms=('dot',))
    model = fit_krr(T, y, cfg, lam=1e-10)
    error = np.sqrt(np.mean((predict(model, T) - y) ** 2))
    assert error <= 1e-6 * y.std()


@pytest.mark.parametrize('seed', range(10))
def test_log_marginal_likelihood_gradient(seed):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((15, 2))
    yc = rng.standard_normal(15)
    yc -= yc.mean()
    cfg = small_kernel()
    names = free_parameters(cfg)
    assert len(names) == 3
    h = 1e-5
    for _ in range(5):
        theta = get_theta(cfg, names) + rng.uniform(-1.0, 1.0, len(names))
        point = with_theta(cfg, names, theta)
        _, gradient = log_marginal_likelihood(T, yc, point, 0.5,
                                              eval_gradient=True)
        numeric = []
        for i in range(len(names)):
            step = np.zeros(len(names))
            step[i] = h
            up = log_marginal_likelihood(
                T, yc, with_theta(cfg, names, theta + step), 0.5)
            down = log_marginal_likelihood(
                T, yc, with_theta(cfg, names, theta - step), 0.5)
            numeric.append((up - down) / (2 * h))
        assert np.allclose(gradient, numeric, rtol=1e-4, atol=1e-6)


def test_single_unbagged_tree_reproduces_training_data():
    T = random_matrix(4, 30, 3)
    y = random_matrix(5, 30, 1)[:, 0]
    model = fit_rfr(T, y, d=1, bootstrap=False, max_features=1.0)
    assert np.array_equal(predict(model, T), y)


def test_forest_is_reproducible_across_threads():
    T = random_matrix(6, 40, 2)
    y = T[:, 0] - T[:, 1] ** 2
    one = fit_rfr(T, y, d=100, seed=8, threads=1)
    many = fit_rfr(T, y, d=100, seed=8, threads=4)
    T_new = random_matrix(7, 10, 2)
    assert np.array_equal(predict(one, T_new), predict(many, T_new))


def test_mask_leaves_fifty_two_bands():
    kept = list(np.arange(420.0, 931.0, 10.0))
    grid = make_grid(sorted(kept + [759.0, 769.0, 933.4, 943.4, 953.2,
                                    402.8, 410.3, 999.5]))
    assert grid.band_count == 60
    values = np.random.default_rng(0).uniform(0.05, 0.5, 60)
    out, reduced = apply_band_mask(values, grid, BandMask())
    assert reduced.band_count == 52
    assert list(reduced.centers) == kept
    assert len(out) == 52


@pytest.mark.parametrize('seed', range(5))
def test_resampling_is_a_weighted_average(seed):
    grid = make_grid(np.arange(400.0, 1001.0, 2.5), fwhm=2.5)
    values = np.random.default_rng(seed).uniform(0.05, 0.5, grid.band_count)
    for srf in (load_default_srf(), make_bin_srf(grid)):
        out = gaussian_resample(values, grid, srf)
        assert np.all(out >= values.min()) and np.all(out <= values.max())
        constant = gaussian_resample(np.full(grid.band_count, 0.3), grid,
                                     srf)
        assert np.allclose(constant, 0.3, rtol=0, atol=1e-13)
