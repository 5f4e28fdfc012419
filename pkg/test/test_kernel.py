import numpy as np
import pytest

from richspec.errors import ValidationError
from richspec.kernel import (DOT, LENGTH_SCALE, RBF, SIGMA2, WHITE,
                             WHITE_NOISE, KernelConfig, build_gram,
                             free_parameters, get_theta, gram_gradients,
                             kernel_eval, kernel_matrix, with_theta)

from .conftest import random_matrix


def test_eval_terms():
    a, b = np.array([1.0, 2.0]), np.array([3.0, 1.0])
    cfg = KernelConfig(sigma=2.0, length_scale=1.5, white_noise=0.3)
    expected = (5.0 + 4.0) + np.exp(-5.0 / (2 * 1.5 ** 2))
    assert kernel_eval(cfg, a, b) == pytest.approx(expected)
    assert kernel_eval(cfg, a, a) == pytest.approx(5.0 + 4.0 + 1.0 + 0.3)


@pytest.mark.parametrize('terms, expected', [
    ((DOT,), 1.0 + 4.0),
    ((RBF,), 1.0),
    ((WHITE,), 0.3),
    ((RBF, WHITE), 1.3),
])
def test_eval_term_subsets(terms, expected):
    a = np.array([1.0, 0.0])
    cfg = KernelConfig(2.0, 1.0, 0.3, terms)
    assert kernel_eval(cfg, a, a) == pytest.approx(expected)


def test_matrix_matches_eval():
    A, B = random_matrix(0, 4, 3), random_matrix(1, 5, 3)
    B[2] = A[1]
    cfg = KernelConfig(sigma=0.5, length_scale=2.0, white_noise=0.7)
    K = kernel_matrix(cfg, A, B)
    assert K.shape == (4, 5)
    for i in range(4):
        for j in range(5):
            assert K[i, j] == pytest.approx(kernel_eval(cfg, A[i], B[j]),
                                            rel=1e-12)
    assert K[1, 2] - kernel_matrix(cfg, A[1], A[1])[0, 0] == \
        pytest.approx(0.0, abs=1e-12)


def test_gram_symmetric_positive():
    T = random_matrix(2, 10, 3)
    K = build_gram(KernelConfig(1.0, 1.0, 0.1), T)
    assert np.array_equal(K, K.T)
    assert np.all(np.linalg.eigvalsh(K) > 0)


def test_gram_duplicate_rows_get_white_term():
    T = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 1.0]])
    cfg = KernelConfig(1.0, 1.0, 0.5, (WHITE,))
    K = build_gram(cfg, T)
    assert np.array_equal(K, [[0.5, 0.5, 0], [0.5, 0.5, 0], [0, 0, 0.5]])


def test_dimension_mismatch():
    cfg = KernelConfig()
    with pytest.raises(ValidationError, match='dimension mismatch'):
        kernel_matrix(cfg, np.ones((2, 3)), np.ones((2, 2)))
    with pytest.raises(ValidationError):
        kernel_eval(cfg, np.ones(3), np.ones(2))


@pytest.mark.parametrize('kwargs', [
    dict(length_scale=0.0),
    dict(white_noise=-1.0),
    dict(terms=('poly',)),
    dict(terms=()),
])
def test_invalid_config(kwargs):
    with pytest.raises(ValidationError):
        KernelConfig(**kwargs)


def test_terms_canonical_order():
    assert KernelConfig(terms=(WHITE, DOT)).terms == (DOT, WHITE)


def test_free_parameters():
    assert free_parameters(KernelConfig()) == [SIGMA2, LENGTH_SCALE,
                                               WHITE_NOISE]
    assert free_parameters(KernelConfig(sigma=0.0, white_noise=0.0)) == \
        [LENGTH_SCALE]
    assert free_parameters(KernelConfig(terms=(DOT,))) == [SIGMA2]


def test_theta_round_trip():
    cfg = KernelConfig(sigma=3.0, length_scale=0.2, white_noise=5.0)
    names = free_parameters(cfg)
    theta = get_theta(cfg, names)
    assert theta == pytest.approx(np.log([9.0, 0.2, 5.0]))
    back = with_theta(cfg, names, theta)
    assert back.sigma == pytest.approx(3.0)
    assert back.length_scale == pytest.approx(0.2)
    assert back.white_noise == pytest.approx(5.0)


def test_gram_gradients_finite_differences():
    T = random_matrix(3, 6, 2)
    cfg = KernelConfig(sigma=0.8, length_scale=1.3, white_noise=0.4)
    names = free_parameters(cfg)
    theta = get_theta(cfg, names)
    h = 1e-6
    for i, dK in enumerate(gram_gradients(cfg, T, names)):
        step = np.zeros(len(theta))
        step[i] = h
        fd = (build_gram(with_theta(cfg, names, theta + step), T) -
              build_gram(with_theta(cfg, names, theta - step), T)) / (2 * h)
        assert np.allclose(dK, fd, rtol=1e-5, atol=1e-7)
