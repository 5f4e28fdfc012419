"""Kernel ridge regression and Gaussian process regression on component
scores, plus the shared `predict` entry point."""
from dataclasses import dataclass
from functools import singledispatch
import math

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import ConfigError, NumericalError, ValidationError
from .kernel import (build_gram, free_parameters, get_theta,
                     gram_gradients, kernel_matrix, with_theta)
from .util import debug_time, logger, substream


KRR = 'krr'
GPR = 'gpr'
RFR = 'rfr'
REGRESSORS = (KRR, GPR, RFR)

# Jitter factors (times the mean diagonal) tried before giving up on a
# Cholesky factorization.
JITTER_STEPS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)

GPR_RESTARTS = 3
GPR_MAX_ITER = 200
GPR_GRAD_TOL = 1e-6
# Log-space box for optimized hyperparameters.
GPR_LOG_BOUNDS = (math.log(1e-10), math.log(1e10))


def _frozen(values):
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class KrrModel:
    kernel: object
    lam: float
    alpha: np.ndarray
    train_T: np.ndarray
    y_mean: float

    def __post_init__(self):
        object.__setattr__(self, 'alpha', _frozen(self.alpha))
        object.__setattr__(self, 'train_T', _frozen(self.train_T))


@dataclass(frozen=True, eq=False)
class GprModel:
    kernel: object
    epsilon: float
    alpha: np.ndarray
    train_T: np.ndarray
    y_mean: float
    log_marginal_likelihood: float
    mean_fn_value: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'alpha', _frozen(self.alpha))
        object.__setattr__(self, 'train_T', _frozen(self.train_T))


def _training_inputs(T, y, min_rows=2):
    T = np.asarray(T, dtype=float)
    if T.ndim == 1:
        T = T[:, np.newaxis]
    y = np.asarray(y, dtype=float).ravel()
    if T.ndim != 2 or len(y) != T.shape[0]:
        raise ValidationError('%d responses for %d feature rows' %
                              (len(y), T.shape[0]))
    if T.shape[0] < min_rows:
        raise ConfigError('need at least %d training rows, got %d' %
                          (min_rows, T.shape[0]))
    return T, y


def cholesky(A):
    """Cholesky factor of the symmetric matrix `A`, escalating a diagonal
    jitter (up to 1e-6 of the mean diagonal) when `A` is not numerically
    positive definite."""
    scale = abs(float(np.mean(np.diag(A)))) or 1.0
    eye = np.eye(A.shape[0])
    for step in JITTER_STEPS:
        try:
            factor = cho_factor(A + step * scale * eye, lower=True)
        except LinAlgError:
            continue
        if step:
            logger.info('Cholesky needed jitter %.1e x mean diagonal', step)
        return factor
    raise NumericalError('kernel matrix not positive definite')


def fit_krr(T, y, cfg, lam=1.0):
    """Solve (K + lam I) alpha = y - mean(y); the mean is restored at
    prediction."""
    if not lam > 0:
        raise ConfigError('lambda must be > 0, got %r' % lam)
    T, y = _training_inputs(T, y)
    y_mean = float(y.mean())
    K = build_gram(cfg, T)
    factor = cholesky(K + lam * np.eye(len(y)))
    alpha = cho_solve(factor, y - y_mean)
    return KrrModel(cfg, float(lam), alpha, T, y_mean)


def log_marginal_likelihood(T, yc, cfg, epsilon, eval_gradient=False):
    """Log marginal likelihood of centered targets `yc` under a zero-mean GP
    with kernel `cfg` and noise `epsilon`.

    With `eval_gradient`, also return its gradient with respect to the
    log-space parameters `free_parameters(cfg)`.
    """
    T = np.asarray(T, dtype=float)
    yc = np.asarray(yc, dtype=float)
    n = len(yc)
    A = build_gram(cfg, T) + epsilon ** 2 * np.eye(n)
    factor = cholesky(A)
    alpha = cho_solve(factor, yc)
    value = (-0.5 * yc @ alpha - np.sum(np.log(np.diag(factor[0]))) -
             0.5 * n * math.log(2.0 * math.pi))
    if not eval_gradient:
        return value
    inner = np.outer(alpha, alpha) - cho_solve(factor, np.eye(n))
    grads = gram_gradients(cfg, T, free_parameters(cfg))
    gradient = np.array([0.5 * np.sum(inner * dK) for dK in grads])
    return value, gradient


def _objective(T, yc, cfg, epsilon, names, theta):
    candidate = with_theta(cfg, names, theta)
    try:
        value, gradient = log_marginal_likelihood(T, yc, candidate, epsilon,
                                                  eval_gradient=True)
    except NumericalError:
        return -np.inf, None
    return value, gradient


def _ascend(T, yc, cfg, epsilon, names, theta, max_iter, tol):
    """Gradient ascent with step halving; returns (theta, value)."""
    lo, hi = GPR_LOG_BOUNDS
    theta = np.clip(theta, lo, hi)
    value, gradient = _objective(T, yc, cfg, epsilon, names, theta)
    if gradient is None:
        return theta, value
    step = 1.0
    for _ in range(max_iter):
        norm = np.linalg.norm(gradient)
        if norm < tol:
            break
        direction = gradient / norm
        while step > 1e-10:
            candidate = np.clip(theta + step * direction, lo, hi)
            cand_value, cand_gradient = _objective(T, yc, cfg, epsilon,
                                                   names, candidate)
            if cand_value > value:
                break
            step *= 0.5
        else:
            break
        theta, value, gradient = candidate, cand_value, cand_gradient
        step = min(step * 2.0, 4.0)
    return theta, value


@debug_time
def optimize_kernel(T, yc, cfg, epsilon, seed=0, restarts=GPR_RESTARTS,
                    max_iter=GPR_MAX_ITER, tol=GPR_GRAD_TOL):
    """Maximize the log marginal likelihood over the free kernel parameters,
    starting from `cfg` plus `restarts` perturbed starts."""
    names = free_parameters(cfg)
    start = get_theta(cfg, names)
    if not names:
        return cfg
    rng = substream(seed, 0)
    starts = [start] + [start + rng.normal(0.0, 1.0, len(start))
                        for _ in range(restarts)]
    best_theta, best_value = None, -np.inf
    for theta in starts:
        theta, value = _ascend(T, yc, cfg, epsilon, names, theta, max_iter,
                               tol)
        if value > best_value:
            best_theta, best_value = theta, value
    if best_theta is None:
        raise NumericalError('kernel matrix not positive definite')
    result = with_theta(cfg, names, best_theta)
    logger.debug('GPR optimum: %s (log marginal likelihood %.6g)',
                 result, best_value)
    return result


def fit_gpr(T, y, cfg, epsilon=1.0, optimize=False, seed=0):
    """Zero-mean GP on centered targets; alpha = (K + eps^2 I)^-1 (y - mean).
    """
    if not epsilon >= 0:
        raise ConfigError('epsilon must be >= 0, got %r' % epsilon)
    T, y = _training_inputs(T, y)
    y_mean = float(y.mean())
    yc = y - y_mean
    if optimize:
        cfg = optimize_kernel(T, yc, cfg, epsilon, seed)
    K = build_gram(cfg, T)
    A = K + epsilon ** 2 * np.eye(len(y))
    factor = cholesky(A)
    alpha = cho_solve(factor, yc)
    value = (-0.5 * yc @ alpha - np.sum(np.log(np.diag(factor[0]))) -
             0.5 * len(y) * math.log(2.0 * math.pi))
    return GprModel(cfg, float(epsilon), alpha, T, y_mean, float(value))


def _check_features(model_T, T_new):
    T_new = np.asarray(T_new, dtype=float)
    if T_new.ndim == 1:
        T_new = T_new[np.newaxis, :]
    if T_new.shape[1] != model_T.shape[1]:
        raise ValidationError(
            'dimension mismatch: %d features, model expects %d' %
            (T_new.shape[1], model_T.shape[1]))
    return T_new


@singledispatch
def predict(model, T_new):
    """Predict responses for the feature rows `T_new`."""
    raise TypeError('cannot predict with %r' % type(model).__name__)


@predict.register(KrrModel)
@predict.register(GprModel)
def _predict_kernel(model, T_new):
    T_new = _check_features(model.train_T, T_new)
    return kernel_matrix(model.kernel, T_new, model.train_T) @ model.alpha + \
        model.y_mean
