"""The composite regression kernel: dot product + RBF + white noise.

    k(a, b) = (a.b + sigma^2) + exp(-||a - b||^2 / (2 l^2)) + delta [a == b]
"""
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ValidationError
from .util import logger


DOT = 'dot'
RBF = 'rbf'
WHITE = 'white'
TERMS = (DOT, RBF, WHITE)

# Log-space hyperparameters, in the order gradients are reported.
SIGMA2 = 'sigma2'
LENGTH_SCALE = 'length_scale'
WHITE_NOISE = 'white_noise'


@dataclass(frozen=True)
class KernelConfig:
    """Kernel hyperparameters.

    The defaults are the best grid-search combination found on field data
    (sigma = l = 1e3, delta = 10); they are a starting point, not a
    recommendation for other data.
    """
    sigma: float = 1e3
    length_scale: float = 1e3
    white_noise: float = 10.0
    terms: tuple = TERMS

    def __post_init__(self):
        terms = tuple(self.terms)
        unknown = set(terms) - set(TERMS)
        if unknown:
            raise ValidationError('unknown kernel terms: %s' %
                                  ', '.join(sorted(unknown)))
        if not terms:
            raise ValidationError('kernel needs at least one term')
        object.__setattr__(self, 'terms', tuple(t for t in TERMS
                                                if t in terms))
        if not self.length_scale > 0:
            raise ValidationError('length_scale must be > 0, got %r' %
                                  self.length_scale)
        if not self.white_noise >= 0:
            raise ValidationError('white_noise must be >= 0, got %r' %
                                  self.white_noise)

    def has(self, term):
        return term in self.terms


def _as_rows(A):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[np.newaxis, :]
    return A


def kernel_eval(cfg, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValidationError('kernel arguments differ in length: %d vs %d' %
                              (a.size, b.size))
    value = 0.0
    if cfg.has(DOT):
        value += float(a @ b) + cfg.sigma ** 2
    if cfg.has(RBF):
        value += float(np.exp(-np.sum((a - b) ** 2) /
                              (2.0 * cfg.length_scale ** 2)))
    if cfg.has(WHITE) and np.array_equal(a, b):
        value += cfg.white_noise
    return value


def kernel_matrix(cfg, A, B):
    """Cross-kernel matrix K[i, j] = k(A[i], B[j])."""
    A, B = _as_rows(A), _as_rows(B)
    if A.shape[1] != B.shape[1]:
        raise ValidationError('dimension mismatch: %d vs %d features' %
                              (A.shape[1], B.shape[1]))
    K = np.zeros((A.shape[0], B.shape[0]))
    if cfg.has(DOT):
        K += A @ B.T + cfg.sigma ** 2
    if cfg.has(RBF):
        K += np.exp(-cdist(A, B, 'sqeuclidean') /
                    (2.0 * cfg.length_scale ** 2))
    if cfg.has(WHITE):
        K += cfg.white_noise * _equal_rows(A, B)
    return K


def _equal_rows(A, B):
    return (A[:, np.newaxis, :] == B[np.newaxis, :, :]).all(axis=2)


def build_gram(cfg, T):
    """Training Gram matrix, symmetric by construction.

    The white term fires on elementwise-equal rows, so duplicate training
    rows also receive delta off the diagonal.
    """
    T = _as_rows(T)
    K = kernel_matrix(cfg, T, T)
    K = 0.5 * (K + K.T)
    if cfg.has(WHITE) and cfg.white_noise > 0:
        duplicates = (int(_equal_rows(T, T).sum()) - T.shape[0]) // 2
        if duplicates:
            logger.warning('%d duplicate training row pairs receive the '
                           'white-noise term off the diagonal', duplicates)
    return K


def free_parameters(cfg):
    """Names of the hyperparameters that can be optimized in log space:
    those of enabled terms with a positive value."""
    names = []
    if cfg.has(DOT) and cfg.sigma != 0:
        names.append(SIGMA2)
    if cfg.has(RBF):
        names.append(LENGTH_SCALE)
    if cfg.has(WHITE) and cfg.white_noise > 0:
        names.append(WHITE_NOISE)
    return names


def get_theta(cfg, names):
    values = {SIGMA2: cfg.sigma ** 2, LENGTH_SCALE: cfg.length_scale,
              WHITE_NOISE: cfg.white_noise}
    return np.log([values[name] for name in names])


def with_theta(cfg, names, theta):
    """Return `cfg` with the log-space parameters `theta` substituted."""
    changes = {}
    for name, value in zip(names, np.exp(theta)):
        if name == SIGMA2:
            changes['sigma'] = float(np.sqrt(value))
        else:
            changes[name] = float(value)
    return replace(cfg, **changes)


def gram_gradients(cfg, T, names):
    """Derivatives of the training Gram matrix with respect to each log-space
    parameter in `names`."""
    T = _as_rows(T)
    n = T.shape[0]
    grads = []
    for name in names:
        if name == SIGMA2:
            grads.append(np.full((n, n), cfg.sigma ** 2))
        elif name == LENGTH_SCALE:
            sq = cdist(T, T, 'sqeuclidean')
            l2 = cfg.length_scale ** 2
            grads.append(np.exp(-sq / (2.0 * l2)) * sq / l2)
        elif name == WHITE_NOISE:
            grads.append(cfg.white_noise * _equal_rows(T, T))
    return grads
