"""Linear feature extraction T = (X - x_mean) W with PCA, CCA and PLS.

All three methods build the weight matrix column by column: each w_j has
unit norm and its scores X_c w_j are orthogonal to the scores of the earlier
components. They differ in the objective maximized for each column: score
variance (PCA), correlation with the response (CCA) or covariance with the
response (PLS).
"""
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigError, NumericalError, ValidationError
from .util import logger


PCA = 'pca'
CCA = 'cca'
PLS = 'pls'
METHODS = (PCA, CCA, PLS)

# CCA adds a ridge to X_c'X_c beyond this condition number.
CCA_MAX_CONDITION = 1e10
CCA_RIDGE_FACTOR = 1e-8
# Relative size below which a new weight direction counts as vanished.
DEGENERATE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ComponentModel:
    """A fitted extractor.

    `eigenvalues[j]` is the variance of component j over the training data.
    `x_scale` is set only when bands were variance-scaled before fitting.
    """
    method: str
    W: np.ndarray
    x_mean: np.ndarray
    eigenvalues: np.ndarray
    y_mean: float = None
    x_scale: np.ndarray = None
    ridge: float = 0.0

    def __post_init__(self):
        for name in ('W', 'x_mean', 'eigenvalues', 'x_scale'):
            value = getattr(self, name)
            if value is not None:
                value = np.array(value, dtype=float)
                value.setflags(write=False)
                object.__setattr__(self, name, value)

    @property
    def k(self):
        return self.W.shape[1]

    @property
    def m(self):
        return self.W.shape[0]


VarianceRow = namedtuple(
    'VarianceRow', 'component_index eigenvalue pct_variance cumulative_pct')


def _as_matrix(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError('expected a matrix, got %d dimensions' % X.ndim)
    return X


def _center(X, scale):
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    x_scale = None
    if scale:
        x_scale = Xc.std(axis=0, ddof=1)
        x_scale[x_scale == 0] = 1.0
        Xc = Xc / x_scale
    return Xc, x_mean, x_scale


def _check_k(k, n, m, min_rows):
    if n < min_rows:
        raise ConfigError('need at least %d rows, got %d' % (min_rows, n))
    limit = min(n - 1, m)
    if k < 1 or k > limit:
        raise NumericalError(
            'insufficient rank: %d components requested, at most %d '
            'possible for %d rows and %d bands' % (k, limit, n, m))


def _sign_convention(W):
    """Flip columns so that each one's largest-magnitude weight is
    positive."""
    rows = np.argmax(np.abs(W), axis=0)
    signs = np.sign(W[rows, np.arange(W.shape[1])])
    signs[signs == 0] = 1.0
    return W * signs


def _score_variances(Xc, W):
    return (Xc @ W).var(axis=0, ddof=1)


def fit_pca(X, k, scale=False):
    X = _as_matrix(X)
    n, m = X.shape
    _check_k(k, n, m, 2)
    if np.all(X == X[0]):
        raise NumericalError('zero variance: all spectra are identical')
    Xc, x_mean, x_scale = _center(X, scale)
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    rank = int(np.sum(s > s[0] * max(n, m) * np.finfo(float).eps))
    if k > rank:
        raise NumericalError(
            'insufficient rank: %d components requested, data rank is %d' %
            (k, rank))
    W = _sign_convention(Vt[:k].T)
    return ComponentModel(PCA, W, x_mean, s[:k] ** 2 / (n - 1),
                          x_scale=x_scale)


def _supervised_inputs(X, y, k, scale):
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    n, m = X.shape
    if len(y) != n:
        raise ValidationError('%d responses for %d rows' % (len(y), n))
    _check_k(k, n, m, 3)
    if np.all(y == y[0]):
        raise NumericalError('zero response variance')
    Xc, x_mean, x_scale = _center(X, scale)
    y_mean = float(y.mean())
    return Xc, y - y_mean, x_mean, x_scale, y_mean


def fit_pls(X, y, k, scale=False):
    """PLS1 weights.

    Each direction is the cross-covariance X_c'y_c projected off the span of
    the earlier loadings X_c'X_c w_i, which maximizes covariance under the
    unit-norm and score-orthogonality constraints.
    """
    Xc, yc, x_mean, x_scale, y_mean = _supervised_inputs(X, y, k, scale)
    S = Xc.T @ Xc
    c = Xc.T @ yc
    tol = DEGENERATE_TOL * np.linalg.norm(Xc) * np.linalg.norm(yc)
    columns = []
    for j in range(k):
        w = c.copy()
        if columns:
            Q, _ = np.linalg.qr(S @ np.column_stack(columns))
            w -= Q @ (Q.T @ w)
        norm = np.linalg.norm(w)
        if not norm > tol:
            raise NumericalError(
                'degenerate direction: PLS component %d has no remaining '
                'covariance with the response' % (j + 1))
        columns.append(w / norm)
    W = _sign_convention(np.column_stack(columns))
    return ComponentModel(PLS, W, x_mean, _score_variances(Xc, W), y_mean,
                          x_scale)


def _degenerate_cca(j):
    return NumericalError(
        'degenerate direction: CCA component %d has no remaining '
        'correlation with the response' % (j + 1))


def _orthogonalize_scores(Xc, w, columns, passes=2):
    """Remove from `w` the combination of earlier weights whose scores
    overlap with its own.

    The ridge only enforces score orthogonality up to its own size, so the
    residual overlap is projected out explicitly.
    """
    if not columns:
        return w
    W_prev = np.column_stack(columns)
    T_prev = Xc @ W_prev
    gram = T_prev.T @ T_prev
    for _ in range(passes):
        w = w - W_prev @ np.linalg.solve(gram, T_prev.T @ (Xc @ w))
    return w


def fit_cca(X, y, k, scale=False):
    """Sequential CCA for a scalar response.

    Each direction maximizes corr(X_c w, y_c) subject to ||w|| = 1 and
    orthogonality of its scores to the earlier ones. When X_c'X_c is
    ill-conditioned (always when there are fewer plots than bands), a ridge
    of 1e-8 * trace / m is added to it in the objective; the orthogonality
    constraint always uses the unregularized matrix.

    A scalar response supports few such directions. A direction that
    vanishes, or whose scores carry less than DEGENERATE_TOL of the first
    component's sum of squares, raises 'degenerate direction'.
    """
    Xc, yc, x_mean, x_scale, y_mean = _supervised_inputs(X, y, k, scale)
    m = Xc.shape[1]
    S = Xc.T @ Xc
    c = Xc.T @ yc
    ridge = 0.0
    condition = np.linalg.cond(S)
    if not np.isfinite(condition) or condition > CCA_MAX_CONDITION:
        ridge = CCA_RIDGE_FACTOR * np.trace(S) / m
        logger.info('CCA: condition number %.3g, adding ridge %.3g',
                    condition, ridge)
    factor = cho_factor(S + ridge * np.eye(m))
    z = cho_solve(factor, c)
    tol = DEGENERATE_TOL * np.linalg.norm(z)
    columns = []
    first_variance = None
    for j in range(k):
        w = z.copy()
        if columns:
            B = S @ np.column_stack(columns)
            G = cho_solve(factor, B)
            mu = np.linalg.solve(B.T @ G, G.T @ c)
            w -= G @ mu
        norm = np.linalg.norm(w)
        if not norm > tol:
            raise _degenerate_cca(j)
        w = _orthogonalize_scores(Xc, w / norm, columns)
        norm = np.linalg.norm(w)
        if not norm > DEGENERATE_TOL:
            raise _degenerate_cca(j)
        w = w / norm
        t = Xc @ w
        variance = float(t @ t)
        if first_variance is None:
            first_variance = variance
        elif not variance > DEGENERATE_TOL * first_variance:
            # Left with a direction in the near-null space of X_c.
            raise _degenerate_cca(j)
        columns.append(w)
    W = _sign_convention(np.column_stack(columns))
    return ComponentModel(CCA, W, x_mean, _score_variances(Xc, W), y_mean,
                          x_scale, ridge)


_fitters = {
    PCA: lambda X, y, k, scale: fit_pca(X, k, scale),
    CCA: fit_cca,
    PLS: fit_pls,
}


def fit_extractor(method, X, y, k, scale=False):
    try:
        fitter = _fitters[method]
    except KeyError:
        raise ConfigError('unknown extraction method %r (choose from %s)' %
                          (method, ', '.join(METHODS)))
    return fitter(X, y, k, scale)


def transform(model, X):
    X = _as_matrix(X)
    if X.shape[1] != model.m:
        raise ValidationError(
            'dimension mismatch: %d bands, model expects %d' %
            (X.shape[1], model.m))
    Xc = X - model.x_mean
    if model.x_scale is not None:
        Xc = Xc / model.x_scale
    return Xc @ model.W


def variance_table(model, X):
    """Eigenvalue, percent and cumulative percent of the variance of the
    training matrix `X` carried by each component."""
    X = _as_matrix(X)
    T = transform(model, X)
    Xc = X - X.mean(axis=0)
    if model.x_scale is not None:
        Xc = Xc / model.x_scale
    total = Xc.var(axis=0, ddof=1).sum()
    if not total > 0:
        raise NumericalError('zero variance')
    eigenvalues = T.var(axis=0, ddof=1)
    pct = eigenvalues / total * 100.0
    cumulative = np.cumsum(pct)
    return [VarianceRow(j + 1, float(e), float(p), float(c))
            for j, (e, p, c) in enumerate(zip(eigenvalues, pct, cumulative))]


def component_scores(model, d):
    """Component scores of every plot of dataset `d`, as (plot_ids, T)."""
    return d.plot_ids, transform(model, d.X)
