"""Band relative importance.

The importance of band i is the length of its weight-matrix row after each
component's weight is scaled by that component's partial correlation with
the response:

    I_i = sqrt(sum_j (w_ij p_j)^2),    normalized I_i / sum(I)
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, ValidationError
from .evaluation import CVConfig, partition_plan
from .extraction import fit_extractor, transform
from .util import logger


# Residual variance (relative to the raw variance) below which a partial
# correlation is considered undefined.
DEGENERATE_RESIDUAL = 1e-12


@dataclass(frozen=True, eq=False)
class ImportanceProfile:
    band_centers: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray
    method: str
    k_used: int
    partials: np.ndarray = None
    normalized_sd: np.ndarray = None
    folds: int = 0

    def __post_init__(self):
        for name in ('band_centers', 'raw', 'normalized', 'partials',
                     'normalized_sd'):
            value = getattr(self, name)
            if value is not None:
                value = np.array(value, dtype=float)
                value.setflags(write=False)
                object.__setattr__(self, name, value)

    def top_bands(self, count=5):
        """Centers of the `count` most important bands, most important
        first."""
        order = np.argsort(-self.normalized, kind='stable')
        return [float(self.band_centers[i]) for i in order[:count]]


def _residual(v, controls):
    if controls.shape[1] == 0:
        return v - v.mean()
    design = np.column_stack([np.ones(len(v)), controls])
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    return v - design @ coef


def partial_correlation(T, y, j):
    """Correlation of component `j` (0-based) with `y`, both residualized on
    the other components of `T` by least squares."""
    T = np.asarray(T, dtype=float)
    if T.ndim == 1:
        T = T[:, np.newaxis]
    y = np.asarray(y, dtype=float).ravel()
    n, k = T.shape
    if len(y) != n:
        raise ValidationError('%d responses for %d rows' % (len(y), n))
    if not 0 <= j < k:
        raise ConfigError('component index %d outside 0..%d' % (j, k - 1))
    if n < k + 2:
        raise ConfigError('partial correlation needs at least %d rows, got %d'
                          % (k + 2, n))
    controls = np.delete(T, j, axis=1)
    rt = _residual(T[:, j], controls)
    ry = _residual(y, controls)
    for raw, res in ((T[:, j], rt), (y, ry)):
        scale = np.sum((raw - raw.mean()) ** 2)
        if not np.sum(res ** 2) > DEGENERATE_RESIDUAL * scale or \
                not scale > 0:
            raise NumericalError(
                'degenerate partial correlation for component %d' % (j + 1))
    r = rt @ ry / np.sqrt((rt @ rt) * (ry @ ry))
    return float(np.clip(r, -1.0, 1.0))


def partial_correlations(T, y):
    T = np.asarray(T, dtype=float)
    return np.array([partial_correlation(T, y, j) for j in range(T.shape[1])])


def band_importance(model, partials, band_centers=None):
    partials = np.asarray(partials, dtype=float).ravel()
    if len(partials) != model.k:
        raise ValidationError('%d partial correlations for %d components' %
                              (len(partials), model.k))
    raw = np.sqrt(np.sum((model.W * partials) ** 2, axis=1))
    total = raw.sum()
    if not total > 0:
        raise NumericalError('uninformative model: all importances are zero')
    if band_centers is None:
        band_centers = np.arange(1, model.m + 1, dtype=float)
    return ImportanceProfile(band_centers, raw, raw / total, model.method,
                             model.k, partials)


def _profile(X, y, method, k, scale, centers):
    model = fit_extractor(method, X, y, k, scale)
    partials = partial_correlations(transform(model, X), y)
    return band_importance(model, partials, centers)


def importance_report(d, method, k, scale=False, per_fold=False, cv=None):
    """Importance profile of `method` with `k` components on dataset `d`.

    By default the extractor is fitted once on all rows. With `per_fold`,
    one profile is computed per CV training fold; the result carries the
    mean raw importance (normalized afterwards) and the standard deviation
    of the per-fold normalized profiles.
    """
    centers = d.grid.center_array
    if not per_fold:
        profile = _profile(d.X, d.y, method, k, scale, centers)
        logger.info('%s importance: top bands %s', method,
                    ', '.join('%.1f' % c for c in profile.top_bands(3)))
        return profile
    cv = cv or CVConfig()
    profiles = []
    for fold in partition_plan(d.n, cv):
        rows = list(fold.train)
        profiles.append(_profile(d.X[rows], d.y[rows], method, k, scale,
                                 centers))
    raw = np.mean([p.raw for p in profiles], axis=0)
    partials = np.mean([p.partials for p in profiles], axis=0)
    sd = np.std([p.normalized for p in profiles], axis=0, ddof=1) \
        if len(profiles) > 1 else np.zeros_like(raw)
    return ImportanceProfile(centers, raw, raw / raw.sum(), method, k,
                             partials, sd, len(profiles))
