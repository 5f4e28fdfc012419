"""Hyperparameter selection: grid search over the kernel parameters and
choice of the component count, both scored by repeated two-fold CV on one
shared partition plan."""
from collections import namedtuple
from dataclasses import dataclass, replace
import itertools
import math

from joblib import Parallel, delayed

from .errors import ConfigError, NumericalError
from .evaluation import (CVConfig, check_fold_size, extract_folds,
                         partition_plan, two_fold_cv)
from .kernel import KernelConfig
from .regression import RFR
from .spectra import Dataset
from .util import debug_time, logger, resolve_threads


DECADES = tuple(10.0 ** e for e in range(-5, 6))
MAX_R = 'max_r'
MIN_RMSE = 'min_rmse'
METRICS = (MAX_R, MIN_RMSE)
DEFAULT_K_RANGE = tuple(range(1, 11))


@dataclass(frozen=True)
class GridSpec:
    sigma_values: tuple = DECADES
    length_values: tuple = DECADES
    delta_values: tuple = DECADES

    def __post_init__(self):
        for name in ('sigma_values', 'length_values', 'delta_values'):
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                raise ConfigError('%s must not be empty' % name)
            if any(not v > 0 for v in values):
                raise ConfigError('%s must all be > 0' % name)
            object.__setattr__(self, name, values)

    def __len__(self):
        return (len(self.sigma_values) * len(self.length_values) *
                len(self.delta_values))

    def cells(self):
        """(sigma, length_scale, delta) triples, sigma varying slowest."""
        return itertools.product(self.sigma_values, self.length_values,
                                 self.delta_values)


ScoreRow = namedtuple('ScoreRow', 'config mean_r mean_rmse')


@dataclass(frozen=True)
class SelectionResult:
    """`best_config` is a KernelConfig for kernel searches and an int for
    component-count searches. `per_dataset` holds one score table per input
    dataset when several were averaged."""
    best_config: object
    score_table: tuple
    selection_metric: str = MAX_R
    per_dataset: tuple = ()

    @property
    def best_row(self):
        for row in self.score_table:
            if row.config == self.best_config:
                return row
        return None


def _config_key(config):
    if isinstance(config, KernelConfig):
        return (config.sigma, config.length_scale, config.white_noise)
    return (config,)


def _failed(row, metric):
    if metric == MAX_R:
        return math.isnan(row.mean_r) or math.isnan(row.mean_rmse)
    return math.isnan(row.mean_rmse)


def select_best(rows, metric=MAX_R):
    """Best row by `metric`; ties go to the smaller RMSE (or the larger r),
    then to the lexicographically smallest config. Failed rows are
    skipped."""
    if metric not in METRICS:
        raise ConfigError('unknown selection metric %r (choose from %s)' %
                          (metric, ', '.join(METRICS)))
    valid = [row for row in rows if not _failed(row, metric)]
    if not valid:
        raise NumericalError('all cells failed')
    if metric == MAX_R:
        def key(row):
            return (-row.mean_r, row.mean_rmse, _config_key(row.config))
    else:
        def key(row):
            r = -row.mean_r if not math.isnan(row.mean_r) else math.inf
            return (row.mean_rmse, r, _config_key(row.config))
    return min(valid, key=key)


def _score_cell(d, spec, cfg, plan, folds):
    try:
        report = two_fold_cv(d, spec, cfg, plan=plan, folds=folds)
    except NumericalError as e:
        logger.warning('cell %s failed: %s', spec.kernel, e)
        return float('nan'), float('nan')
    return report.mean_r, report.mean_rmse


def _grid_detail(d, spec, grid=None, *_, **__):
    cells = len(grid or GridSpec())
    return '%s, %d cells, %d plots' % (spec.describe(), cells, d.n)


@debug_time(detail=_grid_detail)
def grid_search_kernel(d, spec, grid=None, cv=None, metric=MAX_R):
    """Score every (sigma, length_scale, delta) cell of `grid` for the
    pipeline `spec`.

    Extraction is fitted once per fold and shared by all cells, and cells
    run concurrently. Cells whose fit fails score NaN and are excluded from
    the selection.
    """
    grid = grid or GridSpec()
    cv = cv or CVConfig()
    if spec.regressor == RFR:
        raise ConfigError('grid search needs a kernel regressor, got rfr')
    plan = partition_plan(d.n, cv)
    check_fold_size(d.n, spec.k)
    threads = resolve_threads(cv.threads)
    folds = extract_folds(d, spec, plan, threads)
    cell_cv = replace(cv, threads=1)
    cells = [replace(spec, optimize=False,
                     kernel=replace(spec.kernel, sigma=s, length_scale=l,
                                    white_noise=delta))
             for s, l, delta in grid.cells()]
    logger.info('grid search over %d kernel cells', len(cells))
    scores = Parallel(n_jobs=threads, prefer='threads')(
        delayed(_score_cell)(d, cell, cell_cv, plan, folds) for cell in cells)
    table = tuple(ScoreRow(cell.kernel, r, e)
                  for cell, (r, e) in zip(cells, scores))
    failed = sum(1 for row in table if math.isnan(row.mean_r))
    if failed:
        logger.warning('%d of %d grid cells failed', failed, len(table))
    best = select_best(table, metric)
    return SelectionResult(best.config, table, metric)


def _score_k(d, spec, k, cfg, plan):
    cell = replace(spec, k=k)
    try:
        report = two_fold_cv(d, cell, cfg, plan=plan)
    except NumericalError as e:
        logger.warning('k=%d failed: %s', k, e)
        return float('nan'), float('nan')
    return report.mean_r, report.mean_rmse


def _check_k_range(d, k_range):
    limit = min(d.n - 2, d.m)
    for k in k_range:
        if not 1 <= k <= limit:
            raise ConfigError('k=%d outside 1..%d for %d rows and %d bands'
                              % (k, limit, d.n, d.m))
        check_fold_size(d.n, k)


def _k_detail(datasets, spec, k_range=DEFAULT_K_RANGE, *_, **__):
    return '%s, k in %s' % (spec.describe(), list(k_range))


@debug_time(detail=_k_detail)
def select_components(datasets, spec, k_range=DEFAULT_K_RANGE, cv=None,
                      metric=MAX_R):
    """Score each component count in `k_range` for the pipeline `spec`.

    `datasets` is a Dataset or a list of them; with several, the per-k mean
    r and RMSE are averaged across datasets (a k failing on any dataset
    fails overall).
    """
    if isinstance(datasets, Dataset):
        datasets = [datasets]
    datasets = list(datasets)
    if not datasets:
        raise ConfigError('no datasets to select components on')
    k_range = tuple(int(k) for k in k_range)
    if not k_range:
        raise ConfigError('k_range must not be empty')
    cv = cv or CVConfig()
    for d in datasets:
        _check_k_range(d, k_range)
    threads = resolve_threads(cv.threads)
    cell_cv = replace(cv, threads=1)
    jobs = [(i, k) for i in range(len(datasets)) for k in k_range]
    plans = [partition_plan(d.n, cv) for d in datasets]
    scores = Parallel(n_jobs=threads, prefer='threads')(
        delayed(_score_k)(datasets[i], spec, k, cell_cv, plans[i])
        for i, k in jobs)
    by_cell = dict(zip(jobs, scores))
    per_dataset = tuple(
        tuple(ScoreRow(k, *by_cell[i, k]) for k in k_range)
        for i in range(len(datasets)))
    table = tuple(
        ScoreRow(k,
                 sum(by_cell[i, k][0] for i in range(len(datasets))) /
                 len(datasets),
                 sum(by_cell[i, k][1] for i in range(len(datasets))) /
                 len(datasets))
        for k in k_range)
    best = select_best(table, metric)
    logger.info('selected k=%d (mean r %.4f)', best.config, best.mean_r)
    return SelectionResult(best.config, table, metric,
                           per_dataset if len(datasets) > 1 else ())
