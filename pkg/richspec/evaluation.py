"""Repeated two-fold cross-validation of extraction + regression pipelines.

Every repetition shuffles the rows with its own RNG substream of the master
seed and splits them into Subset I (the larger half for odd n) and Subset II.
Fold 0 trains on I and validates on II; fold 1 swaps the roles. Extractors
are always fitted on the training fold only.
"""
from collections import namedtuple
from dataclasses import dataclass, field, replace
import math

from joblib import Parallel, delayed
import numpy as np

from .errors import ConfigError, NumericalError, ValidationError
from .extraction import METHODS, PLS, fit_extractor, transform
from .forest import DEFAULT_MAX_FEATURES, DEFAULT_TREES, fit_rfr
from .kernel import KernelConfig
from .regression import GPR, KRR, REGRESSORS, fit_gpr, fit_krr, predict
from .spectra import concat_datasets
from .util import (debug_time, logger, resolve_threads, substream,
                   substream_seed)


FOLD_COUNT = 2
MIN_ROWS = 4


@dataclass(frozen=True)
class CVConfig:
    repetitions: int = 100
    seed: int = 0
    threads: int = None

    def __post_init__(self):
        if not int(self.repetitions) >= 1:
            raise ConfigError('repetitions must be >= 1, got %r' %
                              self.repetitions)
        object.__setattr__(self, 'repetitions', int(self.repetitions))
        object.__setattr__(self, 'seed', int(self.seed))

    @property
    def fold_count(self):
        return FOLD_COUNT


@dataclass(frozen=True)
class PipelineSpec:
    """Extraction method and component count plus the regressor and its
    hyperparameters."""
    method: str = PLS
    k: int = 2
    regressor: str = KRR
    kernel: KernelConfig = field(default_factory=KernelConfig)
    lam: float = 1.0
    epsilon: float = 1.0
    optimize: bool = False
    trees: int = DEFAULT_TREES
    bootstrap: bool = True
    max_features: float = DEFAULT_MAX_FEATURES
    scale: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError('unknown extraction method %r (choose from %s)'
                              % (self.method, ', '.join(METHODS)))
        if self.regressor not in REGRESSORS:
            raise ConfigError('unknown regressor %r (choose from %s)' %
                              (self.regressor, ', '.join(REGRESSORS)))
        if int(self.k) < 1:
            raise ConfigError('k must be >= 1, got %r' % self.k)
        object.__setattr__(self, 'k', int(self.k))

    def describe(self):
        return '%s(k=%d)+%s' % (self.method.upper(), self.k,
                                self.regressor.upper())


@dataclass(frozen=True, eq=False)
class PipelineModel:
    spec: PipelineSpec
    extractor: object
    regressor: object


Fold = namedtuple('Fold', 'rep fold train test')
FoldData = namedtuple('FoldData', 'fold extractor T_train T_test')
CVRow = namedtuple('CVRow', 'rep fold r rmse')
PredictionRow = namedtuple(
    'PredictionRow', 'plot_id region truth prediction rep fold')


@dataclass(frozen=True)
class CVReport:
    """Per-fold metrics and validation predictions.

    `mean_r` and `mean_rmse` average the per-fold values (folds with an
    undefined correlation are skipped for r); `pooled_r` and `pooled_rmse`
    are computed over all validation predictions at once.
    """
    spec: PipelineSpec
    per_repetition: tuple
    predictions: tuple
    mean_r: float
    mean_rmse: float
    pooled_r: float
    pooled_rmse: float
    partitions: tuple = field(default=(), repr=False)
    models: tuple = field(default=None, repr=False, compare=False)


ComparisonRow = namedtuple(
    'ComparisonRow', 'method regressor mean_r mean_rmse pooled_r pooled_rmse')


def _paired(truth, pred, min_len):
    truth = np.asarray(truth, dtype=float).ravel()
    pred = np.asarray(pred, dtype=float).ravel()
    if len(truth) != len(pred):
        raise ValidationError('length mismatch: %d truths, %d predictions' %
                              (len(truth), len(pred)))
    if len(truth) < min_len:
        raise ValidationError('need at least %d values, got %d' %
                              (min_len, len(truth)))
    return truth, pred


def pearson_r(truth, pred):
    truth, pred = _paired(truth, pred, 2)
    # A centered constant vector is rounding noise, not zero.
    if np.ptp(truth) == 0 or np.ptp(pred) == 0:
        raise NumericalError('undefined correlation: zero variance')
    a = truth - truth.mean()
    b = pred - pred.mean()
    denom = math.sqrt(float(a @ a) * float(b @ b))
    if not denom > 0:
        raise NumericalError('undefined correlation: zero variance')
    return float(np.clip(float(a @ b) / denom, -1.0, 1.0))


def rmse(truth, pred):
    truth, pred = _paired(truth, pred, 1)
    return float(np.sqrt(np.mean((truth - pred) ** 2)))


def fit_regressor(spec, T, y, seed=0):
    if spec.regressor == KRR:
        return fit_krr(T, y, spec.kernel, spec.lam)
    if spec.regressor == GPR:
        return fit_gpr(T, y, spec.kernel, spec.epsilon, spec.optimize, seed)
    return fit_rfr(T, y, spec.trees, seed, spec.bootstrap, spec.max_features)


def fit_pipeline(spec, X, y, seed=0):
    """Fit the extractor and then the regressor on its scores."""
    extractor = fit_extractor(spec.method, X, y, spec.k, spec.scale)
    T = transform(extractor, X)
    return PipelineModel(spec, extractor, fit_regressor(spec, T, y, seed))


def predict_pipeline(model, X):
    return predict(model.regressor, transform(model.extractor, X))


def partition_plan(n, cfg):
    """Folds of every repetition, in (rep, fold) order.

    Index lists are sorted, so a fold's content does not depend on the
    shuffle order within a subset.
    """
    if n < MIN_ROWS:
        raise ConfigError('cross-validation needs at least %d rows, got %d' %
                          (MIN_ROWS, n))
    half = (n + 1) // 2
    plan = []
    for rep in range(cfg.repetitions):
        perm = substream(cfg.seed, rep).permutation(n)
        first = tuple(int(i) for i in np.sort(perm[:half]))
        second = tuple(int(i) for i in np.sort(perm[half:]))
        plan.append(Fold(rep, 0, first, second))
        plan.append(Fold(rep, 1, second, first))
    return plan


def check_fold_size(n, k):
    smallest = n // 2
    if k >= smallest - 1:
        raise ConfigError(
            'fold too small for the pipeline: k=%d needs training folds of '
            'more than %d rows, smallest fold has %d' % (k, k + 1, smallest))


def _extract_fold(d, spec, fold):
    train = list(fold.train)
    extractor = fit_extractor(spec.method, d.X[train], d.y[train], spec.k,
                              spec.scale)
    return FoldData(fold, extractor, transform(extractor, d.X[train]),
                    transform(extractor, d.X[list(fold.test)]))


def extract_folds(d, spec, plan, threads=None):
    """Fit the extractor of `spec` on every training fold of `plan`.

    The result only depends on the extraction settings of `spec`, so it can
    be shared between pipelines that differ in the regressor alone.
    """
    return Parallel(n_jobs=resolve_threads(threads), prefer='threads')(
        delayed(_extract_fold)(d, spec, fold) for fold in plan)


def _score_fold(d, spec, data, seed):
    fold = data.fold
    train, test = list(fold.train), list(fold.test)
    regressor = fit_regressor(spec, data.T_train, d.y[train],
                              substream_seed(seed, fold.rep, fold.fold))
    pred = predict(regressor, data.T_test)
    truth = d.y[test]
    try:
        r = pearson_r(truth, pred)
    except NumericalError:
        logger.warning('rep %d fold %d: correlation undefined, recorded as '
                       'NaN', fold.rep, fold.fold)
        r = float('nan')
    rows = tuple(PredictionRow(d.plot_ids[i], d.regions[i], float(t),
                               float(p), fold.rep, fold.fold)
                 for i, t, p in zip(test, truth, pred))
    model = PipelineModel(spec, data.extractor, regressor)
    return CVRow(fold.rep, fold.fold, r, rmse(truth, pred)), rows, model


@debug_time(detail=lambda d, spec, cfg, *_, **__: '%s, %d reps' %
            (spec.describe(), cfg.repetitions))
def two_fold_cv(d, spec, cfg, keep_models=False, plan=None, folds=None):
    """Evaluate `spec` on `d` by repeated two-fold cross-validation.

    `plan` and `folds` (precomputed extractions for that plan) let callers
    evaluate several pipelines on identical partitions.
    """
    if plan is None:
        plan = partition_plan(d.n, cfg)
    check_fold_size(d.n, spec.k)
    threads = resolve_threads(cfg.threads)
    if folds is None:
        folds = extract_folds(d, spec, plan, threads)
    results = Parallel(n_jobs=threads, prefer='threads')(
        delayed(_score_fold)(d, spec, data, cfg.seed) for data in folds)
    results.sort(key=lambda res: (res[0].rep, res[0].fold))
    per_rep = tuple(res[0] for res in results)
    predictions = tuple(row for res in results for row in res[1])
    rs = np.array([row.r for row in per_rep])
    if np.all(np.isnan(rs)):
        mean_r = float('nan')
    else:
        mean_r = float(np.nanmean(rs))
    truth = [p.truth for p in predictions]
    pred = [p.prediction for p in predictions]
    try:
        pooled_r = pearson_r(truth, pred)
    except NumericalError:
        pooled_r = float('nan')
    report = CVReport(
        spec, per_rep, predictions, mean_r,
        float(np.mean([row.rmse for row in per_rep])), pooled_r,
        rmse(truth, pred), tuple(plan),
        tuple(res[2] for res in results) if keep_models else None)
    logger.info('%s: mean r %.4f, mean RMSE %.4f over %d folds',
                spec.describe(), report.mean_r, report.mean_rmse,
                len(per_rep))
    return report


def pooled_region_eval(datasets, spec, cfg, **kwargs):
    """Concatenate the datasets (identical band grids) and cross-validate the
    pooled data. Region labels stay attached to the predictions."""
    datasets = list(datasets)
    pooled = datasets[0] if len(datasets) == 1 else concat_datasets(datasets)
    return two_fold_cv(pooled, spec, cfg, **kwargs)


def compare_pipelines(d, methods=METHODS, regressors=REGRESSORS, spec=None,
                      cfg=None):
    """Cross-validate every extraction method × regressor combination on the
    same partitions. Combinations that fail numerically score NaN."""
    spec = spec or PipelineSpec()
    cfg = cfg or CVConfig()
    plan = partition_plan(d.n, cfg)
    rows = []
    for method in methods:
        base = replace(spec, method=method)
        try:
            check_fold_size(d.n, base.k)
            folds = extract_folds(d, base, plan, cfg.threads)
        except NumericalError as e:
            logger.warning('%s extraction failed: %s', method, e)
            folds = None
        for regressor in regressors:
            cell = replace(base, regressor=regressor)
            nan = float('nan')
            if folds is None:
                rows.append(ComparisonRow(method, regressor, nan, nan, nan,
                                          nan))
                continue
            try:
                report = two_fold_cv(d, cell, cfg, plan=plan, folds=folds)
            except NumericalError as e:
                logger.warning('%s failed: %s', cell.describe(), e)
                rows.append(ComparisonRow(method, regressor, nan, nan, nan,
                                          nan))
                continue
            rows.append(ComparisonRow(method, regressor, report.mean_r,
                                      report.mean_rmse, report.pooled_r,
                                      report.pooled_rmse))
    return rows
