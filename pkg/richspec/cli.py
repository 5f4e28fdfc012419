"""Command-line interface: `richspec <subcommand> [flags]`.

Exit codes: 0 success, 1 usage or configuration error, 2 data validation
error, 3 numerical failure.
"""
import argparse
from dataclasses import replace
from functools import partial, wraps
import os
import platform
import sys

import joblib
import numpy as np
import pandas as pd
import scipy

from . import __version__
from .config import RunConfig
from .errors import ConfigError, RichspecError, ValidationError
from .evaluation import (compare_pipelines, fit_pipeline, pooled_region_eval,
                         predict_pipeline, two_fold_cv)
from .extraction import component_scores, variance_table
from .importance import importance_report
from .io import (ArtifactWriter, load_model, load_plots_csv, load_spectra_csv,
                 load_srf_csv, save_model, write_class_spectra,
                 write_comparison, write_component_scores, write_cv_report,
                 write_dataset_spectra, write_importance, write_k_scores,
                 write_kernel_scores, write_manifest, write_plots_csv,
                 write_spectra_csv, write_table,
                 write_variance_table)
from .preprocess import (load_default_srf, make_bin_srf, preprocess_dataset,
                         preprocess_spectra, simulate_multispectral)
from .selection import grid_search_kernel, select_components
from .spectra import (SpectralSample, assemble_dataset, richness_class_spectra,
                      split_by_region)
from .synthetic import generate_synthetic_dataset, uniform_grid
from .util import debug_time, log_to_stderr, logger


_subcommands = {}


def subcommand(func=None, flags=(), required=()):
    """Decorator to register `func` as a `richspec <name>` subcommand.

    `flags` names the flag groups the subcommand accepts; `required` names
    the path settings that must be set before it runs.
    """
    if func is None:
        return partial(subcommand, flags=flags, required=required)
    @wraps(func)
    def wrapper(cfg):
        cfg.validate(required)
        return func(cfg)
    wrapper.flags = flags
    _subcommands[func.__name__.replace('_', '-')] = wrapper
    return wrapper


class _ArgumentParser(argparse.ArgumentParser):

    def error(self, message):
        raise ConfigError(message)


def _add_data_flags(parser):
    parser.add_argument('--spectra', help='spectra CSV '
                        '(plot_id,cloud,wl_<center>x<fwhm>,...)')
    parser.add_argument('--plots', help='field plots CSV '
                        '(plot_id,region,richness,plot_area_m2,survey_date)')


def _add_preprocess_flags(parser):
    parser.add_argument('--bin-width', dest='bin_width', type=float,
                        help='resample to Gaussian bins of this width (nm)')
    parser.add_argument('--bin-start', dest='bin_start', type=float,
                        help='center of the first bin (nm)')
    parser.add_argument('--no-mask', dest='mask', action='store_false',
                        help='keep the atmospheric and edge bands')
    parser.add_argument('--mask-centers', dest='mask_centers',
                        help='comma-separated band centers to remove (nm)')
    parser.add_argument('--mask-tolerance', dest='mask_tolerance', type=float,
                        help='band mask matching half-width (nm)')
    parser.add_argument('--no-normalize', dest='normalize',
                        action='store_false',
                        help='skip mean normalization')


def _add_pipeline_flags(parser):
    parser.add_argument('--method', help='feature extraction: pca, cca, pls')
    parser.add_argument('-k', type=int, help='number of components')
    parser.add_argument('--regressor', help='regressor: krr, gpr, rfr')
    parser.add_argument('--sigma', type=float, help='dot-product offset')
    parser.add_argument('--length-scale', dest='length_scale', type=float,
                        help='RBF length scale')
    parser.add_argument('--white-noise', dest='white_noise', type=float,
                        help='white-noise kernel term')
    parser.add_argument('--kernel-terms', dest='kernel_terms',
                        help='comma-separated subset of dot,rbf,white')
    parser.add_argument('--lam', type=float, help='KRR regularization')
    parser.add_argument('--epsilon', type=float, help='GPR noise level')
    parser.add_argument('--optimize', action='store_true',
                        help='fit GPR kernel parameters by marginal '
                        'likelihood')
    parser.add_argument('--trees', type=int, help='RFR tree count')
    parser.add_argument('--no-bootstrap', dest='bootstrap',
                        action='store_false',
                        help='grow RFR trees on all rows')
    parser.add_argument('--max-features', dest='max_features', type=float,
                        help='fraction of features tried per RFR split')
    parser.add_argument('--scale', action='store_true',
                        help='variance-scale bands before extraction')


def _add_cv_flags(parser):
    parser.add_argument('--repetitions', type=int,
                        help='two-fold CV repetitions')
    parser.add_argument('--seed', type=int, help='master random seed')
    parser.add_argument('--threads', type=int,
                        help='worker threads (default: all cores)')


def _add_tuning_flags(parser):
    parser.add_argument('--k-range', dest='k_range',
                        help='component counts to try, e.g. 1-10')
    parser.add_argument('--grid-sigma', dest='grid_sigma',
                        help='comma-separated sigma values')
    parser.add_argument('--grid-length', dest='grid_length',
                        help='comma-separated length-scale values')
    parser.add_argument('--grid-delta', dest='grid_delta',
                        help='comma-separated white-noise values')
    parser.add_argument('--selection-metric', dest='selection_metric',
                        help='max_r or min_rmse')
    parser.add_argument('--by-region', dest='by_region', action='store_true',
                        help='treat each region as its own dataset')


def _add_run_flags(parser):
    parser.add_argument('--tune-kernel', dest='tune_kernel',
                        action='store_true', help='grid-search the kernel')
    parser.add_argument('--tune-k', dest='tune_k', action='store_true',
                        help='select the component count')
    parser.add_argument('--per-fold-importance', dest='per_fold_importance',
                        action='store_true',
                        help='importance averaged over CV training folds')


def _add_synth_flags(parser):
    parser.add_argument('--n', dest='synth_n', type=int, help='plot count')
    parser.add_argument('--bands', dest='synth_bands', type=int,
                        help='band count of the 10.2 nm grid from 400 nm')
    parser.add_argument('--patterns', dest='synth_patterns', type=int,
                        help='latent pattern count')
    parser.add_argument('--noise', dest='synth_noise', type=float,
                        help='response noise sd')
    parser.add_argument('--offset', dest='synth_offset', type=float,
                        help='richness offset')
    parser.add_argument('--nuisance', dest='synth_nuisance', type=int,
                        help='response-free broad pattern count')
    parser.add_argument('--region', dest='synth_region', help='region label')


_flag_groups = {
    'data': _add_data_flags,
    'srf': lambda p: p.add_argument('--srf', help='SRF CSV '
                                    '(band_name,center_nm,fwhm_nm); default '
                                    'bundled Sentinel-2 VNIR'),
    'model': lambda p: p.add_argument('--model', help='fitted model file'),
    'preprocess': _add_preprocess_flags,
    'pipeline': _add_pipeline_flags,
    'cv': _add_cv_flags,
    'tuning': _add_tuning_flags,
    'run': _add_run_flags,
    'synth': _add_synth_flags,
    'classes': lambda p: p.add_argument('--classes', type=int,
                                        help='richness class count'),
}


def _load_dataset(cfg):
    samples, grid = load_spectra_csv(cfg.spectra)
    return assemble_dataset(samples, load_plots_csv(cfg.plots), grid)


def _load_spectra(cfg):
    """Spectra file as (samples, grid, X)."""
    samples, grid = load_spectra_csv(cfg.spectra)
    if not samples:
        raise ValidationError('%s: no spectra' % cfg.spectra)
    return samples, grid, np.vstack([s.values for s in samples])


def _bins(cfg, grid):
    if cfg.bin_width is None:
        return None
    return make_bin_srf(grid, cfg.bin_width, cfg.bin_start)


def _prepared_dataset(cfg):
    d = _load_dataset(cfg)
    return preprocess_dataset(d, _bins(cfg, d.grid), cfg.band_mask(),
                              cfg.normalize)


def _srf(cfg):
    return load_srf_csv(cfg.srf) if cfg.srf else load_default_srf()


def _datasets(cfg, d):
    if not cfg.by_region:
        return [d]
    return list(split_by_region(d).values())


def _out(cfg, name):
    return os.path.join(cfg.output, name)


def _report(text, *args):
    print(text % args)


def _manifest(cfg, extra=None):
    manifest = {
        'config': cfg.as_dict(),
        'seed': cfg.seed,
        'versions': {
            'richspec': __version__,
            'python': platform.python_version(),
            'numpy': np.__version__,
            'scipy': scipy.__version__,
            'pandas': pd.__version__,
            'joblib': joblib.__version__,
        },
    }
    manifest.update(extra or {})
    return manifest


@subcommand(flags=('data', 'preprocess'), required=('spectra',))
def preprocess(cfg):
    """Bin, mask and mean-normalize spectra."""
    samples, grid, X = _load_spectra(cfg)
    X, grid = preprocess_spectra(X, grid, _bins(cfg, grid), cfg.band_mask(),
                                 cfg.normalize)
    out = [SpectralSample(s.plot_id, row, grid.grid_id, s.cloud_flagged)
           for s, row in zip(samples, X)]
    path = write_spectra_csv(_out(cfg, 'preprocessed_spectra.csv'), out, grid)
    _report('%d spectra on %d bands -> %s', len(out), grid.band_count, path)
    return 0


@subcommand(flags=('data', 'srf'), required=('spectra',))
def simulate_ms(cfg):
    """Resample spectra to multispectral bands."""
    samples, grid, X = _load_spectra(cfg)
    X, ms_grid = simulate_multispectral(X, grid, _srf(cfg))
    out = [SpectralSample(s.plot_id, row, ms_grid.grid_id, s.cloud_flagged)
           for s, row in zip(samples, X)]
    path = write_spectra_csv(_out(cfg, 'multispectral_spectra.csv'), out,
                             ms_grid)
    _report('%d spectra simulated on %d bands (%s) -> %s', len(out),
            ms_grid.band_count, ', '.join(ms_grid.names), path)
    return 0


@subcommand(flags=('data', 'preprocess', 'pipeline', 'cv'),
            required=('spectra', 'plots'))
def fit(cfg):
    """Fit a pipeline on all plots and save it."""
    d = _prepared_dataset(cfg)
    model = fit_pipeline(cfg.pipeline_spec(), d.X, d.y, cfg.seed)
    with ArtifactWriter(cfg.output) as writer:
        save_model(writer.path('model.txt'), model)
        write_variance_table(writer.path('variance.csv'),
                             variance_table(model.extractor, d.X))
        write_component_scores(writer.path('component_scores.csv'),
                               *component_scores(model.extractor, d))
    _report('fitted %s on %d plots -> %s', model.spec.describe(), d.n,
            cfg.output)
    return 0


@subcommand(flags=('data', 'preprocess', 'model'),
            required=('spectra', 'model'))
def predict(cfg):
    """Predict richness for spectra with a saved model."""
    samples, grid, X = _load_spectra(cfg)
    model = load_model(cfg.model)
    X, _ = preprocess_spectra(X, grid, _bins(cfg, grid), cfg.band_mask(),
                              cfg.normalize)
    pred = predict_pipeline(model, X)
    path = _out(cfg, 'predictions.csv')
    write_table(path, ('plot_id', 'prediction'),
                zip([s.plot_id for s in samples], pred))
    _report('%d predictions -> %s', len(pred), path)
    return 0


@subcommand(flags=('data', 'preprocess', 'pipeline', 'cv', 'tuning'),
            required=('spectra', 'plots'))
def evaluate(cfg):
    """Repeated two-fold cross-validation."""
    d = _prepared_dataset(cfg)
    spec, cv = cfg.pipeline_spec(), cfg.cv_config()
    with ArtifactWriter(cfg.output) as writer:
        if cfg.by_region:
            regions = split_by_region(d)
            for region, part in regions.items():
                report = two_fold_cv(part, spec, cv)
                writer.track(write_cv_report(cfg.output, report,
                                             'cv_%s' % region))
                _report('%s %s: mean r %.4f, mean RMSE %.4f', region,
                        spec.describe(), report.mean_r, report.mean_rmse)
            report = pooled_region_eval(list(regions.values()), spec, cv)
            writer.track(write_cv_report(cfg.output, report, 'cv_pooled'))
            label = 'pooled'
        else:
            report = two_fold_cv(d, spec, cv)
            writer.track(write_cv_report(cfg.output, report))
            label = 'all'
    _report('%s %s: mean r %.4f, mean RMSE %.4f (pooled r %.4f, RMSE %.4f)',
            label, spec.describe(), report.mean_r, report.mean_rmse,
            report.pooled_r, report.pooled_rmse)
    return 0


@subcommand(flags=('data', 'preprocess', 'pipeline', 'cv', 'tuning'),
            required=('spectra', 'plots'))
def tune_kernel(cfg):
    """Grid-search the kernel parameters."""
    d = _prepared_dataset(cfg)
    result = grid_search_kernel(d, cfg.pipeline_spec(), cfg.grid_spec(),
                                cfg.cv_config(), cfg.selection_metric)
    write_kernel_scores(_out(cfg, 'kernel_scores.csv'), result)
    best = result.best_row
    _report('best sigma=%g length_scale=%g delta=%g (mean r %.4f, mean RMSE '
            '%.4f)', best.config.sigma, best.config.length_scale,
            best.config.white_noise, best.mean_r, best.mean_rmse)
    return 0


@subcommand(flags=('data', 'preprocess', 'pipeline', 'cv', 'tuning'),
            required=('spectra', 'plots'))
def tune_k(cfg):
    """Select the number of components."""
    d = _prepared_dataset(cfg)
    result = select_components(_datasets(cfg, d), cfg.pipeline_spec(),
                               cfg.k_range, cfg.cv_config(),
                               cfg.selection_metric)
    write_k_scores(_out(cfg, 'k_scores.csv'), result)
    best = result.best_row
    _report('best k=%d (mean r %.4f, mean RMSE %.4f)', best.config,
            best.mean_r, best.mean_rmse)
    return 0


@subcommand(flags=('data', 'preprocess', 'pipeline', 'cv', 'run'),
            required=('spectra', 'plots'))
def importance(cfg):
    """Relative importance of each band."""
    d = _prepared_dataset(cfg)
    profile = importance_report(d, cfg.method, cfg.k, cfg.scale,
                                cfg.per_fold_importance, cfg.cv_config())
    path = write_importance(_out(cfg, 'importance.csv'), profile)
    _report('top bands (nm): %s -> %s',
            ', '.join('%g' % c for c in profile.top_bands(5)), path)
    return 0


@subcommand(flags=('synth', 'cv'))
def synth(cfg):
    """Write a synthetic spectra and plots pair."""
    grid = uniform_grid(count=cfg.synth_bands)
    d = generate_synthetic_dataset(
        cfg.seed, cfg.synth_n, grid, cfg.synth_patterns, cfg.synth_noise,
        cfg.synth_offset, nuisance_patterns=cfg.synth_nuisance,
        region=cfg.synth_region)
    spectra, plots, _ = d.components()
    with ArtifactWriter(cfg.output) as writer:
        write_spectra_csv(writer.path('spectra.csv'), spectra, grid)
        write_plots_csv(writer.path('plots.csv'), plots)
    _report('%d synthetic plots on %d bands -> %s', d.n, grid.band_count,
            cfg.output)
    return 0


@subcommand(flags=('data', 'preprocess', 'pipeline', 'cv', 'tuning'),
            required=('spectra', 'plots'))
def compare(cfg):
    """Cross-validate every extraction and regressor pairing."""
    d = _prepared_dataset(cfg)
    rows = compare_pipelines(d, spec=cfg.pipeline_spec(), cfg=cfg.cv_config())
    path = write_comparison(_out(cfg, 'comparison.csv'), rows)
    for row in rows:
        _report('%s+%s: mean r %.4f, mean RMSE %.4f', row.method.upper(),
                row.regressor.upper(), row.mean_r, row.mean_rmse)
    _report('-> %s', path)
    return 0


@subcommand(flags=('data', 'preprocess', 'classes'),
            required=('spectra', 'plots'))
def classes(cfg):
    """Mean spectra of low to high richness classes."""
    d = _prepared_dataset(cfg)
    result = richness_class_spectra(d, cfg.classes)
    path = write_class_spectra(_out(cfg, 'class_spectra.csv'), result)
    for i, (lo, hi, count) in enumerate(zip(result.lower, result.upper,
                                            result.counts)):
        _report('class %d: richness %g..%g (%d plots)', i + 1, lo, hi, count)
    _report('-> %s', path)
    return 0


@subcommand(flags=('data', 'preprocess', 'pipeline', 'cv', 'tuning', 'run'),
            required=('spectra', 'plots'))
@debug_time('run')
def run(cfg):
    """Preprocess, optionally tune, cross-validate, fit and analyse."""
    d = _prepared_dataset(cfg)
    spec, cv = cfg.pipeline_spec(), cfg.cv_config()
    selected = {}
    with ArtifactWriter(cfg.output) as writer:
        write_dataset_spectra(writer.path('preprocessed_spectra.csv'), d)
        if cfg.tune_k:
            result = select_components(_datasets(cfg, d), spec, cfg.k_range,
                                       cv, cfg.selection_metric)
            write_k_scores(writer.path('k_scores.csv'), result)
            spec = replace(spec, k=result.best_config)
            selected['k'] = result.best_config
        if cfg.tune_kernel:
            result = grid_search_kernel(d, spec, cfg.grid_spec(), cv,
                                        cfg.selection_metric)
            write_kernel_scores(writer.path('kernel_scores.csv'), result)
            spec = replace(spec, kernel=result.best_config)
            selected['kernel'] = {
                'sigma': result.best_config.sigma,
                'length_scale': result.best_config.length_scale,
                'white_noise': result.best_config.white_noise,
            }
        report = two_fold_cv(d, spec, cv)
        writer.track(write_cv_report(cfg.output, report))
        model = fit_pipeline(spec, d.X, d.y, cfg.seed)
        save_model(writer.path('model.txt'), model)
        write_variance_table(writer.path('variance.csv'),
                             variance_table(model.extractor, d.X))
        write_component_scores(writer.path('component_scores.csv'),
                               *component_scores(model.extractor, d))
        profile = importance_report(d, spec.method, spec.k, spec.scale,
                                    cfg.per_fold_importance, cv)
        write_importance(writer.path('importance.csv'), profile)
        write_manifest(writer.path('manifest.json'), _manifest(cfg, {
            'selected': selected,
            'plots': d.n,
            'bands': d.m,
            'aggregation': 'mean_r/mean_rmse average the validation folds; '
                           'pooled_r/pooled_rmse use all predictions',
        }))
    _report('%s: mean r %.4f, mean RMSE %.4f over %d folds -> %s',
            spec.describe(), report.mean_r, report.mean_rmse,
            len(report.per_repetition), cfg.output)
    return 0


def build_parser():
    parser = _ArgumentParser(
        prog='richspec',
        description='Predict plant species richness from reflectance '
        'spectra.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True
    for name, func in _subcommands.items():
        sub = commands.add_parser(
            name, help=(func.__doc__ or '').strip().split('\n')[0] or None,
            argument_default=argparse.SUPPRESS)
        sub.add_argument('--config', help='JSON config file; flags win')
        sub.add_argument('--output', '-o', help='output directory')
        sub.add_argument('--verbose', '-v', action='count',
                         help='log progress (-vv for debug output)')
        for group in func.flags:
            _flag_groups[group](sub)
    return parser


def main(argv=None):
    try:
        args = vars(build_parser().parse_args(argv))
        command = args.pop('command')
        config_path = args.pop('config', None)
        log_to_stderr(args.pop('verbose', 0))
        cfg = RunConfig.from_sources(config_path, args)
        return _subcommands[command](cfg)
    except RichspecError as e:
        print('richspec: error: %s' % e.message, file=sys.stderr)
        return e.exit_code
