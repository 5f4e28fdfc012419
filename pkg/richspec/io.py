"""File formats.

All tables are UTF-8 CSV with LF line endings and floats written with 17
significant digits, so values survive a write/read round trip exactly.
Every write goes to a temporary file in the destination directory that is
then renamed over the target.
"""
import datetime
import io
import json
import os
import re
import tempfile

import numpy as np
import pandas as pd

from .errors import ConfigError, ValidationError
from .evaluation import PipelineModel, PipelineSpec
from .extraction import ComponentModel
from .forest import RegressionTree, RfrModel
from .kernel import KernelConfig
from .preprocess import SrfSet
from .regression import GprModel, KrrModel
from .spectra import BandGrid, RichnessPlot, SpectralSample
from .util import logger


FLOAT_FORMAT = '%.17g'
SPECTRA_KEYS = ('plot_id', 'cloud')
PLOTS_HEADER = ('plot_id', 'region', 'richness', 'plot_area_m2',
                'survey_date')
SRF_HEADER = ('band_name', 'center_nm', 'fwhm_nm')
MODEL_MAGIC = 'richspec-model'
MODEL_VERSION = 1

_wavelength_column = re.compile(r'^wl_([^x]+)x(.+)$')
_true = {'1', 'true', 'yes', 'y', 't'}
_false = {'0', 'false', 'no', 'n', 'f', ''}


def _stem(path):
    return os.path.splitext(os.path.basename(path))[0]


def default_srf_path():
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data',
                        'sentinel2_vnir.csv')


def _read_table(path):
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False,
                           encoding='utf-8')
    except FileNotFoundError:
        raise ConfigError('file not found: %s' % path)
    except pd.errors.EmptyDataError:
        raise ValidationError('%s: empty file' % path)
    except pd.errors.ParserError as e:
        raise ValidationError('%s: malformed CSV (%s)' % (path, e))


def _float(text, path, row, column):
    try:
        return float(text)
    except ValueError:
        raise ValidationError(
            '%s: non-numeric value %r at row %d, column %s' %
            (path, text, row + 1, column), row=row + 1, column=column)


def _numeric_block(df, columns, path):
    try:
        return df[list(columns)].to_numpy(dtype=float)
    except ValueError:
        for row, values in enumerate(df[list(columns)].itertuples(
                index=False)):
            for column, text in zip(columns, values):
                _float(text, path, row, column)
        raise


def _flag(text, path, row, column):
    value = text.strip().lower()
    if value in _true:
        return True
    if value in _false:
        return False
    raise ValidationError('%s: invalid flag %r at row %d, column %s' %
                          (path, text, row + 1, column))


def _format_wavelength(value):
    return repr(float(value))


def parse_spectra_header(columns, path='<spectra>'):
    """Return the BandGrid described by the wavelength columns of a spectra
    header."""
    columns = list(columns)
    if tuple(columns[:2]) != SPECTRA_KEYS or len(columns) < 3:
        raise ValidationError(
            '%s: malformed header, expected plot_id,cloud,wl_<center>x<fwhm>'
            ',...' % path)
    centers, fwhm = [], []
    for column in columns[2:]:
        match = _wavelength_column.match(column)
        if not match:
            raise ValidationError('%s: malformed header column %r' %
                                  (path, column))
        try:
            center, width = float(match.group(1)), float(match.group(2))
        except ValueError:
            raise ValidationError('%s: malformed header column %r' %
                                  (path, column))
        if centers and not center > centers[-1]:
            raise ValidationError(
                '%s: wavelengths not strictly increasing at column %r' %
                (path, column))
        centers.append(center)
        fwhm.append(width)
    return BandGrid(centers, fwhm, _stem(path))


def load_spectra_csv(path):
    df = _read_table(path)
    grid = parse_spectra_header(df.columns, path)
    band_columns = list(df.columns[2:])
    values = _numeric_block(df, band_columns, path)
    samples = []
    for row, (plot_id, cloud) in enumerate(zip(df['plot_id'], df['cloud'])):
        if not plot_id:
            raise ValidationError('%s: empty plot_id at row %d' %
                                  (path, row + 1))
        samples.append(SpectralSample(plot_id, values[row], grid.grid_id,
                                      _flag(cloud, path, row, 'cloud')))
    logger.debug('read %d spectra on %d bands from %s', len(samples),
                 grid.band_count, path)
    return samples, grid


def load_plots_csv(path):
    df = _read_table(path)
    missing = [c for c in PLOTS_HEADER[:3] if c not in df.columns]
    if missing:
        raise ValidationError('%s: missing columns %s' %
                              (path, ', '.join(missing)))
    plots = []
    for row, record in enumerate(df.to_dict('records')):
        text = record['richness'].strip()
        try:
            richness = int(text)
        except ValueError:
            raise ValidationError(
                '%s: richness %r at row %d is not an integer' %
                (path, text, row + 1), row=row + 1, column='richness')
        area = record.get('plot_area_m2', '')
        area = _float(area, path, row, 'plot_area_m2') if area else 400.0
        date = record.get('survey_date', '').strip() or None
        if date is not None:
            try:
                date = datetime.date.fromisoformat(date)
            except ValueError:
                raise ValidationError('%s: bad date %r at row %d' %
                                      (path, date, row + 1),
                                      row=row + 1, column='survey_date')
        try:
            plots.append(RichnessPlot(record['plot_id'], record['region'],
                                      richness, area, date))
        except ValidationError as e:
            raise ValidationError('%s: row %d: %s' %
                                  (path, row + 1, e.message), row=row + 1)
    return plots


def load_srf_csv(path):
    df = _read_table(path)
    if tuple(df.columns) != SRF_HEADER:
        raise ValidationError('%s: expected header %s' %
                              (path, ','.join(SRF_HEADER)))
    values = _numeric_block(df, SRF_HEADER[1:], path)
    return SrfSet([(name, c, f) for name, (c, f) in
                   zip(df['band_name'], values)], _stem(path))


def atomic_write(path, text):
    """Write `text` to `path` via a temporary sibling file and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix='.%s.' % os.path.basename(path),
                               dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def write_frame(path, df):
    buffer = io.StringIO()
    df.to_csv(buffer, index=False, float_format=FLOAT_FORMAT,
              lineterminator='\n')
    return atomic_write(path, buffer.getvalue())


def write_table(path, columns, rows):
    return write_frame(path, pd.DataFrame(list(rows), columns=list(columns)))


def write_spectra_csv(path, samples, grid):
    columns = list(SPECTRA_KEYS) + [
        'wl_%sx%s' % (_format_wavelength(c), _format_wavelength(f))
        for c, f in zip(grid.centers, grid.fwhm)]
    df = pd.DataFrame(np.vstack([s.values for s in samples]) if samples
                      else np.empty((0, grid.band_count)),
                      columns=columns[2:])
    df.insert(0, 'cloud', [int(s.cloud_flagged) for s in samples])
    df.insert(0, 'plot_id', [s.plot_id for s in samples])
    return write_frame(path, df)


def write_dataset_spectra(path, d):
    spectra, _, grid = d.components()
    return write_spectra_csv(path, spectra, grid)


def write_plots_csv(path, plots):
    return write_table(path, PLOTS_HEADER, (
        (p.plot_id, p.region, p.richness, p.plot_area_m2,
         p.survey_date.isoformat() if p.survey_date else '')
        for p in plots))


def write_srf_csv(path, srf):
    return write_table(path, SRF_HEADER, srf.bands)


def write_variance_table(path, rows):
    return write_table(path, ('component', 'eigenvalue', 'pct', 'cumulative'),
                       rows)


def write_cv_report(directory, report, prefix='cv'):
    """Write per-fold metrics, validation predictions and a summary of both
    aggregations. Returns the written paths."""
    folds = write_table(os.path.join(directory, '%s_folds.csv' % prefix),
                        ('rep', 'fold', 'r', 'rmse'), report.per_repetition)
    predictions = write_table(
        os.path.join(directory, '%s_predictions.csv' % prefix),
        ('plot_id', 'region', 'truth', 'prediction', 'rep', 'fold'),
        report.predictions)
    summary = write_table(
        os.path.join(directory, '%s_summary.csv' % prefix),
        ('aggregation', 'r', 'rmse'),
        [('per_fold_mean', report.mean_r, report.mean_rmse),
         ('pooled_predictions', report.pooled_r, report.pooled_rmse)])
    return [folds, predictions, summary]


def write_importance(path, profile):
    columns = ['wavelength_nm', 'raw_importance', 'normalized_importance']
    data = [profile.band_centers, profile.raw, profile.normalized]
    if profile.normalized_sd is not None:
        columns.append('normalized_sd')
        data.append(profile.normalized_sd)
    return write_table(path, columns, zip(*data))


def write_kernel_scores(path, result):
    return write_table(path, ('sigma', 'length', 'delta', 'mean_r',
                              'mean_rmse'),
                       ((row.config.sigma, row.config.length_scale,
                         row.config.white_noise, row.mean_r, row.mean_rmse)
                        for row in result.score_table))


def write_k_scores(path, result):
    return write_table(path, ('k', 'mean_r', 'mean_rmse'),
                       result.score_table)


def write_component_scores(path, plot_ids, T):
    T = np.asarray(T)
    df = pd.DataFrame(T, columns=['t%d' % (j + 1) for j in range(T.shape[1])])
    df.insert(0, 'plot_id', list(plot_ids))
    return write_frame(path, df)


def write_comparison(path, rows):
    return write_table(path, ('method', 'regressor', 'mean_r', 'mean_rmse',
                              'pooled_r', 'pooled_rmse'), rows)


def write_class_spectra(path, classes):
    df = pd.DataFrame(
        classes.means.T,
        columns=['class_%d' % (i + 1) for i in range(len(classes.means))])
    df.insert(0, 'wavelength_nm', classes.grid.centers)
    return write_frame(path, df)


def write_manifest(path, manifest):
    return atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True)
                        + '\n')


class ArtifactWriter:
    """Collects the files written during a run under `directory` and removes
    them again if the run fails."""

    def __init__(self, directory):
        self.directory = directory
        self.paths = []

    def path(self, name):
        path = os.path.join(self.directory, name)
        self.paths.append(path)
        return path

    def track(self, paths):
        self.paths.extend(paths)
        return paths

    def __enter__(self):
        os.makedirs(self.directory, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            return False
        removed = 0
        for path in self.paths:
            if os.path.exists(path):
                os.remove(path)
                removed += 1
        logger.info('run failed, removed %d partial outputs', removed)
        return False


def _encode(name, value):
    if value is None:
        return '%s\tnone\t' % name
    if isinstance(value, (bool, np.bool_)):
        return '%s\tbool\t%d' % (name, int(value))
    if isinstance(value, (int, np.integer)):
        return '%s\tint\t%d' % (name, value)
    if isinstance(value, str):
        if '\t' in value or '\n' in value:
            raise ValidationError('cannot serialize %s: control characters'
                                  % name)
        return '%s\tstr\t%s' % (name, value)
    arr = np.asarray(value, dtype=float)
    shape = ','.join(str(s) for s in arr.shape)
    return '%s\t[%s]\t%s' % (name, shape, ','.join(
        FLOAT_FORMAT % v for v in arr.ravel()))


def _decode(kind, text):
    if kind == 'none':
        return None
    if kind == 'bool':
        return text == '1'
    if kind == 'int':
        return int(text)
    if kind == 'str':
        return text
    if not (kind.startswith('[') and kind.endswith(']')):
        raise ValidationError('unknown field type %r' % kind)
    shape = tuple(int(s) for s in kind[1:-1].split(',') if s)
    values = np.array([float(v) for v in text.split(',') if v])
    return values.reshape(shape) if shape else float(values[0])


def _model_fields(model):
    spec = model.spec
    yield 'spec.method', spec.method
    yield 'spec.k', spec.k
    yield 'spec.regressor', spec.regressor
    yield 'spec.kernel.sigma', spec.kernel.sigma
    yield 'spec.kernel.length_scale', spec.kernel.length_scale
    yield 'spec.kernel.white_noise', spec.kernel.white_noise
    yield 'spec.kernel.terms', ','.join(spec.kernel.terms)
    yield 'spec.lam', spec.lam
    yield 'spec.epsilon', spec.epsilon
    yield 'spec.optimize', spec.optimize
    yield 'spec.trees', spec.trees
    yield 'spec.bootstrap', spec.bootstrap
    yield 'spec.max_features', spec.max_features
    yield 'spec.scale', spec.scale
    ext = model.extractor
    yield 'extractor.method', ext.method
    yield 'extractor.W', ext.W
    yield 'extractor.x_mean', ext.x_mean
    yield 'extractor.eigenvalues', ext.eigenvalues
    yield 'extractor.y_mean', ext.y_mean
    yield 'extractor.x_scale', ext.x_scale
    yield 'extractor.ridge', ext.ridge
    reg = model.regressor
    if isinstance(reg, RfrModel):
        yield 'forest.d', reg.d
        yield 'forest.rng_seed', reg.rng_seed
        yield 'forest.n_features', reg.n_features
        yield 'forest.bootstrap', reg.bootstrap
        yield 'forest.max_features', reg.max_features
        for i, tree in enumerate(reg.trees):
            for part in ('feature', 'threshold', 'left', 'right', 'value'):
                yield 'tree.%d.%s' % (i, part), getattr(tree, part)
        return
    yield 'kernel.sigma', reg.kernel.sigma
    yield 'kernel.length_scale', reg.kernel.length_scale
    yield 'kernel.white_noise', reg.kernel.white_noise
    yield 'kernel.terms', ','.join(reg.kernel.terms)
    yield 'alpha', reg.alpha
    yield 'train_T', reg.train_T
    yield 'y_mean', reg.y_mean
    if isinstance(reg, KrrModel):
        yield 'lam', reg.lam
    else:
        yield 'epsilon', reg.epsilon
        yield 'log_marginal_likelihood', reg.log_marginal_likelihood


def dump_model(model):
    lines = ['%s\t%d' % (MODEL_MAGIC, MODEL_VERSION)]
    lines.extend(_encode(name, value) for name, value in _model_fields(model))
    return '\n'.join(lines) + '\n'


def save_model(path, model):
    return atomic_write(path, dump_model(model))


def _kernel(fields, prefix):
    return KernelConfig(fields[prefix + 'sigma'],
                        fields[prefix + 'length_scale'],
                        fields[prefix + 'white_noise'],
                        tuple(fields[prefix + 'terms'].split(',')))


def parse_model(text, source='<model>'):
    lines = text.split('\n')
    magic = lines[0].split('\t')
    if len(magic) != 2 or magic[0] != MODEL_MAGIC:
        raise ValidationError('%s: not a richspec model file' % source)
    if int(magic[1]) != MODEL_VERSION:
        raise ValidationError('%s: unsupported model version %s' %
                              (source, magic[1]))
    fields = {}
    for number, line in enumerate(lines[1:], 2):
        if not line:
            continue
        parts = line.split('\t')
        if len(parts) != 3:
            raise ValidationError('%s: malformed line %d' % (source, number))
        fields[parts[0]] = _decode(parts[1], parts[2])
    try:
        return _build_model(fields)
    except KeyError as e:
        raise ValidationError('%s: missing field %s' % (source, e.args[0]))


def _build_model(fields):
    spec = PipelineSpec(
        fields['spec.method'], fields['spec.k'], fields['spec.regressor'],
        _kernel(fields, 'spec.kernel.'), fields['spec.lam'],
        fields['spec.epsilon'], fields['spec.optimize'], fields['spec.trees'],
        fields['spec.bootstrap'], fields['spec.max_features'],
        fields['spec.scale'])
    extractor = ComponentModel(
        fields['extractor.method'], fields['extractor.W'],
        fields['extractor.x_mean'], fields['extractor.eigenvalues'],
        fields['extractor.y_mean'], fields['extractor.x_scale'],
        fields['extractor.ridge'])
    if 'forest.d' in fields:
        trees = []
        for i in range(fields['forest.d']):
            part = {name: fields['tree.%d.%s' % (i, name)]
                    for name in ('feature', 'threshold', 'left', 'right',
                                 'value')}
            trees.append(RegressionTree(
                np.atleast_1d(part['feature']).astype(int),
                np.atleast_1d(part['threshold']),
                np.atleast_1d(part['left']).astype(int),
                np.atleast_1d(part['right']).astype(int),
                np.atleast_1d(part['value'])))
        regressor = RfrModel(tuple(trees), fields['forest.d'],
                             fields['forest.rng_seed'],
                             fields['forest.n_features'],
                             fields['forest.bootstrap'],
                             fields['forest.max_features'])
    elif 'lam' in fields:
        regressor = KrrModel(_kernel(fields, 'kernel.'), fields['lam'],
                             fields['alpha'], fields['train_T'],
                             fields['y_mean'])
    else:
        regressor = GprModel(_kernel(fields, 'kernel.'), fields['epsilon'],
                             fields['alpha'], fields['train_T'],
                             fields['y_mean'],
                             fields['log_marginal_likelihood'])
    return PipelineModel(spec, extractor, regressor)


def load_model(path):
    try:
        with open(path, encoding='utf-8') as f:
            text = f.read()
    except FileNotFoundError:
        raise ConfigError('file not found: %s' % path)
    return parse_model(text, path)
