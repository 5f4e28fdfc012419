"""Domain types for spectra, field plots and the joined modelling dataset."""
from collections import Counter, namedtuple
from dataclasses import dataclass, field
import datetime

import numpy as np

from .errors import ConfigError, ValidationError
from .util import logger


DEFAULT_PLOT_AREA_M2 = 400.0


def _frozen_array(values, ndim=1):
    arr = np.array(values, dtype=float, ndmin=ndim)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BandGrid:
    """Band centers and widths (nm) of a sensor or processing grid.

    `names` is optional and only set for grids derived from named spectral
    response functions (e.g. simulated multispectral bands).
    """
    centers: tuple
    fwhm: tuple
    grid_id: str = 'grid'
    names: tuple = None

    def __post_init__(self):
        centers = tuple(float(c) for c in self.centers)
        fwhm = tuple(float(f) for f in self.fwhm)
        object.__setattr__(self, 'centers', centers)
        object.__setattr__(self, 'fwhm', fwhm)
        if len(centers) != len(fwhm):
            raise ValidationError(
                'grid %s has %d centers but %d fwhm values' %
                (self.grid_id, len(centers), len(fwhm)))
        if not centers:
            raise ValidationError('grid %s has no bands' % self.grid_id)
        if any(not np.isfinite(c) or c <= 0 for c in centers):
            raise ValidationError(
                'grid %s has non-positive band centers' % self.grid_id)
        if any(not np.isfinite(f) or f <= 0 for f in fwhm):
            raise ValidationError(
                'grid %s has non-positive fwhm values' % self.grid_id)
        for i, (a, b) in enumerate(zip(centers, centers[1:])):
            if not b > a:
                raise ValidationError(
                    'grid %s centers not strictly increasing at band %d '
                    '(%r after %r)' % (self.grid_id, i + 1, b, a))
        if self.names is not None:
            names = tuple(str(n) for n in self.names)
            if len(names) != len(centers):
                raise ValidationError(
                    'grid %s has %d names for %d bands' %
                    (self.grid_id, len(names), len(centers)))
            object.__setattr__(self, 'names', names)

    @property
    def band_count(self):
        return len(self.centers)

    @property
    def center_array(self):
        return np.asarray(self.centers)

    @property
    def fwhm_array(self):
        return np.asarray(self.fwhm)

    def same_bands(self, other):
        """Whether `other` has identical centers and widths (ids ignored)."""
        return self.centers == other.centers and self.fwhm == other.fwhm

    def select(self, keep, grid_id=None):
        """Return the grid restricted to the boolean mask or index list
        `keep`, order preserved."""
        idx = np.flatnonzero(keep) if np.asarray(keep).dtype == bool \
            else np.asarray(keep, dtype=int)
        names = None if self.names is None else [self.names[i] for i in idx]
        return BandGrid([self.centers[i] for i in idx],
                        [self.fwhm[i] for i in idx],
                        grid_id or self.grid_id, names)


@dataclass(frozen=True)
class SpectralSample:
    plot_id: str
    values: np.ndarray
    grid_ref: str
    cloud_flagged: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'plot_id', str(self.plot_id))
        object.__setattr__(self, 'values', _frozen_array(self.values))
        if not np.all(np.isfinite(self.values)):
            raise ValidationError(
                'spectrum %s has non-finite values' % self.plot_id)


@dataclass(frozen=True)
class RichnessPlot:
    plot_id: str
    region: str
    richness: int
    plot_area_m2: float = DEFAULT_PLOT_AREA_M2
    survey_date: datetime.date = None

    def __post_init__(self):
        object.__setattr__(self, 'plot_id', str(self.plot_id))
        object.__setattr__(self, 'region', str(self.region))
        if isinstance(self.richness, float) and not self.richness.is_integer():
            raise ValidationError(
                'plot %s: richness %r is not an integer count' %
                (self.plot_id, self.richness))
        richness = int(self.richness)
        if richness < 0:
            raise ValidationError(
                'plot %s: richness must be >= 0, got %d' %
                (self.plot_id, richness))
        object.__setattr__(self, 'richness', richness)
        if not self.plot_area_m2 > 0:
            raise ValidationError(
                'plot %s: plot_area_m2 must be > 0, got %r' %
                (self.plot_id, self.plot_area_m2))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Joined modelling data: X (n plots × m bands), response y, and plot
    linkage.

    The constructor only coerces types; use `validate_dataset()` to check the
    invariants, which reports violations instead of raising.
    """
    X: np.ndarray
    y: np.ndarray
    grid: BandGrid
    plot_ids: tuple
    regions: tuple = None

    def __post_init__(self):
        object.__setattr__(self, 'X', _frozen_array(self.X, ndim=2))
        object.__setattr__(self, 'y', _frozen_array(self.y))
        object.__setattr__(self, 'plot_ids',
                           tuple(str(p) for p in self.plot_ids))
        regions = self.regions
        if regions is None:
            regions = ('',) * len(self.plot_ids)
        object.__setattr__(self, 'regions', tuple(str(r) for r in regions))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.X.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.grid == other.grid and
                self.plot_ids == other.plot_ids and
                self.regions == other.regions and
                np.array_equal(self.X, other.X) and
                np.array_equal(self.y, other.y))

    __hash__ = None

    def subset(self, rows):
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.X[rows], self.y[rows], self.grid,
                       [self.plot_ids[i] for i in rows],
                       [self.regions[i] for i in rows])

    def with_spectra(self, X, grid):
        """Return a copy with the spectra replaced (same plots, new grid)."""
        return Dataset(X, self.y, grid, self.plot_ids, self.regions)

    def components(self):
        """Return (spectra, plots, grid) from which `assemble_dataset()`
        rebuilds this dataset."""
        spectra = [SpectralSample(pid, row, self.grid.grid_id)
                   for pid, row in zip(self.plot_ids, self.X)]
        plots = [RichnessPlot(pid, region, int(round(val)))
                 for pid, region, val in
                 zip(self.plot_ids, self.regions, self.y)]
        return spectra, plots, self.grid


Diagnostic = namedtuple('Diagnostic', 'code message row column')
Diagnostic.__new__.__defaults__ = (None, None)


def assemble_dataset(spectra, plots, grid):
    """Join spectra and field plots by plot id.

    Cloud-flagged spectra are dropped. Rows come out sorted by plot id, so the
    result does not depend on the input order.
    """
    by_id = {}
    for sample in spectra:
        if sample.grid_ref != grid.grid_id:
            raise ValidationError(
                'spectrum %s references grid %r, expected %r' %
                (sample.plot_id, sample.grid_ref, grid.grid_id))
        if len(sample.values) != grid.band_count:
            raise ValidationError(
                'spectrum %s has %d values for %d bands' %
                (sample.plot_id, len(sample.values), grid.band_count))
        if sample.plot_id in by_id:
            raise ValidationError(
                'duplicate plot_id %r in spectra' % sample.plot_id)
        by_id[sample.plot_id] = sample
    plots_by_id = {}
    for plot in plots:
        if plot.plot_id in plots_by_id:
            raise ValidationError(
                'duplicate plot_id %r in plots' % plot.plot_id)
        plots_by_id[plot.plot_id] = plot
    clouded = sorted(pid for pid, s in by_id.items() if s.cloud_flagged)
    if clouded:
        logger.info('dropped %d cloud-flagged spectra: %s',
                    len(clouded), ', '.join(clouded))
    matched = sorted(pid for pid, s in by_id.items()
                     if not s.cloud_flagged and pid in plots_by_id)
    if not matched:
        raise ValidationError('no matched samples')
    unmatched = len(by_id) - len(clouded) - len(matched)
    if unmatched:
        logger.info('%d spectra have no matching plot', unmatched)
    X = np.vstack([by_id[pid].values for pid in matched])
    y = [plots_by_id[pid].richness for pid in matched]
    regions = [plots_by_id[pid].region for pid in matched]
    return Dataset(X, y, grid, matched, regions)


def validate_dataset(d):
    """Return a list of diagnostics, one per violated invariant; empty when
    the dataset is well-formed."""
    diagnostics = []
    X = d.X
    if X.ndim != 2:
        return [Diagnostic('shape',
                           'X must be a matrix, got %d dims' % X.ndim)]
    n, m = X.shape
    if len(d.y) != n:
        diagnostics.append(Diagnostic(
            'length', 'y has %d entries for %d rows' % (len(d.y), n)))
    if len(d.plot_ids) != n:
        diagnostics.append(Diagnostic(
            'length', '%d plot_ids for %d rows' % (len(d.plot_ids), n)))
    if len(d.regions) != n:
        diagnostics.append(Diagnostic(
            'length', '%d regions for %d rows' % (len(d.regions), n)))
    if m != d.grid.band_count:
        diagnostics.append(Diagnostic(
            'columns', '%d columns for %d grid bands' %
            (m, d.grid.band_count)))
    for row, col in zip(*np.nonzero(~np.isfinite(X))):
        diagnostics.append(Diagnostic(
            'nonfinite', 'non-finite value at row %d, band %d' % (row, col),
            int(row), int(col)))
    for row in np.flatnonzero(~np.isfinite(d.y)):
        diagnostics.append(Diagnostic(
            'nonfinite', 'non-finite response at row %d' % row, int(row)))
    for row in np.flatnonzero(d.y < 0):
        diagnostics.append(Diagnostic(
            'negative', 'negative response at row %d' % row, int(row)))
    for pid, count in sorted(Counter(d.plot_ids).items()):
        if count > 1:
            diagnostics.append(Diagnostic(
                'duplicate', 'duplicate plot_id %r (%d rows)' % (pid, count),
                d.plot_ids.index(pid)))
    return diagnostics


def concat_datasets(datasets):
    """Stack datasets on identical band grids row-wise."""
    datasets = list(datasets)
    if not datasets:
        raise ConfigError('no datasets to concatenate')
    grid = datasets[0].grid
    for d in datasets[1:]:
        if not d.grid.same_bands(grid):
            raise ValidationError('incompatible band grids')
    counts = Counter(pid for d in datasets for pid in d.plot_ids)
    plot_ids = []
    for index, d in enumerate(datasets):
        for pid in d.plot_ids:
            if counts[pid] > 1:
                pid = '%s@%d' % (pid, index)
            plot_ids.append(pid)
    collisions = sum(1 for c in counts.values() if c > 1)
    if collisions:
        logger.info('qualified %d plot ids shared between datasets',
                    collisions)
    return Dataset(np.vstack([d.X for d in datasets]),
                   np.concatenate([d.y for d in datasets]),
                   grid, plot_ids,
                   [r for d in datasets for r in d.regions])


def split_by_region(d):
    """Return a mapping region -> Dataset, regions in sorted order."""
    regions = {}
    for i, region in enumerate(d.regions):
        regions.setdefault(region, []).append(i)
    return {region: d.subset(rows) for region, rows in sorted(regions.items())}


@dataclass(frozen=True)
class ClassSpectra:
    """Mean spectrum per richness class, low to high."""
    grid: BandGrid
    means: np.ndarray
    lower: tuple
    upper: tuple
    counts: tuple = field(default=())


def richness_class_spectra(d, n_classes=3):
    """Average the spectra of plots falling into each richness quantile class
    (tertiles by default)."""
    if n_classes < 1 or n_classes > d.n:
        raise ConfigError('cannot form %d richness classes from %d plots' %
                          (n_classes, d.n))
    order = np.argsort(d.y, kind='stable')
    groups = np.array_split(order, n_classes)
    means = np.vstack([d.X[g].mean(axis=0) for g in groups])
    return ClassSpectra(
        d.grid, _frozen_array(means, ndim=2),
        tuple(float(d.y[g].min()) for g in groups),
        tuple(float(d.y[g].max()) for g in groups),
        tuple(len(g) for g in groups))
