"""Spectral preprocessing: Gaussian SRF band aggregation, band masking,
mean normalization and multispectral simulation."""
from collections import namedtuple
from dataclasses import dataclass
import math

import numpy as np

from .errors import NumericalError, ValidationError
from .spectra import BandGrid
from .util import logger


# Divides a Gaussian's fwhm to give its standard deviation.
FWHM_TO_SD = 2.0 * math.sqrt(2.0 * math.log(2.0))
# Source bands further than this many fwhm from a destination center are
# ignored.
SUPPORT_FWHM = 3.0

BIN_WIDTH_NM = 10.2
# Atmospheric (water vapour, oxygen) and low-quality edge bands.
DEFAULT_REMOVE_CENTERS = (759.0, 769.0, 933.4, 943.4, 953.2,
                          402.8, 410.3, 999.5)
DEFAULT_MASK_TOLERANCE_NM = 0.5


SrfBand = namedtuple('SrfBand', 'name center_nm fwhm_nm')


@dataclass(frozen=True)
class SrfSet:
    """Gaussian spectral response functions, one per destination band."""
    bands: tuple
    name: str = 'srf'

    def __post_init__(self):
        bands = tuple(SrfBand(str(b[0]), float(b[1]), float(b[2]))
                      for b in self.bands)
        if not bands:
            raise ValidationError('SRF set %s has no bands' % self.name)
        seen = set()
        for band in bands:
            if band.name in seen:
                raise ValidationError(
                    'duplicate SRF band name %r' % band.name)
            seen.add(band.name)
            if not band.fwhm_nm > 0:
                raise ValidationError(
                    'SRF band %s: fwhm must be > 0, got %r' %
                    (band.name, band.fwhm_nm))
        object.__setattr__(self, 'bands', bands)

    @property
    def band_count(self):
        return len(self.bands)

    @property
    def names(self):
        return tuple(b.name for b in self.bands)

    def to_grid(self):
        """Destination grid (sorted by center, which SRF files need not
        be)."""
        bands = sorted(self.bands, key=lambda b: b.center_nm)
        return BandGrid([b.center_nm for b in bands],
                        [b.fwhm_nm for b in bands],
                        self.name, [b.name for b in bands])


@dataclass(frozen=True)
class BandMask:
    remove_centers: tuple = DEFAULT_REMOVE_CENTERS
    tolerance_nm: float = DEFAULT_MASK_TOLERANCE_NM

    def __post_init__(self):
        object.__setattr__(self, 'remove_centers',
                           tuple(float(c) for c in self.remove_centers))
        if not self.tolerance_nm >= 0:
            raise ValidationError(
                'mask tolerance must be >= 0, got %r' % self.tolerance_nm)

    def keep(self, grid):
        """Boolean mask of the bands of `grid` that survive."""
        centers = grid.center_array
        keep = np.ones(len(centers), dtype=bool)
        for center in self.remove_centers:
            keep &= np.abs(centers - center) > self.tolerance_nm
        return keep


def srf_weights(src, dst):
    """Return the (dst bands × src bands) matrix of renormalized Gaussian
    weights.

    Each row sums to one over the source centers within ±3 fwhm of the
    destination center, so a constant spectrum is preserved exactly.
    """
    centers = np.array([b.center_nm for b in dst.bands])
    fwhm = np.array([b.fwhm_nm for b in dst.bands])
    sd = fwhm / FWHM_TO_SD
    offset = src.center_array[np.newaxis, :] - centers[:, np.newaxis]
    support = np.abs(offset) <= SUPPORT_FWHM * fwhm[:, np.newaxis]
    g = np.exp(-0.5 * (offset / sd[:, np.newaxis]) ** 2) * support
    totals = g.sum(axis=1)
    for band, total in zip(dst.bands, totals):
        if not total > 0:
            raise NumericalError(
                'band has no source coverage: %s (%.2f nm)' %
                (band.name, band.center_nm))
    return g / totals[:, np.newaxis]


def _check_values(values, grid):
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.band_count:
        raise ValidationError(
            'spectrum has %d values for %d bands' %
            (values.shape[-1], grid.band_count))
    return values


def gaussian_resample(values, src, dst):
    """Resample `values` on grid `src` to the bands of the SrfSet `dst`.

    `values` may be a single spectrum or a matrix with one spectrum per row.
    """
    values = _check_values(values, src)
    return values @ srf_weights(src, dst).T


def apply_band_mask(values, grid, mask):
    """Drop the bands of `grid` within the mask tolerance of any removal
    wavelength. Returns (values, reduced grid)."""
    values = _check_values(values, grid)
    keep = mask.keep(grid)
    if not keep.any():
        raise NumericalError('empty spectrum')
    removed = int((~keep).sum())
    if removed:
        logger.debug('band mask removed %d of %d bands',
                     removed, grid.band_count)
    return values[..., keep], grid.select(keep)


def mean_normalize(values):
    """Divide each spectrum by its mean over all bands.

    Works on a single spectrum or on a matrix of row spectra.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise ValidationError('spectrum must be nonempty and finite')
    mean = values.mean(axis=-1, keepdims=True)
    if np.any(np.abs(mean) <= 1e-15):
        raise NumericalError('zero-mean spectrum')
    return values / mean


def simulate_multispectral(values, src, srf):
    """Simulate a multispectral sensor from hyperspectral `values`.

    Returns (values, grid) where the grid carries the SRF band names. Output
    bands are ordered by center wavelength.
    """
    out = gaussian_resample(values, src, srf)
    order = np.argsort([b.center_nm for b in srf.bands], kind='stable')
    return out[..., order], srf.to_grid()


def make_bin_srf(grid, width_nm=BIN_WIDTH_NM, start_nm=None):
    """SrfSet of equally spaced Gaussian bins of `width_nm` covering `grid`.

    Bin centers start at `start_nm` (default: the first source center) and
    stop at the last source center.
    """
    if not width_nm > 0:
        raise ValidationError('bin width must be > 0, got %r' % width_nm)
    start = grid.centers[0] if start_nm is None else float(start_nm)
    stop = grid.centers[-1]
    count = int(math.floor((stop - start) / width_nm + 1e-9)) + 1
    centers = start + width_nm * np.arange(count)
    return SrfSet([('bin_%.2f' % c, c, width_nm) for c in centers],
                  '%s-bin%g' % (grid.grid_id, width_nm))


def preprocess_spectra(X, grid, bins=None, mask=None, normalize=True):
    """Apply binning, band masking and mean normalization (in that order) to
    the row spectra `X`. Returns (X, grid)."""
    X = _check_values(X, grid)
    source_bands = grid.band_count
    if bins is not None:
        X = gaussian_resample(X, grid, bins)
        grid = BandGrid([b.center_nm for b in bins.bands],
                        [b.fwhm_nm for b in bins.bands], bins.name)
    if mask is not None:
        X, grid = apply_band_mask(X, grid, mask)
    if normalize:
        X = mean_normalize(X)
    logger.info('preprocessed %d spectra: %d -> %d bands',
                len(X), source_bands, grid.band_count)
    return X, grid


def preprocess_dataset(d, bins=None, mask=None, normalize=True):
    """`preprocess_spectra` applied to every spectrum of `d`."""
    X, grid = preprocess_spectra(d.X, d.grid, bins, mask, normalize)
    return d.with_spectra(X, grid)


def simulate_dataset(d, srf):
    X, grid = simulate_multispectral(d.X, d.grid, srf)
    return d.with_spectra(X, grid)


def load_default_srf():
    """Bundled Gaussian approximation of Sentinel-2's VNIR bands."""
    # pylint: disable=import-outside-toplevel
    from .io import load_srf_csv, default_srf_path
    return load_srf_csv(default_srf_path())
