"""Synthetic spectra with a known response, for checking the pipeline when
field data is not at hand.

Each plot's spectrum is a smooth vegetation-like baseline plus latent
Gaussian-bump patterns weighted by per-plot latent scores, optional broad
nuisance patterns that do not affect the response, and white band noise.
Richness is an affine function of the latent scores plus Gaussian noise,
clipped at zero and (by default) rounded to integer counts.
"""
import numpy as np

from .errors import ConfigError
from .spectra import BandGrid, Dataset
from .util import logger, substream


DEFAULT_AMPLITUDE = 0.05
DEFAULT_BAND_NOISE = 1e-3
DEFAULT_RESPONSE_SCALE = 10.0
DEFAULT_RICHNESS_OFFSET = 50.0
NUISANCE_SD_NM = 80.0
NUISANCE_AMPLITUDE = 0.05

# Substream keys.
_LATENT, _NUISANCE, _BAND_NOISE, _RESPONSE_NOISE, _NUISANCE_CENTERS = range(5)


def baseline_spectrum(centers):
    """Green-vegetation-like reflectance: low in the visible, rising across
    the red edge to a NIR plateau."""
    centers = np.asarray(centers, dtype=float)
    green = 0.03 * np.exp(-0.5 * ((centers - 555.0) / 25.0) ** 2)
    return 0.04 + green + 0.35 / (1.0 + np.exp(-(centers - 715.0) / 12.0))


def gaussian_pattern(centers, center_nm, sd_nm, amplitude=1.0):
    centers = np.asarray(centers, dtype=float)
    return amplitude * np.exp(-0.5 * ((centers - center_nm) / sd_nm) ** 2)


def default_pattern_layout(grid, count):
    """Evenly spread pattern centers over the grid interior, with widths
    growing with the pattern index so that patterns differ in energy."""
    lo, hi = grid.centers[0], grid.centers[-1]
    centers = np.linspace(lo, hi, count + 2)[1:-1]
    spacing = (hi - lo) / (count + 1)
    widths = spacing * (0.15 + 0.1 * np.arange(count))
    return centers, widths


def generate_synthetic_dataset(seed, n, grid, latent_patterns=2, noise_sd=0.0,
                               richness_offset=DEFAULT_RICHNESS_OFFSET,
                               pattern_centers=None, pattern_widths=None,
                               amplitude=DEFAULT_AMPLITUDE,
                               response_weights=None,
                               response_scale=DEFAULT_RESPONSE_SCALE,
                               nuisance_patterns=0,
                               band_noise=DEFAULT_BAND_NOISE,
                               region='synthetic', id_prefix='S',
                               round_response=True):
    """Generate `n` plots on `grid`, deterministically for a given `seed`.

    Pattern widths are Gaussian standard deviations in nm. The response is
    richness_offset + response_scale * (z @ response_weights) + noise, where
    z holds the standard-normal latent scores of each plot.
    """
    if latent_patterns < 1:
        raise ConfigError('latent_patterns must be >= 1, got %r' %
                          latent_patterns)
    if not noise_sd >= 0:
        raise ConfigError('noise_sd must be >= 0, got %r' % noise_sd)
    if n < 1:
        raise ConfigError('n must be >= 1, got %r' % n)
    centers, widths = default_pattern_layout(grid, latent_patterns)
    if pattern_centers is not None:
        centers = np.asarray(pattern_centers, dtype=float)
    if pattern_widths is not None:
        widths = np.asarray(pattern_widths, dtype=float)
    weights = np.ones(latent_patterns) if response_weights is None \
        else np.asarray(response_weights, dtype=float)
    for name, values in (('pattern_centers', centers),
                         ('pattern_widths', widths),
                         ('response_weights', weights)):
        if len(values) != latent_patterns:
            raise ConfigError('%s has %d entries for %d latent patterns' %
                              (name, len(values), latent_patterns))
    if np.any(widths <= 0):
        raise ConfigError('pattern widths must be > 0')

    wl = grid.center_array
    patterns = np.vstack([gaussian_pattern(wl, c, w, amplitude)
                          for c, w in zip(centers, widths)])
    z = substream(seed, _LATENT).standard_normal((n, latent_patterns))
    X = baseline_spectrum(wl) + z @ patterns
    if nuisance_patterns:
        nuisance_centers = substream(seed, _NUISANCE_CENTERS).uniform(
            wl[0], wl[-1], nuisance_patterns)
        nuisance = np.vstack([
            gaussian_pattern(wl, c, NUISANCE_SD_NM, NUISANCE_AMPLITUDE)
            for c in nuisance_centers])
        u = substream(seed, _NUISANCE).standard_normal(
            (n, nuisance_patterns))
        X = X + u @ nuisance
    if band_noise:
        X = X + band_noise * substream(seed, _BAND_NOISE).standard_normal(
            X.shape)

    y = richness_offset + response_scale * (z @ weights)
    if noise_sd:
        y = y + noise_sd * substream(seed, _RESPONSE_NOISE).standard_normal(n)
    clipped = int(np.sum(y < 0))
    y = np.clip(y, 0.0, None)
    if round_response:
        y = np.round(y)
    if clipped:
        logger.info('synthetic richness clipped at zero for %d plots',
                    clipped)
    width = len(str(n))
    plot_ids = ['%s%0*d' % (id_prefix, width, i + 1) for i in range(n)]
    return Dataset(X, y, grid, plot_ids, [region] * n)


def signal_sd(latent_patterns=2, response_scale=DEFAULT_RESPONSE_SCALE,
              response_weights=None):
    """Standard deviation of the noise-free response."""
    weights = np.ones(latent_patterns) if response_weights is None \
        else np.asarray(response_weights, dtype=float)
    return float(response_scale * np.linalg.norm(weights))


def uniform_grid(start_nm=400.0, step_nm=10.2, count=52, grid_id='synthetic'):
    """Evenly spaced grid with fwhm equal to the spacing."""
    centers = start_nm + step_nm * np.arange(count)
    return BandGrid(centers, [step_nm] * count, grid_id)
