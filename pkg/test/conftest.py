import os
from textwrap import dedent

import numpy as np
import pytest

from richspec.evaluation import CVConfig
from richspec.kernel import KernelConfig
from richspec.spectra import BandGrid, Dataset
from richspec.synthetic import generate_synthetic_dataset, uniform_grid


DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')


def data_path(name):
    return os.path.join(DATA_DIR, name)


def write_text(path, text):
    """Write dedented `text` (leading newline dropped) to `path`."""
    path = str(path)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dedent(text).lstrip('\n'))
    return path


def random_matrix(seed, n, m):
    return np.random.default_rng(seed).standard_normal((n, m))


def random_problem(seed, n=20, m=52):
    """Random spectra-like matrix with a response correlated to a few
    columns."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    y = X[:, :3] @ np.array([1.0, -0.5, 0.25]) + 0.1 * rng.standard_normal(n)
    return X, y


def small_kernel(**kwargs):
    """Kernel sized for component scores of order 0.1 to 1."""
    params = dict(sigma=1.0, length_scale=10.0, white_noise=1e-4)
    params.update(kwargs)
    return KernelConfig(**params)


def quick_cv(repetitions=5, seed=0, threads=1):
    return CVConfig(repetitions, seed, threads)


def synthetic(seed=0, n=40, bands=52, **kwargs):
    return generate_synthetic_dataset(seed, n, uniform_grid(count=bands),
                                      **kwargs)


def make_grid(centers, fwhm=10.0, grid_id='grid'):
    return BandGrid(centers, [fwhm] * len(centers), grid_id)


def make_dataset(X, y, grid=None, regions=None):
    X = np.asarray(X, dtype=float)
    if grid is None:
        grid = make_grid(400.0 + 10.0 * np.arange(X.shape[1]))
    plot_ids = ['P%03d' % (i + 1) for i in range(X.shape[0])]
    return Dataset(X, y, grid, plot_ids, regions)


@pytest.fixture
def dataset():
    return synthetic(seed=3, noise_sd=2.0)
