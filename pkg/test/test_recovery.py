"""End-to-end behaviour on synthetic data with a known response."""
import time

import numpy as np
import pytest

from richspec.evaluation import (CVConfig, PipelineSpec, pooled_region_eval,
                                 two_fold_cv)
from richspec.kernel import KernelConfig
from richspec.preprocess import load_default_srf, simulate_dataset
from richspec.selection import select_components
from richspec.synthetic import signal_sd

from .conftest import small_kernel, synthetic


SEEDS = range(10)


def gpr_spec(k=2):
    return PipelineSpec('pls', k, 'gpr', small_kernel(), epsilon=0.05)


def linear_spec(k=2):
    return PipelineSpec('pls', k, 'krr', KernelConfig(sigma=1.0,
                                                      terms=('dot',)),
                        lam=1e-8)


def test_recovers_noise_free_response():
    d = synthetic(seed=11, round_response=False)
    report = two_fold_cv(d, gpr_spec(), CVConfig(100, 0, 1))
    assert report.mean_r >= 0.99


def test_recovers_noisy_response():
    clean = synthetic(seed=12, round_response=False)
    noisy = synthetic(seed=12, round_response=False,
                      noise_sd=0.5 * signal_sd())
    assert np.array_equal(clean.X, noisy.X)
    start = time.perf_counter()
    report = two_fold_cv(noisy, gpr_spec(), CVConfig(100, 0, 1))
    assert time.perf_counter() - start < 60.0
    assert report.mean_r >= 0.85


def test_response_drowned_in_noise_is_not_predicted():
    for seed in SEEDS:
        d = synthetic(seed=seed, round_response=False,
                      noise_sd=1e3 * signal_sd())
        report = two_fold_cv(d, gpr_spec(), CVConfig(20, seed, 1))
        assert abs(report.mean_r) <= 0.3, seed


def test_selects_true_component_count():
    hits = 0
    for seed in SEEDS:
        d = synthetic(seed=seed, round_response=False,
                      pattern_centers=[550.0, 800.0],
                      pattern_widths=[10.0, 60.0],
                      noise_sd=0.3 * signal_sd())
        result = select_components(d, linear_spec(), (1, 2, 3, 4),
                                   CVConfig(50, seed, 1))
        hits += result.best_config == 2
    assert hits >= 8


@pytest.mark.parametrize('seed', SEEDS)
def test_pooling_opposite_regions_hurts(seed):
    noise = 0.3 * signal_sd()
    north = synthetic(seed=seed, response_weights=[1.0, -1.0],
                      noise_sd=noise, region='north', id_prefix='N')
    south = synthetic(seed=seed + 100, response_weights=[-1.0, 1.0],
                      noise_sd=noise, region='south', id_prefix='S')
    cv = CVConfig(20, seed, 1)
    pooled = pooled_region_eval([north, south], gpr_spec(), cv)
    for region in (north, south):
        assert pooled.mean_r < two_fold_cv(region, gpr_spec(), cv).mean_r


def test_narrow_feature_lost_by_multispectral_bands():
    srf = load_default_srf()
    wins = 0
    for seed in SEEDS:
        d = synthetic(seed=seed, round_response=False, latent_patterns=1,
                      pattern_centers=[610.0],
                      pattern_widths=[12.0 / 2.3548], nuisance_patterns=3,
                      noise_sd=0.2 * signal_sd(latent_patterns=1))
        cv = CVConfig(20, seed, 1)
        hs = two_fold_cv(d, linear_spec(4), cv)
        ms = two_fold_cv(simulate_dataset(d, srf), linear_spec(4), cv)
        wins += hs.mean_r > ms.mean_r
    assert wins >= 8
