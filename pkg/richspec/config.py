import json
import os

from .errors import ConfigError
from .evaluation import CVConfig, PipelineSpec
from .extraction import METHODS
from .forest import DEFAULT_MAX_FEATURES, DEFAULT_TREES
from .kernel import TERMS, KernelConfig
from .preprocess import (DEFAULT_MASK_TOLERANCE_NM, DEFAULT_REMOVE_CENTERS,
                         BandMask)
from .regression import REGRESSORS
from .selection import DECADES, DEFAULT_K_RANGE, METRICS, GridSpec


def _float_list(value):
    if isinstance(value, str):
        value = [v for v in value.split(',') if v.strip()]
    return [float(v) for v in value]


class RunConfig:
    """Settings of a command-line run.

    Values come from the defaults below, then from a JSON config file, then
    from command-line flags; later sources win.
    """
    _defaults = {
        'spectra': None,
        'plots': None,
        'srf': None,
        'model': None,
        'output': 'richspec-out',
        'bin_width': None,
        'bin_start': None,
        'mask': True,
        'mask_centers': list(DEFAULT_REMOVE_CENTERS),
        'mask_tolerance': DEFAULT_MASK_TOLERANCE_NM,
        'normalize': True,
        'method': 'pls',
        'k': 2,
        'regressor': 'krr',
        'sigma': 1e3,
        'length_scale': 1e3,
        'white_noise': 10.0,
        'kernel_terms': list(TERMS),
        'lam': 1.0,
        'epsilon': 1.0,
        'optimize': False,
        'trees': DEFAULT_TREES,
        'bootstrap': True,
        'max_features': DEFAULT_MAX_FEATURES,
        'scale': False,
        'repetitions': 100,
        'seed': 0,
        'threads': None,
        'tune_kernel': False,
        'tune_k': False,
        'k_range': list(DEFAULT_K_RANGE),
        'grid_sigma': list(DECADES),
        'grid_length': list(DECADES),
        'grid_delta': list(DECADES),
        'selection_metric': 'max_r',
        'by_region': False,
        'per_fold_importance': False,
        'classes': 3,
        'synth_n': 40,
        'synth_bands': 52,
        'synth_patterns': 2,
        'synth_noise': 0.0,
        'synth_offset': 50.0,
        'synth_nuisance': 0,
        'synth_region': 'synthetic',
    }

    def __init__(self, values=None):
        values = dict(values or {})
        unknown = sorted(set(values) - set(RunConfig._defaults))
        if unknown:
            raise ConfigError('unknown setting: %s' % ', '.join(unknown))
        for key, val_default in RunConfig._defaults.items():
            val = values.get(key, val_default)
            try:
                converter = getattr(RunConfig, '_convert_' + key)
            except AttributeError:
                pass
            else:
                if val is not None:
                    try:
                        val = converter(val)
                    except (TypeError, ValueError) as e:
                        raise ConfigError('invalid value for %s: %r (%s)' %
                                          (key, val, e))
            setattr(self, key, val)

    @classmethod
    def from_sources(cls, config_path=None, overrides=None):
        values = {}
        if config_path:
            try:
                with open(config_path, encoding='utf-8') as f:
                    values = json.load(f)
            except FileNotFoundError:
                raise ConfigError('config file not found: %s' % config_path)
            except ValueError as e:
                raise ConfigError('config file %s is not valid JSON: %s' %
                                  (config_path, e))
            if not isinstance(values, dict):
                raise ConfigError('config file %s must hold an object' %
                                  config_path)
        values.update(overrides or {})
        return cls(values)

    def as_dict(self):
        return {key: getattr(self, key) for key in RunConfig._defaults}

    def validate(self, required=()):
        for key in required:
            path = getattr(self, key)
            if not path:
                raise ConfigError('missing required setting: %s' % key)
            if not os.path.exists(path):
                raise ConfigError('%s: file not found: %s' % (key, path))
        if self.seed is None:
            raise ConfigError('missing required setting: seed')

    def kernel_config(self):
        return KernelConfig(self.sigma, self.length_scale, self.white_noise,
                            tuple(self.kernel_terms))

    def pipeline_spec(self):
        return PipelineSpec(self.method, self.k, self.regressor,
                            self.kernel_config(), self.lam, self.epsilon,
                            self.optimize, self.trees, self.bootstrap,
                            self.max_features, self.scale)

    def cv_config(self):
        return CVConfig(self.repetitions, self.seed, self.threads)

    def band_mask(self):
        if not self.mask:
            return None
        return BandMask(tuple(self.mask_centers), self.mask_tolerance)

    def grid_spec(self):
        return GridSpec(tuple(self.grid_sigma), tuple(self.grid_length),
                        tuple(self.grid_delta))

    @staticmethod
    def _convert_method(value):
        value = str(value).lower()
        if value not in METHODS:
            raise ValueError('choose from %s' % ', '.join(METHODS))
        return value

    @staticmethod
    def _convert_regressor(value):
        value = str(value).lower()
        if value not in REGRESSORS:
            raise ValueError('choose from %s' % ', '.join(REGRESSORS))
        return value

    @staticmethod
    def _convert_selection_metric(value):
        if value not in METRICS:
            raise ValueError('choose from %s' % ', '.join(METRICS))
        return value

    @staticmethod
    def _convert_kernel_terms(value):
        if isinstance(value, str):
            value = [v.strip() for v in value.split(',') if v.strip()]
        unknown = set(value) - set(TERMS)
        if unknown:
            raise ValueError('unknown terms %s' % ', '.join(sorted(unknown)))
        return list(value)

    @staticmethod
    def _convert_k_range(value):
        if isinstance(value, str):
            if '-' in value:
                lo, hi = value.split('-', 1)
                return list(range(int(lo), int(hi) + 1))
            value = value.split(',')
        return [int(v) for v in value]

    _convert_mask_centers = staticmethod(_float_list)
    _convert_grid_sigma = staticmethod(_float_list)
    _convert_grid_length = staticmethod(_float_list)
    _convert_grid_delta = staticmethod(_float_list)
    _convert_k = staticmethod(int)
    _convert_seed = staticmethod(int)
    _convert_threads = staticmethod(int)
    _convert_repetitions = staticmethod(int)
    _convert_trees = staticmethod(int)
    _convert_classes = staticmethod(int)
    _convert_synth_n = staticmethod(int)
    _convert_synth_bands = staticmethod(int)
    _convert_synth_patterns = staticmethod(int)
    _convert_synth_nuisance = staticmethod(int)
    _convert_sigma = staticmethod(float)
    _convert_length_scale = staticmethod(float)
    _convert_white_noise = staticmethod(float)
    _convert_lam = staticmethod(float)
    _convert_epsilon = staticmethod(float)
    _convert_max_features = staticmethod(float)
    _convert_mask_tolerance = staticmethod(float)
    _convert_bin_width = staticmethod(float)
    _convert_bin_start = staticmethod(float)
    _convert_synth_noise = staticmethod(float)
    _convert_synth_offset = staticmethod(float)
