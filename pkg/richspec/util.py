import functools
import logging
import os
import sys
import time

import numpy as np


LOG_FORMAT = '%(asctime)s %(threadName)s %(levelname)s %(message)s'


def debug_time(label_or_callable=None, detail=None):
    """Log the wall time of each call as `TIME <label>: <seconds>s`.

    `detail` is a callable or a format string applied to the call's
    arguments; its text is appended to the record. Nothing is formatted
    unless the logger is enabled for DEBUG.
    """
    def inner(func):
        label = label_or_callable
        if not isinstance(label, str):
            label = getattr(func, '__name__', func.__class__.__name__)

        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            if not logger.isEnabledFor(logging.DEBUG):
                return func(*args, **kwargs)
            start = time.perf_counter()
            res = func(*args, **kwargs)
            text = 'TIME %s: %.4fs' % (label, time.perf_counter() - start)
            if detail is not None:
                if callable(detail):
                    text += ' ' + detail(*args, **kwargs)
                else:
                    text += ' ' + detail.format(*args, **kwargs)
            logger.debug(text)
            return res
        return wrapper
    if callable(label_or_callable):
        return inner(label_or_callable)
    return inner


def make_logger(env=None):
    """The `richspec` logger, silent below ERROR unless `RICHSPEC_LOG_FILE`
    names a file to log to at `RICHSPEC_LOG_LEVEL`."""
    env = os.environ if env is None else env
    logger = logging.getLogger('richspec')
    logger.setLevel(logging.ERROR)
    log_file = env.get('RICHSPEC_LOG_FILE')
    if log_file:
        handler = logging.FileHandler(log_file)
        # CV folds and grid cells log from joblib worker threads.
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
        logger.setLevel(env.get('RICHSPEC_LOG_LEVEL', 'ERROR').upper())
    logger.debug('richspec logger started.')
    return logger


def log_to_stderr(verbosity):
    """Attach a stderr handler: INFO for -v, DEBUG (with timings) for
    -vv."""
    if not verbosity:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('%(levelname)s %(message)s'))
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbosity > 1 else logging.INFO)


def substream(seed, *key):
    """Return a generator for the substream `key` of the master `seed`.

    Substreams are keyed by position (repetition, fold, tree, ...), so the
    numbers drawn never depend on the order in which work is scheduled.
    """
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def substream_seed(seed, *key):
    """Return an integer seed derived from the substream `key` of `seed`."""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return int(seq.generate_state(1)[0])


def resolve_threads(threads):
    """Number of workers to use; None means all available cores."""
    if threads is None:
        return os.cpu_count() or 1
    return max(1, int(threads))


logger = make_logger()
