"""Random forest regression: bagged CART trees with squared-error splits."""
from dataclasses import dataclass

from joblib import Parallel, delayed
import numpy as np

from .errors import ConfigError
from .regression import _check_features, _training_inputs, predict
from .util import debug_time, resolve_threads, substream


DEFAULT_TREES = 100
DEFAULT_MAX_FEATURES = 1.0 / 3.0

LEAF = -1


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """A fitted tree in array form. Node 0 is the root; leaves have
    feature == LEAF and carry their prediction in `value`."""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self):
        return len(self.feature)

    def predict(self, T):
        node = np.zeros(T.shape[0], dtype=int)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            current = node[rows]
            go_left = (T[rows, self.feature[current]] <=
                       self.threshold[current])
            node[rows] = np.where(go_left, self.left[current],
                                  self.right[current])
            active = self.feature[node] != LEAF
        return self.value[node]


@dataclass(frozen=True, eq=False)
class RfrModel:
    trees: tuple
    d: int
    rng_seed: int
    n_features: int
    bootstrap: bool = True
    max_features: float = DEFAULT_MAX_FEATURES


def _best_split(T, y, features):
    """Return (feature, threshold, gain) of the split of rows (T, y) that
    most reduces the squared error, or None.

    Thresholds are midpoints between consecutive distinct values. Ties keep
    the first candidate found, scanning features in the given order.
    """
    n = len(y)
    total = y.sum()
    base = total * total / n
    best = None
    for f in features:
        order = np.argsort(T[:, f], kind='stable')
        xs = T[order, f]
        ys = y[order]
        distinct = np.flatnonzero(xs[1:] > xs[:-1])
        if not len(distinct):
            continue
        left_sum = np.cumsum(ys)[distinct]
        left_n = distinct + 1.0
        right_sum = total - left_sum
        score = (left_sum ** 2 / left_n + right_sum ** 2 / (n - left_n))
        i = int(np.argmax(score))
        gain = score[i] - base
        if best is None or gain > best[2]:
            threshold = 0.5 * (xs[distinct[i]] + xs[distinct[i] + 1])
            # Midpoint can round up to the right value for adjacent floats.
            if not threshold < xs[distinct[i] + 1]:
                threshold = xs[distinct[i]]
            best = (f, threshold, gain)
    return best


def grow_tree(T, y, rng, max_features=1.0):
    """Grow an unpruned CART tree (minimum leaf size 1, no depth limit)."""
    m = T.shape[1]
    n_try = max(1, int(max_features * m))
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for column in (feature, threshold, left, right, value):
            column.append(LEAF if column is feature else 0)
        return len(feature) - 1

    stack = [(new_node(), np.arange(len(y)))]
    while stack:
        node, rows = stack.pop()
        ys = y[rows]
        if np.all(ys == ys[0]):
            value[node] = ys[0]
            continue
        value[node] = ys.mean()
        split = None
        if n_try < m:
            split = _best_split(T[rows], ys,
                                np.sort(rng.choice(m, n_try, replace=False)))
        if split is None:
            split = _best_split(T[rows], ys, range(m))
        if split is None:
            continue
        f, t, _ = split
        goes_left = T[rows, f] <= t
        feature[node], threshold[node] = f, t
        left[node], right[node] = new_node(), new_node()
        stack.append((right[node], rows[~goes_left]))
        stack.append((left[node], rows[goes_left]))
    return RegressionTree(np.array(feature, dtype=int),
                          np.array(threshold, dtype=float),
                          np.array(left, dtype=int),
                          np.array(right, dtype=int),
                          np.array(value, dtype=float))


def _grow_member(T, y, seed, index, bootstrap, max_features):
    rng = substream(seed, index)
    if bootstrap:
        rows = rng.integers(0, len(y), len(y))
        T, y = T[rows], y[rows]
    return grow_tree(T, y, rng, max_features)


@debug_time
def fit_rfr(T, y, d=DEFAULT_TREES, seed=0, bootstrap=True,
            max_features=DEFAULT_MAX_FEATURES, threads=1):
    """Fit `d` trees, tree i drawing from substream i of `seed`.

    Results do not depend on `threads`.
    """
    if d < 1:
        raise ConfigError('tree count must be >= 1, got %r' % d)
    if not 0 < max_features <= 1:
        raise ConfigError('max_features must be in (0, 1], got %r' %
                          max_features)
    T, y = _training_inputs(T, y)
    trees = Parallel(n_jobs=resolve_threads(threads), prefer='threads')(
        delayed(_grow_member)(T, y, seed, i, bootstrap, max_features)
        for i in range(d))
    return RfrModel(tuple(trees), int(d), int(seed), T.shape[1],
                    bool(bootstrap), float(max_features))


def tree_predictions(model, T_new):
    """Per-tree predictions, one row per tree."""
    T_new = np.asarray(T_new, dtype=float)
    if T_new.ndim == 1:
        T_new = T_new[np.newaxis, :]
    T_new = _check_features(np.empty((0, model.n_features)), T_new)
    return np.vstack([tree.predict(T_new) for tree in model.trees])


@predict.register(RfrModel)
def _predict_forest(model, T_new):
    return tree_predictions(model, T_new).mean(axis=0)
