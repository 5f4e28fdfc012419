import numpy as np
import pytest

from richspec.errors import ConfigError, ValidationError
from richspec.forest import LEAF, _best_split, fit_rfr, grow_tree, \
    tree_predictions
from richspec.regression import predict

from .conftest import random_matrix


def test_best_split_midpoint():
    T = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0.0, 0.0, 10.0, 10.0])
    feature, threshold, gain = _best_split(T, y, [0])
    assert (feature, threshold) == (0, 2.5)
    assert gain == pytest.approx(100.0)


def test_best_split_prefers_informative_feature():
    rng = np.random.default_rng(0)
    T = np.column_stack([rng.standard_normal(30), np.arange(30.0)])
    y = (T[:, 1] >= 15) * 5.0
    feature, threshold, _ = _best_split(T, y, [0, 1])
    assert feature == 1
    assert threshold == 14.5


def test_best_split_constant_features():
    assert _best_split(np.ones((4, 2)), np.arange(4.0), [0, 1]) is None


def test_tree_constant_target_is_leaf():
    tree = grow_tree(random_matrix(1, 10, 2), np.full(10, 3.0),
                     np.random.default_rng(0))
    assert tree.node_count == 1
    assert tree.feature[0] == LEAF
    assert list(tree.predict(np.zeros((2, 2)))) == [3.0, 3.0]


def test_tree_duplicate_rows_average():
    T = np.array([[0.0], [0.0], [1.0]])
    tree = grow_tree(T, np.array([1.0, 3.0, 7.0]), np.random.default_rng(0))
    assert list(tree.predict(T)) == [2.0, 2.0, 7.0]


def test_tree_interpolates_distinct_rows():
    T = random_matrix(2, 40, 3)
    y = random_matrix(3, 40, 1)[:, 0]
    tree = grow_tree(T, y, np.random.default_rng(1), max_features=1 / 3)
    assert np.array_equal(tree.predict(T), y)


def test_forest_mean_of_trees():
    T = random_matrix(4, 25, 2)
    y = T[:, 0] ** 2
    model = fit_rfr(T, y, d=7, seed=5)
    assert len(model.trees) == 7
    per_tree = tree_predictions(model, T)
    assert per_tree.shape == (7, 25)
    assert np.allclose(predict(model, T), per_tree.mean(axis=0))


def test_forest_seeds():
    T = random_matrix(5, 30, 3)
    y = T.sum(axis=1)
    a = predict(fit_rfr(T, y, d=10, seed=1), T)
    b = predict(fit_rfr(T, y, d=10, seed=1), T)
    c = predict(fit_rfr(T, y, d=10, seed=2), T)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_forest_threads_independent():
    T = random_matrix(6, 30, 3)
    y = T[:, 1] - T[:, 2]
    one = fit_rfr(T, y, d=20, seed=9, threads=1)
    many = fit_rfr(T, y, d=20, seed=9, threads=4)
    for a, b in zip(one.trees, many.trees):
        assert np.array_equal(a.threshold, b.threshold)
        assert np.array_equal(a.value, b.value)


def test_forest_prediction_range():
    T = random_matrix(7, 30, 2)
    y = np.random.default_rng(7).uniform(10, 40, 30)
    pred = predict(fit_rfr(T, y, d=15, seed=0), random_matrix(8, 50, 2))
    assert np.all(pred >= y.min()) and np.all(pred <= y.max())


def test_forest_invalid():
    T = random_matrix(9, 10, 2)
    y = T[:, 0]
    with pytest.raises(ConfigError, match='tree count'):
        fit_rfr(T, y, d=0)
    with pytest.raises(ConfigError, match='max_features'):
        fit_rfr(T, y, max_features=0.0)
    model = fit_rfr(T, y, d=2)
    with pytest.raises(ValidationError, match='dimension mismatch'):
        predict(model, np.ones((1, 3)))


def test_forest_ignores_row_order_without_bootstrap():
    T = random_matrix(10, 30, 3)
    y = T[:, 0] - 2 * T[:, 2]
    perm = np.random.default_rng(10).permutation(30)
    T_new = random_matrix(11, 12, 3)
    a = fit_rfr(T, y, d=10, seed=4, bootstrap=False)
    b = fit_rfr(T[perm], y[perm], d=10, seed=4, bootstrap=False)
    assert np.allclose(predict(a, T_new), predict(b, T_new), rtol=1e-12,
                       atol=0)


def test_more_trees_less_seed_variance():
    T = random_matrix(12, 30, 2)
    y = np.sin(T[:, 0]) + T[:, 1]
    T_new = random_matrix(13, 10, 2)
    spread = []
    for d in (1, 10, 100):
        preds = [predict(fit_rfr(T, y, d=d, seed=seed), T_new)
                 for seed in range(20)]
        spread.append(np.var(preds, axis=0).mean())
    assert spread[1] <= 1.05 * spread[0]
    assert spread[2] <= 1.05 * spread[1]
