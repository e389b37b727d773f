import math

import numpy as np
import pytest

from conftest import cube
from greedytree.distributions import ProductDistribution
from greedytree.learner import build_tree_exact
from greedytree.targets import random_junta
from greedytree.tree import DecisionTree


def _small_tree():
    t = DecisionTree(3)
    root = t.add_node(0.5)
    lo, hi = t.split(root, 1, 0.2, 0.9)
    t.split(lo, 2, 0.0, 0.6)
    return t


def test_structure_queries():
    t = _small_tree()
    assert t.node_count == 5 and t.depth == 2
    assert t.leaves() == [2, 3, 4] and t.internal_nodes() == [0, 1]
    assert t.path(4).assignments == ((1, 0), (2, 1))
    assert t.queried_variables() == [1, 2]
    assert t.label(2) == 1 and t.label(3) == 0
    with pytest.raises(ValueError):
        t.split(0, 0, 0.1, 0.2)


def test_predict_and_apply():
    t = _small_tree()
    X = cube(3)
    leaves = t.apply(X)
    # x_1 = 1 goes right to node 2; otherwise node 1 splits on x_2
    expected = [2 if x[1] == 1 else (4 if x[2] == 1 else 3) for x in X]
    np.testing.assert_array_equal(leaves, expected)
    np.testing.assert_array_equal(t.predict(X), [int(t.mean[v] >= 0.5) for v in expected])
    assert t.apply(X[0]).shape == (1,)


def test_json_round_trip(rng):
    f = random_junta(6, 3, 1)
    D = ProductDistribution(rng.uniform(0.2, 0.8, size=6), delta=0.2)
    tree, _ = build_tree_exact(f, D, "gini")
    back = DecisionTree.from_json(tree.to_json())
    X = cube(6)
    np.testing.assert_array_equal(back.predict(X), tree.predict(X))
    np.testing.assert_allclose(back.predict_mean(X), tree.predict_mean(X))
    assert back.depth == tree.depth and back.meta == tree.meta
    assert back.to_dict() == tree.to_dict()


def test_nan_means_serialize_as_null():
    t = DecisionTree(1)
    t.add_node(math.nan)
    d = t.to_dict()
    assert d["root"]["mean"] is None
    assert math.isnan(DecisionTree.from_dict(d).mean[0])


def test_check_paths_flags_repeats():
    t = DecisionTree(2)
    r = t.add_node(0.5)
    lo, _ = t.split(r, 0, 0.5, 0.5)
    t.split(lo, 0, 0.5, 0.5)
    assert not t.check_paths()
