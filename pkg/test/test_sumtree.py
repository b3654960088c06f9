"""
Tests the weighted selection structures

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import numpy as np
import pytest

from cgmc.sumtree import LinearScan, SumTree


@pytest.mark.parametrize("structure", [SumTree, LinearScan])
@pytest.mark.parametrize("values, target, expected",
                         [
                             ([1.0] * 10, 5.0 + 1e-9, 5),
                             ([1.0] * 10, 5.0, 4),
                             ([1.0] * 10, 0.0, 0),
                             ([0.0, 0.0, 3.0, 0.0], 0.0, 2),
                             ([0.0, 0.0, 3.0, 0.0], 3.0, 2),
                             ([2.0, 0.0, 0.0, 1.0, 0.0], 2.5, 3),
                             ([2.0, 0.0, 0.0, 1.0, 0.0], 2.0, 0),
                             ([0.5, 0.25, 0.25], 0.75, 1),
                         ])
def test_find(structure, values, target, expected):
    """
    The smallest index whose inclusive prefix sum reaches the target, zero entries skipped
    """
    assert structure(values).find(target) == expected


def test_sum_tree_totals():
    tree = SumTree([1.0, 2.0, 3.0])

    assert tree.size == 3
    assert tree.total == 6.0
    tree.update([1], [5.0])
    assert tree.total == 9.0
    assert tree.values.tolist() == [1.0, 5.0, 3.0]


def test_patched_tree_equals_rebuilt_tree():
    """
    Internal nodes are recomputed from their children, so patching leaves gives the same tree as building it anew
    """
    rng = np.random.default_rng(7)
    values = rng.random(37)
    tree = SumTree(values)
    for _ in range(200):
        idx = np.unique(rng.integers(0, 37, 4))
        values[idx] = rng.random(idx.size) * (rng.random(idx.size) > 0.3)
        tree.update(idx, values[idx])
        fresh = SumTree(values)
        assert tree.total == fresh.total
        target = rng.random() * fresh.total
        assert tree.find(target) == fresh.find(target)


def test_tree_agrees_with_linear_scan():
    rng = np.random.default_rng(1)
    for _ in range(100):
        values = rng.random(50) * (rng.random(50) > 0.5)
        if values.sum() == 0:
            continue
        tree, scan = SumTree(values), LinearScan(values)
        # Targets away from the bin edges, where both sums round alike
        cumulative = np.cumsum(values)
        target = rng.random() * values.sum()
        if np.min(np.abs(cumulative - target)) < 1e-9:
            continue
        assert tree.find(target) == scan.find(target)
