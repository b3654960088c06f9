"""
Cumulative-sum structures for the weighted selection step of the KMC loop.

``SumTree`` is an array-backed binary tree whose leaves hold the rates and whose internal
nodes hold the sum of their two children. Internal nodes are always *recomputed* from their
children (never incremented), so the tree built from a set of leaves is bit-identical no
matter whether it was built at once or patched leaf by leaf. That is what lets local and
global rate updates drive exactly the same event sequence.

``LinearScan`` offers the same interface over a plain cumulative sum and is kept as the
reference implementation for differential testing.

Both select the *smallest* index ``l`` with ``sum_{j <= l} c(j) >= target`` among entries
with a positive rate.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import numpy as np


class SumTree:
    """
    Binary sum tree over a fixed number of non-negative entries.

    :param values: Initial entries
    :type values: numpy.ndarray
    """
    def __init__(self, values):
        values = np.asarray(values, dtype=np.float64)
        self._size = values.size
        capacity = 1
        while capacity < max(self._size, 1):
            capacity <<= 1
        self._capacity = capacity
        self._nodes = np.zeros(2 * capacity, dtype=np.float64)
        self.rebuild(values)

    @property
    def size(self):
        return self._size

    @property
    def total(self):
        return float(self._nodes[1])

    @property
    def values(self):
        return self._nodes[self._capacity:self._capacity + self._size]

    def rebuild(self, values):
        """
        Replace every entry and rebuild all internal nodes.
        """
        self._nodes[self._capacity:self._capacity + self._size] = values
        lo = self._capacity
        while lo > 1:
            parents = np.arange(lo >> 1, lo)
            self._nodes[parents] = self._nodes[parents << 1] + self._nodes[(parents << 1) | 1]
            lo >>= 1

    def update(self, indices, values):
        """
        Set a subset of entries and recompute their ancestors.

        :param indices: Entry indices (unique)
        :type indices: numpy.ndarray
        :param values: New values
        :type values: numpy.ndarray
        """
        nodes = np.asarray(indices, dtype=np.int64) + self._capacity
        self._nodes[nodes] = values
        nodes = np.unique(nodes >> 1)
        while nodes.size > 0 and nodes[-1] >= 1:
            self._nodes[nodes] = self._nodes[nodes << 1] + self._nodes[(nodes << 1) | 1]
            nodes = np.unique(nodes >> 1)
            nodes = nodes[nodes >= 1]

    def find(self, target):
        """
        Smallest index whose inclusive prefix sum reaches ``target``, skipping zero entries.

        :param target: A value in ``[0, total]``
        :type target: float
        :rtype: int
        """
        nodes = self._nodes
        node = 1
        while node < self._capacity:
            left = node << 1
            if target <= nodes[left] and nodes[left] > 0.0:
                node = left
            else:
                target -= nodes[left]
                node = left | 1
        idx = node - self._capacity
        if idx >= self._size or nodes[node] <= 0.0:
            # Rounding pushed the target past the last positive entry
            idx = int(np.flatnonzero(self.values > 0.0)[-1])
        return idx


class LinearScan:
    """
    Reference selection structure: a plain array and a cumulative sum computed on demand.
    """
    def __init__(self, values):
        self._values = np.array(values, dtype=np.float64)

    @property
    def size(self):
        return self._values.size

    @property
    def total(self):
        return float(self._values.sum())

    @property
    def values(self):
        return self._values

    def rebuild(self, values):
        self._values[:] = values

    def update(self, indices, values):
        self._values[np.asarray(indices, dtype=np.int64)] = values

    def find(self, target):
        cumulative = np.cumsum(self._values)
        idx = int(np.searchsorted(cumulative, target, side="left"))
        positive = np.flatnonzero(self._values > 0.0)
        candidates = positive[positive >= idx]
        return int(candidates[0]) if candidates.size > 0 else int(positive[-1])
