"""Brute-force k-nearest-neighbour classifier."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from metaselect.learners.base import NativeClassifier


class KnnClassifier(NativeClassifier):
    """k-NN with Minkowski distance (p=1 Manhattan, p=2 Euclidean).

    Votes of the k nearest training points decide the label; vote ties go to
    the smallest class code.
    """

    def __init__(self, n_neighbors: int = 5, p: int = 2):
        self.n_neighbors = n_neighbors
        self.p = p

    def _fit(self, X, y):
        self._X = X
        self._y = y
        self._n_classes = int(y.max()) + 1

    def _predict(self, X):
        k = min(self.n_neighbors, self._X.shape[0])
        dist = cdist(X, self._X, metric="minkowski", p=self.p)
        nearest = np.argpartition(dist, k - 1, axis=1)[:, :k]
        votes = self._y[nearest]
        out = np.empty(X.shape[0], dtype=int)
        for i in range(X.shape[0]):
            out[i] = np.argmax(np.bincount(votes[i], minlength=self._n_classes))
        return out
