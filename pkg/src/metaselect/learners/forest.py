"""Small random forest: bagged Gini trees with per-split feature subsets."""

from __future__ import annotations

import numpy as np

from metaselect.learners.base import NativeClassifier
from metaselect.learners.tree import DecisionTreeGini


class RandomForestLite(NativeClassifier):
    """Fixed-size forest (20 trees) over bootstrap samples.

    Kept deliberately small so cross-validation cost stays proportionate to
    the rest of the collection; trees vote with ties to the lowest class.
    """

    N_TREES = 20

    def __init__(
        self,
        min_samples_split: float = 2,
        max_features: str | float = "sqrt",
        random_state: int = 0,
    ):
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.random_state = random_state

    def _fit(self, X, y):
        n = y.size
        self._n_classes = int(y.max()) + 1
        rng = np.random.default_rng(self.random_state)
        self._trees = []
        for _ in range(self.N_TREES):
            rows = rng.integers(0, n, size=n)
            if np.unique(y[rows]).size < 2:
                rows = np.arange(n)  # degenerate bootstrap: fall back to all rows
            tree = DecisionTreeGini(
                min_samples_split=self.min_samples_split,
                max_features=self.max_features,
                random_state=int(rng.integers(np.iinfo(np.int32).max)),
            )
            tree.fit(X[rows], y[rows])
            self._trees.append(tree)

    def _predict(self, X):
        votes = np.zeros((X.shape[0], self._n_classes), dtype=int)
        for tree in self._trees:
            pred = tree.predict(X)
            votes[np.arange(X.shape[0]), pred] += 1
        return np.argmax(votes, axis=1)
