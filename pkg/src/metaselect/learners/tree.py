"""CART-style decision tree with Gini impurity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from metaselect.learners.base import NativeClassifier


@dataclass
class _Node:
    prediction: int
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _gini_from_counts(counts, sizes):
    # counts: (t, C) class counts per candidate split side, sizes: (t,)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = counts / sizes[:, None]
        g = 1.0 - np.einsum("tc,tc->t", frac, frac)
    g[sizes == 0] = 0.0
    return g


def best_split(X, y, n_classes, feature_ids):
    """Best (feature, threshold, weighted Gini) over candidate features.

    Thresholds are midpoints between consecutive distinct sorted values.
    Returns None when no feature admits a split.
    """
    n = y.size
    total = np.bincount(y, minlength=n_classes).astype(float)
    best = None
    for f in feature_ids:
        x = X[:, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        if xs[0] == xs[-1]:
            continue
        ys = y[order]
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), ys] = 1.0
        left_counts = np.cumsum(onehot, axis=0)[:-1]  # first t+1 samples
        left_sizes = np.arange(1, n, dtype=float)
        right_sizes = n - left_sizes
        gini_left = _gini_from_counts(left_counts, left_sizes)
        gini_right = _gini_from_counts(total[None, :] - left_counts, right_sizes)
        weighted = (left_sizes * gini_left + right_sizes * gini_right) / n
        weighted[xs[:-1] >= xs[1:]] = np.inf  # no boundary between ties
        t = int(np.argmin(weighted))
        if np.isinf(weighted[t]):
            continue
        if best is None or weighted[t] < best[2]:
            best = (int(f), 0.5 * (xs[t] + xs[t + 1]), float(weighted[t]))
    return best


class DecisionTreeGini(NativeClassifier):
    """Binary decision tree grown until purity or the split-size floor.

    ``min_samples_split`` follows the usual convention: an int is an absolute
    floor, a float in (0, 1] is a fraction of the training set. When
    ``max_features`` is set, each node examines a random feature subset drawn
    from ``random_state`` (used by the forest).
    """

    def __init__(
        self,
        min_samples_split: float = 2,
        max_features: str | float | None = None,
        random_state: int | None = None,
    ):
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.random_state = random_state

    def _resolve_min_split(self, n):
        mss = self.min_samples_split
        if isinstance(mss, float) and 0 < mss <= 1:
            return max(2, int(np.ceil(mss * n)))
        return max(2, int(mss))

    def _n_features_per_split(self, p):
        mf = self.max_features
        if mf is None:
            return p
        if mf == "sqrt":
            return max(1, int(np.sqrt(p)))
        if mf == "log2":
            return max(1, int(np.log2(p)) if p > 1 else 1)
        if isinstance(mf, float):
            return max(1, int(np.ceil(mf * p)))
        raise ValueError(f"unsupported max_features {mf!r}")

    def _fit(self, X, y):
        self._n_classes = int(y.max()) + 1
        self._min_split = self._resolve_min_split(y.size)
        self._rng = (
            np.random.default_rng(self.random_state)
            if self.max_features is not None
            else None
        )
        self._root = self._grow(X, y)

    def _grow(self, X, y) -> _Node:
        counts = np.bincount(y, minlength=self._n_classes)
        prediction = int(np.argmax(counts))
        n, p = X.shape
        if n < self._min_split or counts.max() == n:
            return _Node(prediction)
        if self._rng is not None:
            m = self._n_features_per_split(p)
            feature_ids = self._rng.choice(p, size=m, replace=False)
        else:
            feature_ids = np.arange(p)
        frac = counts / n
        parent_gini = 1.0 - float(frac @ frac)
        found = best_split(X, y, self._n_classes, feature_ids)
        if found is None or found[2] >= parent_gini - 1e-12:
            return _Node(prediction)
        feature, threshold, _ = found
        mask = X[:, feature] <= threshold
        return _Node(
            prediction,
            feature=feature,
            threshold=threshold,
            left=self._grow(X[mask], y[mask]),
            right=self._grow(X[~mask], y[~mask]),
        )

    def _predict(self, X):
        out = np.empty(X.shape[0], dtype=int)
        for i, row in enumerate(X):
            node = self._root
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.prediction
        return out
