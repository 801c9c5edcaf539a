"""Multiclass adaboost (SAMME) over depth-1 stumps."""

from __future__ import annotations

import numpy as np

from metaselect.learners.base import NativeClassifier


def _fit_stump(X, y, w, n_classes):
    """Weighted decision stump: (feature, threshold, left class, right class).

    Scans every feature and every boundary between distinct sorted values,
    choosing the split whose side-wise weighted majorities misclassify the
    least weight. Returns None when all features are constant.
    """
    n, p = X.shape
    total_w = np.zeros(n_classes)
    np.add.at(total_w, y, w)
    best = None
    for f in range(p):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        if xs[0] == xs[-1]:
            continue
        onehot_w = np.zeros((n, n_classes))
        onehot_w[np.arange(n), y[order]] = w[order]
        left = np.cumsum(onehot_w, axis=0)[:-1]
        right = total_w[None, :] - left
        score = left.max(axis=1) + right.max(axis=1)  # correctly kept weight
        score[xs[:-1] >= xs[1:]] = -np.inf
        t = int(np.argmax(score))
        if np.isinf(score[t]):
            continue
        if best is None or score[t] > best[0]:
            best = (
                float(score[t]),
                f,
                0.5 * (xs[t] + xs[t + 1]),
                int(np.argmax(left[t])),
                int(np.argmax(right[t])),
            )
    if best is None:
        return None
    _, f, thr, lc, rc = best
    return f, thr, lc, rc


def _stump_predict(stump, X):
    f, thr, lc, rc = stump
    return np.where(X[:, f] <= thr, lc, rc)


class AdaboostLite(NativeClassifier):
    """SAMME boosting of weighted stumps.

    Stops early when a stump is perfect (its weight saturates) or no better
    than random guessing; falls back to the majority class when even the
    first stump fails.
    """

    def __init__(self, n_estimators: int = 50, learning_rate: float = 1.0):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate

    def _fit(self, X, y):
        n = y.size
        self._n_classes = n_classes = int(y.max()) + 1
        self._majority = int(np.argmax(np.bincount(y)))
        w = np.full(n, 1.0 / n)
        self._stumps = []
        self._alphas = []
        for _ in range(self.n_estimators):
            stump = _fit_stump(X, y, w, n_classes)
            if stump is None:
                break
            pred = _stump_predict(stump, X)
            wrong = pred != y
            err = float(w[wrong].sum())
            if err >= 1.0 - 1.0 / n_classes - 1e-12:
                break  # no better than random; SAMME weight would be <= 0
            err = max(err, 1e-10)
            alpha = self.learning_rate * (
                np.log((1.0 - err) / err) + np.log(n_classes - 1.0)
            )
            self._stumps.append(stump)
            self._alphas.append(alpha)
            if err <= 1e-10:
                break  # perfect stump dominates all later votes
            w *= np.exp(alpha * wrong)
            w /= w.sum()

    def _predict(self, X):
        if not self._stumps:
            return np.full(X.shape[0], self._majority, dtype=int)
        scores = np.zeros((X.shape[0], self._n_classes))
        for stump, alpha in zip(self._stumps, self._alphas):
            pred = _stump_predict(stump, X)
            scores[np.arange(X.shape[0]), pred] += alpha
        return np.argmax(scores, axis=1)
