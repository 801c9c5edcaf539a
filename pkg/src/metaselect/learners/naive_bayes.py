"""Gaussian naive Bayes."""

from __future__ import annotations

import numpy as np

from metaselect.learners.base import NativeClassifier


class GaussianNbClassifier(NativeClassifier):
    """Per-class independent Gaussians with a small variance floor."""

    def __init__(self, var_smoothing: float = 1e-9):
        self.var_smoothing = var_smoothing

    def _fit(self, X, y):
        n_classes = int(y.max()) + 1
        n, p = X.shape
        self._means = np.zeros((n_classes, p))
        self._vars = np.zeros((n_classes, p))
        self._log_priors = np.zeros(n_classes)
        floor = self.var_smoothing * max(X.var(axis=0).max(), 1e-12)
        for c in range(n_classes):
            Xc = X[y == c]
            self._log_priors[c] = np.log(Xc.shape[0] / n)
            self._means[c] = Xc.mean(axis=0)
            self._vars[c] = Xc.var(axis=0) + floor

    def _predict(self, X):
        # joint log-likelihood per class, argmax ties to the lowest code
        ll = self._log_priors[None, :] - 0.5 * (
            np.log(2 * np.pi * self._vars).sum(axis=1)[None, :]
            + (
                ((X[:, None, :] - self._means[None, :, :]) ** 2)
                / self._vars[None, :, :]
            ).sum(axis=2)
        )
        return np.argmax(ll, axis=1)
