"""Shared estimator plumbing for the native learners.

All learners follow the scikit-learn protocol (``fit``/``predict``,
``get_params``) but implement their algorithms natively so their runtime is
fully attributable to this package.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_X_y, check_array


class NativeClassifier(BaseEstimator, ClassifierMixin):
    """Base class mapping arbitrary label values to dense internal codes."""

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        self._fit(X, encoded.astype(int))
        return self

    def predict(self, X):
        X = check_array(X)
        return self.classes_[self._predict(X)]

    # subclasses implement these on 0..C-1 codes
    def _fit(self, X, y):  # pragma: no cover - abstract
        raise NotImplementedError

    def _predict(self, X):  # pragma: no cover - abstract
        raise NotImplementedError


class MajorityClassClassifier(NativeClassifier):
    """Predicts the most common training label; the no-model fallback."""

    def _fit(self, X, y):
        self._majority = int(np.argmax(np.bincount(y)))

    def _predict(self, X):
        return np.full(X.shape[0], self._majority, dtype=int)


def majority_label(y: np.ndarray) -> int:
    """Most common value of y; ties go to the smallest label."""
    y = np.asarray(y, dtype=int)
    return int(np.argmax(np.bincount(y)))
