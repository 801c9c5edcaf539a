"""Balanced error rate: the metric behind every error-matrix entry."""

from __future__ import annotations

import numpy as np


def balanced_error_rate(y_true, y_pred, n_classes: int | None = None) -> float:
    """Mean over classes of the per-class misclassification rate.

    Each class contributes ``1 - recall``; classes with no true instances are
    excluded from the average (their error is taken as 0 by convention).
    Returns 0 iff the predictions are perfect.
    """
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.size == 0:
        raise ValueError("empty label vectors")
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have equal length")
    if n_classes is None:
        n_classes = int(max(y_true.max(), y_pred.max())) + 1
    if y_true.min() < 0 or y_pred.min() < 0:
        raise ValueError("labels must be nonnegative")
    if y_true.max() >= n_classes or y_pred.max() >= n_classes:
        raise ValueError("labels out of range for n_classes")
    errors = []
    for c in range(n_classes):
        mask = y_true == c
        if not mask.any():
            continue
        errors.append(float(np.mean(y_pred[mask] != c)))
    return float(np.mean(errors))
