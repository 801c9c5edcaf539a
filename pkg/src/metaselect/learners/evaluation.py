"""Cross-validated evaluation of one model on one dataset."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from metaselect.corpus import CvSplit, Dataset
from metaselect.learners.base import majority_label
from metaselect.learners.collection import ModelSpec, build_learner
from metaselect.learners.metrics import balanced_error_rate


@dataclass(frozen=True)
class FitReport:
    """Outcome of cross-validating one model.

    ``fold_predictions`` covers every point exactly once (its held-out fold);
    ``wall_time`` is total fit+predict time on a monotonic clock. Folds where
    the learner raised are listed in ``failed_folds`` and predicted as the
    majority training class.
    """

    cv_error: float
    wall_time: float
    fold_predictions: np.ndarray
    failed_folds: tuple[int, ...] = ()

    @property
    def failed(self) -> bool:
        return bool(self.failed_folds)


def _derive_seed(seed: int, index: int, fold: int) -> int:
    return int(np.random.default_rng([seed, index, fold]).integers(2**31 - 1))


def cross_validate(
    model: ModelSpec,
    dataset: Dataset,
    split: CvSplit,
    seed: int = 0,
) -> FitReport:
    """Train on each fold complement and predict the held-out fold.

    The reported error is the balanced error rate over the concatenated
    held-out predictions. A learner exception on a fold downgrades that fold
    to majority-class predictions and flags it rather than failing the cell.
    """
    if split.assignment.shape[0] != dataset.n_points:
        raise ValueError("split does not match dataset size")
    X, y = dataset.features, dataset.labels
    predictions = np.full(dataset.n_points, -1, dtype=int)
    failed: list[int] = []
    start = time.perf_counter()
    for fold in range(split.n_folds):
        test_idx = split.test_indices(fold)
        if test_idx.size == 0:
            continue
        train_idx = split.train_indices(fold)
        try:
            learner = build_learner(
                model, random_state=_derive_seed(seed, model.index, fold)
            )
            learner.fit(X[train_idx], y[train_idx])
            predictions[test_idx] = learner.predict(X[test_idx])
        except Exception:
            predictions[test_idx] = majority_label(y[train_idx])
            failed.append(fold)
    wall = time.perf_counter() - start
    error = balanced_error_rate(y, predictions, dataset.n_classes)
    return FitReport(
        cv_error=error,
        wall_time=wall,
        fold_predictions=predictions,
        failed_folds=tuple(failed),
    )
