"""Offline stage: build the error/runtime matrices and fit runtime predictors.

Every (dataset, model) cell is a cross-validation; errors are deterministic
under fixed seeds while wall-clock times naturally vary. Runtime predictors
regress log-runtime on all monomials of total degree <= 3 in (n, p, log n),
which keeps predictions strictly positive and makes accuracy multiplicative.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from metaselect.corpus import Dataset, make_splits
from metaselect.errors import InsufficientDataError, MalformedInputError
from metaselect.learners.collection import ModelSpec
from metaselect.learners.evaluation import cross_validate

FLOAT_FMT = "%.17g"
_TIME_FLOOR = 1e-9

# Exponent triples (a, b, c) for n^a * p^b * log(n)^c, total degree <= 3.
BASIS_EXPONENTS: tuple[tuple[int, int, int], ...] = tuple(
    (a, b, c)
    for total in range(4)
    for a in range(total + 1)
    for b in range(total - a + 1)
    for c in (total - a - b,)
)
BASIS_DIM = len(BASIS_EXPONENTS)  # 20
BASIS_TAG = "deg3-n-p-logn"


@dataclass(frozen=True)
class ErrorMatrix:
    """Cross-validated balanced error rates, datasets x models."""

    values: np.ndarray
    dataset_ids: tuple[str, ...]
    model_ids: tuple[int, ...]
    failure_mask: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        m = np.ascontiguousarray(self.failure_mask, dtype=bool)
        if v.shape != (len(self.dataset_ids), len(self.model_ids)):
            raise ValueError("matrix shape does not match id lists")
        if m.shape != v.shape:
            raise ValueError("failure mask shape mismatch")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "failure_mask", m)


@dataclass(frozen=True)
class RuntimeMatrix:
    """Observed cross-validation wall times (seconds), aligned with errors."""

    values: np.ndarray
    dataset_ids: tuple[str, ...]
    model_ids: tuple[int, ...]

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        if v.shape != (len(self.dataset_ids), len(self.model_ids)):
            raise ValueError("matrix shape does not match id lists")
        if (v < 0).any():
            raise ValueError("runtimes must be nonnegative")
        object.__setattr__(self, "values", v)


def _evaluate_cell(model, dataset, split, seed):
    report = cross_validate(model, dataset, split, seed=seed)
    all_failed = len(report.failed_folds) == split.n_folds
    return report.cv_error, report.wall_time, all_failed


def build_matrices(
    corpus: list[Dataset],
    collection: list[ModelSpec],
    n_folds: int = 5,
    seed: int = 0,
    jobs: int = 1,
) -> tuple[ErrorMatrix, RuntimeMatrix]:
    """Cross-validate every model on every dataset.

    Cells where the learner failed on all folds are masked and imputed with
    the row mean of the unmasked entries so downstream factorization always
    sees a fully populated matrix.
    """
    if not corpus or not collection:
        raise ValueError("corpus and collection must be nonempty")
    m, n = len(corpus), len(collection)
    # one seed everywhere: fold assignment is a pure function of (labels,
    # n_folds, seed), so duplicated datasets get identical error rows
    splits = [make_splits(d, n_folds=n_folds, seed=seed) for d in corpus]
    tasks = [(i, j) for i in range(m) for j in range(n)]
    if jobs == 1:
        results = [
            _evaluate_cell(collection[j], corpus[i], splits[i], seed) for i, j in tasks
        ]
    else:
        results = Parallel(n_jobs=jobs)(
            delayed(_evaluate_cell)(collection[j], corpus[i], splits[i], seed)
            for i, j in tasks
        )
    E = np.zeros((m, n))
    T = np.zeros((m, n))
    mask = np.zeros((m, n), dtype=bool)
    for (i, j), (err, wall, failed) in zip(tasks, results):
        E[i, j], T[i, j], mask[i, j] = err, wall, failed
    for i in range(m):
        row_mask = mask[i]
        if row_mask.any():
            ok = ~row_mask
            E[i, row_mask] = E[i, ok].mean() if ok.any() else 0.5
    return (
        ErrorMatrix(
            values=E,
            dataset_ids=tuple(d.name for d in corpus),
            model_ids=tuple(s.index for s in collection),
            failure_mask=mask,
        ),
        RuntimeMatrix(
            values=T,
            dataset_ids=tuple(d.name for d in corpus),
            model_ids=tuple(s.index for s in collection),
        ),
    )


def runtime_basis(sizes: np.ndarray) -> np.ndarray:
    """Design matrix of the degree-<=3 monomials in (n, p, log n)."""
    sizes = np.atleast_2d(np.asarray(sizes, dtype=float))
    if sizes.shape[1] != 2 or (sizes < 1).any():
        raise ValueError("sizes must be (m, 2) pairs of counts >= 1")
    n, p = sizes[:, 0], sizes[:, 1]
    logn = np.log(n)
    cols = [n**a * p**b * logn**c for a, b, c in BASIS_EXPONENTS]
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class RuntimePredictor:
    """Per-model polynomial regression of log wall time on (n, p, log n)."""

    index: int
    coefficients: np.ndarray
    basis: str = BASIS_TAG
    log_space: bool = True

    def predict(self, n_points: int, p_features: int) -> float:
        B = runtime_basis([[n_points, p_features]])
        return float(np.exp(B @ np.asarray(self.coefficients))[0])

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "basis": self.basis,
            "log_space": self.log_space,
            "coefficients": [float(c) for c in self.coefficients],
        }

    @staticmethod
    def from_dict(d: dict) -> "RuntimePredictor":
        return RuntimePredictor(
            index=int(d["index"]),
            coefficients=np.asarray(d["coefficients"], dtype=float),
            basis=d.get("basis", BASIS_TAG),
            log_space=bool(d.get("log_space", True)),
        )


def fit_runtime(sizes, times, index: int = 0) -> RuntimePredictor:
    """Least squares of log-time over the polynomial basis.

    With at least BASIS_DIM distinct (n, p) samples a plain (column-scaled)
    least squares is used; smaller or rank-deficient designs fall back to a
    light ridge so the fit stays well defined.
    """
    sizes = np.atleast_2d(np.asarray(sizes, dtype=float))
    times = np.asarray(times, dtype=float).ravel()
    if sizes.shape[0] != times.size:
        raise ValueError("sizes and times must align")
    if times.size < 2:
        raise InsufficientDataError(
            f"model {index}: need >= 2 runtime samples, got {times.size}"
        )
    z = np.log(np.maximum(times, _TIME_FLOOR))
    B = runtime_basis(sizes)
    scales = np.abs(B).max(axis=0)
    scales[scales == 0] = 1.0
    Bs = B / scales
    n_distinct = np.unique(sizes, axis=0).shape[0]
    use_ridge = n_distinct < BASIS_DIM or np.linalg.matrix_rank(Bs) < BASIS_DIM
    if use_ridge:
        G = Bs.T @ Bs
        lam = 1e-6 * np.trace(G) / BASIS_DIM
        beta_s = np.linalg.solve(G + lam * np.eye(BASIS_DIM), Bs.T @ z)
    else:
        beta_s, *_ = np.linalg.lstsq(Bs, z, rcond=None)
    return RuntimePredictor(index=index, coefficients=beta_s / scales)


def predict_runtime(predictor: RuntimePredictor, n_points: int, p_features: int) -> float:
    """Strictly positive runtime prediction for a dataset of the given size."""
    if n_points < 1 or p_features < 1:
        raise ValueError("dataset sizes must be >= 1")
    return predictor.predict(n_points, p_features)


def fit_all_runtime_predictors(
    runtime_matrix: RuntimeMatrix, sizes
) -> list[RuntimePredictor]:
    """One predictor per model column from the observed runtime matrix."""
    sizes = np.atleast_2d(np.asarray(sizes, dtype=float))
    return [
        fit_runtime(sizes, runtime_matrix.values[:, col], index=j)
        for col, j in enumerate(runtime_matrix.model_ids)
    ]


def runtime_accuracy_report(
    runtime_matrix: RuntimeMatrix,
    sizes,
    families: list[str],
    factors: tuple[float, ...] = (2.0, 4.0),
) -> list[dict]:
    """Leave-one-dataset-out prediction accuracy per algorithm family.

    For each held-out dataset the predictors are refit on the remaining rows;
    a cell counts as accurate within factor f when max(pred/true, true/pred)
    <= f. Percentages are reported per family in collection order.
    """
    T = runtime_matrix.values
    sizes = np.atleast_2d(np.asarray(sizes, dtype=float))
    m, n = T.shape
    if m < 3:
        raise InsufficientDataError("leave-one-out needs at least 3 datasets")
    if len(families) != n:
        raise ValueError("families must align with model columns")
    ratios = np.empty((m, n))
    for i in range(m):
        rest = np.arange(m) != i
        for col in range(n):
            pred = fit_runtime(sizes[rest], T[rest, col], index=col)
            t_hat = pred.predict(sizes[i, 0], sizes[i, 1])
            t_true = max(T[i, col], _TIME_FLOOR)
            ratios[i, col] = max(t_hat / t_true, t_true / t_hat)
    rows = []
    for family in dict.fromkeys(families):  # stable unique order
        cols = [c for c, f in enumerate(families) if f == family]
        fam_ratios = ratios[:, cols].ravel()
        row = {"family": family, "n_cells": fam_ratios.size}
        for f in factors:
            row[f"within_factor_{f:g}"] = 100.0 * float(np.mean(fam_ratios <= f))
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# persistence


def _write_matrix_csv(path, values, dataset_ids, model_ids, as_int=False):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset"] + [str(j) for j in model_ids])
        for name, row in zip(dataset_ids, values):
            if as_int:
                writer.writerow([name] + [str(int(x)) for x in row])
            else:
                writer.writerow([name] + [FLOAT_FMT % x for x in row])


def _read_matrix_csv(path):
    path = Path(path)
    if not path.exists():
        raise MalformedInputError(f"{path}: no such file")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["dataset"]:
        raise MalformedInputError(f"{path}: expected a 'dataset,<model ids>' header")
    model_ids = tuple(int(tok) for tok in rows[0][1:])
    names, data = [], []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(model_ids) + 1:
            raise MalformedInputError(f"{path}: row {r} has wrong field count")
        names.append(row[0])
        data.append([float(tok) for tok in row[1:]])
    return np.asarray(data), tuple(names), model_ids


def save_error_matrix(matrix: ErrorMatrix, path, mask_path=None) -> None:
    _write_matrix_csv(path, matrix.values, matrix.dataset_ids, matrix.model_ids)
    if mask_path is not None:
        _write_matrix_csv(
            mask_path,
            matrix.failure_mask.astype(int),
            matrix.dataset_ids,
            matrix.model_ids,
            as_int=True,
        )


def load_error_matrix(path, mask_path=None) -> ErrorMatrix:
    values, names, model_ids = _read_matrix_csv(path)
    if mask_path is not None and Path(mask_path).exists():
        mask, _, _ = _read_matrix_csv(mask_path)
        mask = mask.astype(bool)
    else:
        mask = np.zeros_like(values, dtype=bool)
    return ErrorMatrix(values, names, model_ids, mask)


def save_runtime_matrix(matrix: RuntimeMatrix, path) -> None:
    _write_matrix_csv(path, matrix.values, matrix.dataset_ids, matrix.model_ids)


def load_runtime_matrix(path) -> RuntimeMatrix:
    values, names, model_ids = _read_matrix_csv(path)
    return RuntimeMatrix(values, names, model_ids)


def save_runtime_predictors(predictors: list[RuntimePredictor], path) -> None:
    with open(path, "w") as fh:
        json.dump([p.to_dict() for p in predictors], fh, indent=1)
        fh.write("\n")


def load_runtime_predictors(path) -> list[RuntimePredictor]:
    path = Path(path)
    if not path.exists():
        raise MalformedInputError(f"{path}: no such file")
    with open(path) as fh:
        return [RuntimePredictor.from_dict(d) for d in json.load(fh)]
