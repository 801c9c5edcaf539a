"""Dataset ingestion, preprocessing and deterministic stratified CV splitting.

CSV files are parsed with the label in the last column by default. Categorical
columns (any non-numeric token) are one-hot encoded; all resulting columns are
standardized to zero mean and unit population variance. Constant columns map
to all-zeros so downstream linear algebra stays finite.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from metaselect.errors import MalformedInputError, UnusableDatasetError

_MISSING_TOKENS = {"", "?", "na", "n/a", "nan", "null"}


class ColumnStandardizer(BaseEstimator, TransformerMixin):
    """Per-column z-scoring with population statistics.

    Columns whose population std falls below ``eps`` are treated as constant
    and transformed to all-zeros instead of dividing by ~0.
    """

    def __init__(self, eps: float = 1e-12):
        self.eps = eps

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0)  # ddof=0: population std
        # constant relative to the column magnitude, else summation noise on
        # a large constant column (std ~ 1 ulp of the mean) slips through
        self.constant_ = self.scale_ <= self.eps * np.maximum(1.0, np.abs(self.mean_))
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        out = X - self.mean_
        safe = np.where(self.constant_, 1.0, self.scale_)
        out = out / safe
        out[:, self.constant_] = 0.0
        return out


def standardize(X: np.ndarray) -> np.ndarray:
    """One-shot whole-matrix standardization (fit and transform on X)."""
    return ColumnStandardizer().fit(X).transform(X)


@dataclass(frozen=True)
class Dataset:
    """An immutable classification dataset.

    ``features`` is an (n_points, p_features) float matrix, ``labels`` holds
    class indices 0..C-1. Splits of a parent dataset may miss some classes;
    ``label_names`` keeps the global class set so indices stay comparable.
    """

    name: str
    features: np.ndarray
    labels: np.ndarray
    label_names: tuple[str, ...] = ()
    standardized: bool = True

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=float)
        labs = np.ascontiguousarray(self.labels, dtype=int)
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if labs.shape != (feats.shape[0],):
            raise ValueError("labels must align with feature rows")
        if labs.size and labs.min() < 0:
            raise ValueError("labels must be nonnegative class indices")
        feats.flags.writeable = False
        labs.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def n_points(self) -> int:
        return self.features.shape[0]

    @property
    def p_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        observed = int(self.labels.max()) + 1 if self.labels.size else 0
        return max(len(self.label_names), observed)


@dataclass(frozen=True)
class CvSplit:
    """Stratified fold assignment: ``assignment[i]`` is the fold of point i."""

    n_folds: int
    assignment: np.ndarray
    seed: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.assignment, dtype=int)
        arr.flags.writeable = False
        object.__setattr__(self, "assignment", arr)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def _is_numeric_column(tokens: list[str]) -> bool:
    for tok in tokens:
        try:
            float(tok)
        except ValueError:
            return False
    return True


def _parse_rows(path: Path, has_header: bool) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = [[tok.strip() for tok in row] for row in csv.reader(fh) if row]
    if not rows:
        raise MalformedInputError(f"{path}: file is empty")
    if has_header:
        rows = rows[1:]
        if not rows:
            raise MalformedInputError(f"{path}: no data rows below header")
    width = len(rows[0])
    offset = 2 if has_header else 1
    for r, row in enumerate(rows):
        if len(row) != width:
            raise MalformedInputError(
                f"{path}: row {r + offset} has {len(row)} fields, expected {width}"
            )
        for c, tok in enumerate(row):
            if tok.lower() in _MISSING_TOKENS:
                raise MalformedInputError(
                    f"{path}: missing value at row {r + offset}, column {c + 1}"
                )
    return rows


def encode_columns(columns: list[list[str]]) -> np.ndarray:
    """One-hot encode categorical columns, pass numeric ones through.

    A column is categorical iff it contains any non-numeric token. Categorical
    levels are sorted lexicographically; each level becomes one indicator
    column.
    """
    blocks = []
    for col in columns:
        if _is_numeric_column(col):
            blocks.append(np.array([float(t) for t in col], dtype=float)[:, None])
        else:
            levels = sorted(set(col))
            index = {lvl: i for i, lvl in enumerate(levels)}
            onehot = np.zeros((len(col), len(levels)))
            onehot[np.arange(len(col)), [index[t] for t in col]] = 1.0
            blocks.append(onehot)
    return np.hstack(blocks)


def load_dataset(
    path: str | Path,
    *,
    name: str | None = None,
    has_header: bool = False,
    label_col: int = -1,
    standardize_features: bool = True,
) -> Dataset:
    """Load a CSV classification dataset.

    The label column (last by default) may hold arbitrary tokens; classes are
    indexed 0..C-1 in sorted token order. Rows with missing entries are
    rejected with an error naming the row and column. A file with a single
    class raises :class:`UnusableDatasetError`.
    """
    path = Path(path)
    if not path.exists():
        raise MalformedInputError(f"{path}: no such file")
    rows = _parse_rows(path, has_header)
    width = len(rows[0])
    if width < 2:
        raise MalformedInputError(f"{path}: need at least one feature column")
    lcol = label_col if label_col >= 0 else width + label_col
    if not 0 <= lcol < width:
        raise ValueError(f"label column {label_col} out of range for {width} columns")

    label_tokens = [row[lcol] for row in rows]
    classes = sorted(set(label_tokens))
    if len(classes) < 2:
        raise UnusableDatasetError(f"{path}: only one class ({classes[0]!r}) present")
    class_index = {c: i for i, c in enumerate(classes)}
    labels = np.array([class_index[t] for t in label_tokens], dtype=int)

    columns = [[row[c] for row in rows] for c in range(width) if c != lcol]
    features = encode_columns(columns)
    if standardize_features:
        features = standardize(features)
    return Dataset(
        name=name or path.stem,
        features=features,
        labels=labels,
        label_names=tuple(classes),
        standardized=standardize_features,
    )


def load_manifest(path: str | Path) -> list[Dataset]:
    """Load every dataset listed in a JSON manifest: [{name, path}, ...]."""
    path = Path(path)
    if not path.exists():
        raise MalformedInputError(f"{path}: no such file")
    with open(path) as fh:
        try:
            records = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedInputError(f"{path}: invalid JSON ({exc})") from exc
    datasets = []
    for rec in records:
        ds_path = Path(rec["path"])
        if not ds_path.is_absolute():
            ds_path = path.parent / ds_path
        datasets.append(load_dataset(ds_path, name=rec.get("name")))
    return datasets


def make_splits(dataset: Dataset, n_folds: int = 5, seed: int = 0) -> CvSplit:
    """Deterministic stratified fold assignment.

    Each class is shuffled with the seed and spread over folds so per-class
    counts differ by at most one; classes with fewer points than folds land
    one-per-fold in the currently least-loaded folds.
    """
    if n_folds < 2:
        raise ValueError("n_folds must be at least 2")
    if n_folds > dataset.n_points:
        raise ValueError(f"n_folds={n_folds} exceeds n_points={dataset.n_points}")
    rng = np.random.default_rng(seed)
    assignment = np.full(dataset.n_points, -1, dtype=int)
    loads = np.zeros(n_folds, dtype=int)
    for c in range(dataset.n_classes):
        idx = np.flatnonzero(dataset.labels == c)
        if not idx.size:
            continue
        rng.shuffle(idx)
        base, extra = divmod(len(idx), n_folds)
        order = np.lexsort((np.arange(n_folds), loads))  # least-loaded first
        counts = np.full(n_folds, base)
        counts[order[:extra]] += 1
        pos = 0
        for fold in order:
            take = counts[fold]
            assignment[idx[pos : pos + take]] = fold
            pos += take
        loads += counts
    return CvSplit(n_folds=n_folds, assignment=assignment, seed=seed)


def train_val_test_split(
    dataset: Dataset,
    seed: int = 0,
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2),
    leakage_free: bool = True,
    return_scaler: bool = False,
):
    """Stratified train/validation/test split for the online stage.

    With ``leakage_free`` the standardization statistics are fit on the
    training part only and applied to the other two; otherwise features are
    standardized over the whole dataset before splitting (matching offline
    matrix construction). ``return_scaler`` appends the fitted scaler, which
    maps new raw points into the same space as the returned pieces.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    rng = np.random.default_rng(seed)
    part = np.full(dataset.n_points, 2, dtype=int)
    for c in range(dataset.n_classes):
        idx = np.flatnonzero(dataset.labels == c)
        if not idx.size:
            continue
        rng.shuffle(idx)
        cnt = len(idx)
        n_tr = max(1, int(np.floor(fractions[0] * cnt)))
        remaining = cnt - n_tr
        n_val = min(remaining, max(1 if remaining >= 2 else 0, int(np.floor(fractions[1] * cnt))))
        part[idx[:n_tr]] = 0
        part[idx[n_tr : n_tr + n_val]] = 1

    feats = np.asarray(dataset.features)
    if leakage_free:
        scaler = ColumnStandardizer().fit(feats[part == 0])
    else:
        # Whole-data statistics; on an already standardized dataset this is
        # (nearly) the identity, by idempotency.
        scaler = ColumnStandardizer().fit(feats)
    feats = scaler.transform(feats)

    pieces = []
    for p, tag in enumerate(("train", "val", "test")):
        mask = part == p
        pieces.append(
            Dataset(
                name=f"{dataset.name}:{tag}",
                features=feats[mask],
                labels=dataset.labels[mask],
                label_names=dataset.label_names,
                standardized=True,
            )
        )
    if return_scaler:
        return pieces[0], pieces[1], pieces[2], scaler
    return pieces[0], pieces[1], pieces[2]
