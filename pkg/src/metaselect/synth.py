"""Bundled synthetic corpus: small datasets with diverse model orderings.

Three families are mixed so the error matrix has usable low-rank structure:
Gaussian blobs (everything works, linear models shine), XOR/ring layouts
(neighbour and tree models win, linear models flounder), and imbalanced
overlapping mixtures (balanced error stresses the minority class). Label
noise levels spread difficulty within families.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from metaselect.corpus import Dataset, standardize

FAMILIES = ("blobs", "xor", "rings", "imbalanced")


def _apply_label_noise(y, n_classes, noise, rng):
    if noise <= 0:
        return y
    flip = rng.random(y.size) < noise
    y = y.copy()
    y[flip] = rng.integers(0, n_classes, size=int(flip.sum()))
    return y


def gaussian_blobs(
    n_points: int,
    n_features: int = 4,
    n_classes: int = 2,
    separation: float = 3.0,
    label_noise: float = 0.0,
    seed: int = 0,
):
    """Spherical class clusters at random centers ``separation`` apart."""
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_classes, n_features))
    centers *= separation / np.maximum(
        np.linalg.norm(centers, axis=1, keepdims=True), 1e-12
    )
    y = rng.integers(0, n_classes, size=n_points)
    X = centers[y] + rng.standard_normal((n_points, n_features))
    return X, _apply_label_noise(y, n_classes, label_noise, rng)


def xor_blobs(n_points: int, scale: float = 2.0, label_noise: float = 0.0, seed: int = 0):
    """Four corner clusters in 2-D, diagonal corners share a class."""
    rng = np.random.default_rng(seed)
    corners = np.array([[1, 1], [-1, -1], [1, -1], [-1, 1]], dtype=float) * scale
    which = rng.integers(0, 4, size=n_points)
    X = corners[which] + 0.6 * rng.standard_normal((n_points, 2))
    y = (which >= 2).astype(int)
    return X, _apply_label_noise(y, 2, label_noise, rng)


def concentric_rings(
    n_points: int, n_rings: int = 2, noise: float = 0.15, label_noise: float = 0.0, seed: int = 0
):
    """Annuli of increasing radius; the ring index is the class."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, n_rings, size=n_points)
    radius = 1.0 + 1.5 * y + noise * rng.standard_normal(n_points)
    angle = rng.uniform(0, 2 * np.pi, size=n_points)
    X = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
    return X, _apply_label_noise(y, n_rings, label_noise, rng)


def imbalanced_mixture(
    n_points: int,
    n_features: int = 4,
    minority_fraction: float = 0.15,
    overlap: float = 1.5,
    label_noise: float = 0.0,
    seed: int = 0,
):
    """Two overlapping Gaussians with a rare positive class."""
    rng = np.random.default_rng(seed)
    y = (rng.random(n_points) < minority_fraction).astype(int)
    shift = np.full(n_features, overlap / np.sqrt(n_features))
    X = rng.standard_normal((n_points, n_features)) + np.outer(y, shift)
    return X, _apply_label_noise(y, 2, label_noise, rng)


def _corpus_recipe(count: int, seed: int):
    """Deterministic parameter schedule for the bundled corpus."""
    rng = np.random.default_rng(seed)
    recipes = []
    for i in range(count):
        family = FAMILIES[i % len(FAMILIES)]
        n_points = int(rng.integers(70, 180))
        noise = float(rng.choice([0.0, 0.05, 0.1, 0.2]))
        sub = int(rng.integers(0, 2**31 - 1))
        if family == "blobs":
            params = {
                "n_points": n_points,
                "n_features": int(rng.integers(3, 8)),
                "n_classes": int(rng.choice([2, 3, 4])),
                "separation": float(rng.uniform(1.5, 4.0)),
                "label_noise": noise,
                "seed": sub,
            }
        elif family == "xor":
            params = {
                "n_points": n_points,
                "scale": float(rng.uniform(1.5, 2.5)),
                "label_noise": noise,
                "seed": sub,
            }
        elif family == "rings":
            params = {
                "n_points": n_points,
                "n_rings": int(rng.choice([2, 3])),
                "noise": float(rng.uniform(0.1, 0.25)),
                "label_noise": noise,
                "seed": sub,
            }
        else:
            params = {
                "n_points": n_points,
                "n_features": int(rng.integers(3, 8)),
                "minority_fraction": float(rng.uniform(0.1, 0.3)),
                "overlap": float(rng.uniform(1.0, 2.5)),
                "label_noise": noise,
                "seed": sub,
            }
        recipes.append((f"{family}_{i:03d}", family, params))
    return recipes


_GENERATORS = {
    "blobs": gaussian_blobs,
    "xor": xor_blobs,
    "rings": concentric_rings,
    "imbalanced": imbalanced_mixture,
}


def make_corpus(count: int = 20, seed: int = 7) -> list[Dataset]:
    """Generate the bundled corpus as in-memory (standardized) datasets."""
    corpus = []
    for name, family, params in _corpus_recipe(count, seed):
        X, y = _GENERATORS[family](**params)
        corpus.append(
            Dataset(
                name=name,
                features=standardize(X),
                labels=y,
                label_names=tuple(f"c{c}" for c in range(int(y.max()) + 1)),
                standardized=True,
            )
        )
    return corpus


def write_corpus(
    out_dir: str | Path, count: int = 20, seed: int = 7, categorical_every: int = 5
) -> Path:
    """Write the corpus as CSV files plus a JSON manifest; returns its path.

    Every ``categorical_every``-th dataset gets one feature discretized into
    letter tokens so ingestion exercises the one-hot path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i, (name, family, params) in enumerate(_corpus_recipe(count, seed)):
        X, y = _GENERATORS[family](**params)
        path = out_dir / f"{name}.csv"
        categorical = categorical_every > 0 and i % categorical_every == categorical_every - 1
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row, label in zip(X, y):
                cells = []
                for c, val in enumerate(row):
                    if categorical and c == 0:
                        level = min(int(val - X[:, 0].min()), 25)
                        cells.append(chr(ord("a") + level))
                    else:
                        cells.append("%.17g" % val)
                cells.append(f"c{label}")
                writer.writerow(cells)
        records.append({"name": name, "path": path.name})
    manifest = out_dir / "manifest.json"
    with open(manifest, "w") as fh:
        json.dump(records, fh, indent=1)
        fh.write("\n")
    return manifest
