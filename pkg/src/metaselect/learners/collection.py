"""The enumerated model collection: algorithm family x hyperparameter grid."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from metaselect.learners.boosting import AdaboostLite
from metaselect.learners.forest import RandomForestLite
from metaselect.learners.knn import KnnClassifier
from metaselect.learners.linear import LogisticRegressionGd, PerceptronClassifier
from metaselect.learners.naive_bayes import GaussianNbClassifier
from metaselect.learners.tree import DecisionTreeGini

ALGORITHMS = (
    "knn",
    "gaussian_nb",
    "logistic_regression",
    "perceptron",
    "decision_tree",
    "random_forest_lite",
    "adaboost_lite",
)


@dataclass(frozen=True)
class ModelSpec:
    """One algorithm-hyperparameter combination, at position ``index``."""

    algorithm: str
    hyperparameters: tuple[tuple[str, object], ...]
    index: int

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")

    @property
    def params(self) -> dict:
        return dict(self.hyperparameters)

    def label(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in self.hyperparameters)
        return f"{self.algorithm}({inner})"

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "hyperparameters": dict(self.hyperparameters),
            "index": self.index,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelSpec":
        return ModelSpec(
            algorithm=d["algorithm"],
            hyperparameters=tuple(d["hyperparameters"].items()),
            index=int(d["index"]),
        )


def _grid(size_class: str) -> list[tuple[str, dict]]:
    small = size_class == "small"
    entries: list[tuple[str, dict]] = []
    ks = (1, 3, 5, 7, 9) if small else (1, 3, 5, 7, 9, 11, 13, 15)
    for k in ks:
        for p in (1, 2):
            entries.append(("knn", {"n_neighbors": k, "p": p}))
    entries.append(("gaussian_nb", {}))
    cs = (0.25, 0.5, 1.0, 2.0, 4.0) if small else (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0)
    for c in cs:
        entries.append(("logistic_regression", {"C": c}))
    entries.append(("perceptron", {}))
    splits = (
        (2, 4, 8, 16, 32, 64, 128, 256, 0.01, 0.001)
        if small
        else (2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 0.01, 0.001, 0.0001, 1e-05)
    )
    for mss in splits:
        entries.append(("decision_tree", {"min_samples_split": mss}))
    forest_splits = (2, 4, 8, 16, 32, 64, 128) if small else (2, 4, 8, 16, 32, 64, 128, 256, 0.01, 0.001)
    forest_features = ("sqrt",) if small else ("sqrt", "log2", 0.5)
    for mss in forest_splits:
        for mf in forest_features:
            entries.append(
                ("random_forest_lite", {"min_samples_split": mss, "max_features": mf})
            )
    rates = (0.5, 1.0, 2.0) if small else (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    for n_est in (50, 100):
        for lr in rates:
            entries.append(("adaboost_lite", {"n_estimators": n_est, "learning_rate": lr}))
    return entries


def default_collection(size_class: str = "small") -> list[ModelSpec]:
    """The built-in model grid: ~40 models for ``small``, ~80 for ``full``.

    Ordering is fixed by the declaration above, so the index of each model is
    stable across runs and serializations.
    """
    if size_class not in ("small", "full"):
        raise ValueError("size_class must be 'small' or 'full'")
    return [
        ModelSpec(algorithm=alg, hyperparameters=tuple(hp.items()), index=j)
        for j, (alg, hp) in enumerate(_grid(size_class))
    ]


_BUILDERS = {
    "knn": lambda hp, seed: KnnClassifier(**hp),
    "gaussian_nb": lambda hp, seed: GaussianNbClassifier(**hp),
    "logistic_regression": lambda hp, seed: LogisticRegressionGd(**hp),
    "perceptron": lambda hp, seed: PerceptronClassifier(random_state=seed, **hp),
    "decision_tree": lambda hp, seed: DecisionTreeGini(**hp),
    "random_forest_lite": lambda hp, seed: RandomForestLite(random_state=seed, **hp),
    "adaboost_lite": lambda hp, seed: AdaboostLite(**hp),
}


def build_learner(spec: ModelSpec, random_state: int = 0):
    """Instantiate the native estimator described by a spec."""
    return _BUILDERS[spec.algorithm](spec.params, random_state)


def save_collection(specs: list[ModelSpec], path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump([s.to_dict() for s in specs], fh, indent=1)
        fh.write("\n")


def load_collection(path: str | Path) -> list[ModelSpec]:
    with open(path) as fh:
        return [ModelSpec.from_dict(d) for d in json.load(fh)]
