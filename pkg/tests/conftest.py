import numpy as np
import pytest

from metaselect.corpus import Dataset, standardize
from metaselect.factorization import factorize
from metaselect.learners.collection import ModelSpec, default_collection
from metaselect.offline import build_matrices, fit_all_runtime_predictors
from metaselect.synth import gaussian_blobs, imbalanced_mixture, xor_blobs


def subcollection(positions):
    """Re-index a slice of the small collection so index == column position."""
    small = default_collection("small")
    return [
        ModelSpec(
            algorithm=small[p].algorithm,
            hyperparameters=small[p].hyperparameters,
            index=pos,
        )
        for pos, p in enumerate(positions)
    ]


def tiny_corpus():
    datasets = []
    for i, (maker, kwargs) in enumerate(
        [
            (gaussian_blobs, dict(n_points=70, n_features=3, separation=4.0)),
            (gaussian_blobs, dict(n_points=80, n_features=4, separation=2.0, n_classes=3)),
            (xor_blobs, dict(n_points=75)),
            (imbalanced_mixture, dict(n_points=90, n_features=3)),
            (gaussian_blobs, dict(n_points=65, n_features=2, separation=1.5, label_noise=0.15)),
        ]
    ):
        X, y = maker(seed=20 + i, **kwargs)
        datasets.append(
            Dataset(f"tiny{i}", standardize(X), y, standardized=True)
        )
    return datasets


# knn x3, gaussian_nb, logistic x2, perceptron, tree x3, forest, adaboost
MINI_POSITIONS = (0, 4, 8, 10, 11, 14, 16, 17, 21, 24, 27, 34)


@pytest.fixture(scope="session")
def mini_offline():
    """Small real offline artifacts shared across online/harness tests."""
    corpus = tiny_corpus()
    collection = subcollection(MINI_POSITIONS)
    error_matrix, runtime_matrix = build_matrices(corpus, collection, seed=1)
    sizes = np.array([[d.n_points, d.p_features] for d in corpus], dtype=float)
    predictors = fit_all_runtime_predictors(runtime_matrix, sizes)
    factors = factorize(error_matrix.values)
    return {
        "corpus": corpus,
        "collection": collection,
        "error_matrix": error_matrix,
        "runtime_matrix": runtime_matrix,
        "sizes": sizes,
        "predictors": predictors,
        "factors": factors,
    }
