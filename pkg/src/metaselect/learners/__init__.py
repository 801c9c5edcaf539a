"""Native base learners, their collection, evaluation and ensembling."""

from metaselect.learners.base import MajorityClassClassifier, NativeClassifier, majority_label
from metaselect.learners.boosting import AdaboostLite
from metaselect.learners.collection import (
    ALGORITHMS,
    ModelSpec,
    build_learner,
    default_collection,
    load_collection,
    save_collection,
)
from metaselect.learners.ensemble import (
    Ensemble,
    TrainedEnsemble,
    ensemble_selection,
    majority_vote,
)
from metaselect.learners.evaluation import FitReport, cross_validate
from metaselect.learners.forest import RandomForestLite
from metaselect.learners.knn import KnnClassifier
from metaselect.learners.linear import LogisticRegressionGd, PerceptronClassifier
from metaselect.learners.metrics import balanced_error_rate
from metaselect.learners.naive_bayes import GaussianNbClassifier
from metaselect.learners.tree import DecisionTreeGini

__all__ = [
    "ALGORITHMS",
    "AdaboostLite",
    "DecisionTreeGini",
    "Ensemble",
    "FitReport",
    "GaussianNbClassifier",
    "KnnClassifier",
    "LogisticRegressionGd",
    "MajorityClassClassifier",
    "ModelSpec",
    "NativeClassifier",
    "PerceptronClassifier",
    "RandomForestLite",
    "TrainedEnsemble",
    "balanced_error_rate",
    "build_learner",
    "cross_validate",
    "default_collection",
    "ensemble_selection",
    "load_collection",
    "majority_label",
    "majority_vote",
    "save_collection",
]
