"""Time-constrained model selection from cross-validated error matrices.

The package learns latent meta-features of datasets and models from an
offline error matrix, decides which models to probe on a new dataset with
budget-constrained experiment design, imputes the full performance vector by
least squares, and assembles a greedy voting ensemble under a doubling
time-target schedule.
"""

from metaselect.corpus import (
    ColumnStandardizer,
    CvSplit,
    Dataset,
    load_dataset,
    load_manifest,
    make_splits,
    standardize,
    train_val_test_split,
)
from metaselect.design import (
    DesignProblem,
    SelectionPlan,
    design_objective,
    duality_gap,
    plan_probes,
    qr_pivot_select,
    random_select,
    round_selection,
    solve_relaxation,
)
from metaselect.factorization import (
    ImputedVector,
    LatentFactors,
    NmfFactors,
    factorize,
    impute,
    impute_row,
    infer_latent,
    nmf,
    select_rank,
)
from metaselect.learners import (
    Ensemble,
    FitReport,
    ModelSpec,
    TrainedEnsemble,
    balanced_error_rate,
    build_learner,
    cross_validate,
    default_collection,
    ensemble_selection,
)
from metaselect.offline import (
    ErrorMatrix,
    RuntimeMatrix,
    RuntimePredictor,
    build_matrices,
    fit_all_runtime_predictors,
    fit_runtime,
    predict_runtime,
    runtime_accuracy_report,
)
from metaselect.online import (
    Clock,
    OnlineResult,
    RoundResult,
    TimeConstrainedModelSelector,
    fit_one_round,
    run_online,
)

__version__ = "0.1.0"

__all__ = [
    "Clock",
    "ColumnStandardizer",
    "CvSplit",
    "Dataset",
    "DesignProblem",
    "Ensemble",
    "ErrorMatrix",
    "FitReport",
    "ImputedVector",
    "LatentFactors",
    "ModelSpec",
    "NmfFactors",
    "OnlineResult",
    "RoundResult",
    "RuntimeMatrix",
    "RuntimePredictor",
    "SelectionPlan",
    "TimeConstrainedModelSelector",
    "TrainedEnsemble",
    "balanced_error_rate",
    "build_learner",
    "build_matrices",
    "cross_validate",
    "default_collection",
    "design_objective",
    "duality_gap",
    "ensemble_selection",
    "factorize",
    "fit_all_runtime_predictors",
    "fit_one_round",
    "fit_runtime",
    "impute",
    "impute_row",
    "infer_latent",
    "load_dataset",
    "load_manifest",
    "make_splits",
    "nmf",
    "plan_probes",
    "predict_runtime",
    "qr_pivot_select",
    "random_select",
    "round_selection",
    "run_online",
    "select_rank",
    "solve_relaxation",
    "standardize",
    "train_val_test_split",
]
