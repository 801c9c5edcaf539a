"""Online stage: probe, impute, ensemble, and double the time target.

Each round predicts model runtimes, picks a probe set by experiment design
under the round's time target, cross-validates the probes, infers the
dataset's latent vector from every observation so far, re-validates the best
predicted models, and builds a voting ensemble. The controller doubles the
time target while it is at most half the total budget and the elapsed time
has not crossed that same half, incrementing the factor rank whenever the
validation error improved.

Budget accounting: the virtual clock charges each model's cost exactly once,
at its first cross-validation on this dataset (a supplied charge table or
the predicted runtime); refits of ensemble members and linear algebra are
free. The wall clock simply reads real time. No model is started when its
estimated cost would push the total past the hard budget.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_X_y

from metaselect.corpus import ColumnStandardizer, Dataset, make_splits, train_val_test_split
from metaselect.design import DesignProblem, plan_probes
from metaselect.errors import ContractViolationError, InfeasibleBudgetError
from metaselect.factorization import LatentFactors, impute, infer_latent, select_rank
from metaselect.learners.base import MajorityClassClassifier
from metaselect.learners.collection import ModelSpec, build_learner
from metaselect.learners.ensemble import Ensemble, TrainedEnsemble, ensemble_selection
from metaselect.learners.evaluation import FitReport, cross_validate
from metaselect.learners.metrics import balanced_error_rate
from metaselect.offline import RuntimePredictor, predict_runtime


class Clock:
    """Monotone time source; the virtual mode advances only by charges."""

    def __init__(self, mode: str = "virtual"):
        if mode not in ("wall", "virtual"):
            raise ValueError("mode must be 'wall' or 'virtual'")
        self.mode = mode
        self._virtual = 0.0
        self._start = time.monotonic()

    def elapsed(self) -> float:
        if self.mode == "virtual":
            return self._virtual
        return time.monotonic() - self._start

    def charge(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("cannot charge negative time")
        if self.mode == "virtual":
            self._virtual += seconds


@dataclass(frozen=True)
class RoundResult:
    """Everything one round produced."""

    round_index: int
    rank_used: int
    time_target: float
    S: tuple[int, ...]
    probe_errors: tuple[float, ...]
    x_hat: np.ndarray | None
    e_hat: np.ndarray | None
    best_predicted: tuple[int, ...]
    ensemble: Ensemble | None
    validation_error: float
    elapsed: float
    no_model: bool = False

    def to_log_record(self) -> dict:
        return {
            "round": self.round_index,
            "k": self.rank_used,
            "time_target": self.time_target,
            "S": list(self.S),
            "e_S": [float(e) for e in self.probe_errors],
            "T_best": list(self.best_predicted),
            "validation_error": float(self.validation_error),
            "elapsed": float(self.elapsed),
            "no_model": self.no_model,
            "ensemble": self.ensemble.to_dict() if self.ensemble else None,
        }


@dataclass
class OnlineResult:
    """Final artifact of a full online run."""

    rounds: list[RoundResult]
    best_round_index: int | None
    ensemble: Ensemble | None
    predictor: object
    validation_error: float
    test_error: float
    train: Dataset
    validation: Dataset
    test: Dataset
    scaler: ColumnStandardizer

    @property
    def no_model(self) -> bool:
        return self.ensemble is None

    def round_log(self) -> list[dict]:
        return [r.to_log_record() for r in self.rounds]


def _final_fit_seed(seed: int, index: int) -> int:
    return int(np.random.default_rng([seed, index, 2**20]).integers(2**31 - 1))


class _RoundRunner:
    """State shared by the rounds of one online run."""

    def __init__(
        self,
        collection: list[ModelSpec],
        runtime_predictors: list[RuntimePredictor],
        train: Dataset,
        validation: Dataset,
        split,
        clock: Clock,
        total_budget: float,
        seed: int,
        strict_budget: bool,
        scalarization: str,
        evaluate=None,
        charge_times=None,
    ):
        self.collection = collection
        self.train = train
        self.validation = validation
        self.split = split
        self.clock = clock
        self.total_budget = total_budget
        self.seed = seed
        self.strict_budget = strict_budget
        self.scalarization = scalarization
        self.evaluate = evaluate or cross_validate
        self.charge_times = (
            None if charge_times is None else np.asarray(charge_times, dtype=float)
        )
        by_index = {p.index: p for p in runtime_predictors}
        self.t_hat = np.array(
            [
                max(
                    predict_runtime(
                        by_index[s.index], train.n_points, max(train.p_features, 1)
                    ),
                    1e-12,
                )
                for s in collection
            ]
        )
        self.reports: dict[int, FitReport] = {}
        self.fitted: dict[int, object] = {}

    # -- model evaluation with budget guarding ------------------------------

    def _cost(self, j: int) -> float:
        if self.clock.mode == "virtual" and self.charge_times is not None:
            return float(self.charge_times[j])
        return float(self.t_hat[j])

    def observe(self, j: int) -> bool:
        """Cross-validate model j unless cached or over the hard budget."""
        if j in self.reports:
            return True
        cost = self._cost(j)
        if self.clock.elapsed() + cost > self.total_budget:
            return False
        report = self.evaluate(
            self.collection[j], self.train, self.split, seed=self.seed
        )
        self.reports[j] = report
        if self.clock.mode == "virtual":
            self.clock.charge(cost)
        return True

    def trained_member(self, j: int):
        if j not in self.fitted:
            learner = build_learner(
                self.collection[j], random_state=_final_fit_seed(self.seed, j)
            )
            learner.fit(self.train.features, self.train.labels)
            self.fitted[j] = learner
        return self.fitted[j]

    def majority_validation_error(self) -> float:
        fallback = MajorityClassClassifier().fit(
            self.train.features, self.train.labels
        )
        return balanced_error_rate(
            self.validation.labels,
            fallback.predict(self.validation.features),
            self.train.n_classes,
        )

    # -- one full round ------------------------------------------------------

    def run_round(
        self, round_index: int, Y_k: np.ndarray, time_target: float, n_best: int
    ) -> RoundResult:
        def degenerate():
            return RoundResult(
                round_index=round_index,
                rank_used=Y_k.shape[0],
                time_target=time_target,
                S=(),
                probe_errors=(),
                x_hat=None,
                e_hat=None,
                best_predicted=(),
                ensemble=None,
                validation_error=self.majority_validation_error(),
                elapsed=self.clock.elapsed(),
                no_model=True,
            )

        problem = DesignProblem(
            Y=Y_k,
            runtimes=self.t_hat,
            time_budget=time_target,
            scalarization=self.scalarization,
        )
        try:
            plan = plan_probes(problem, strict=self.strict_budget)
        except InfeasibleBudgetError:
            return degenerate()

        for j in plan.S:
            self.observe(j)
        observed = sorted(self.reports)
        if not observed:
            return degenerate()

        errors = np.array([self.reports[j].cv_error for j in observed])
        x_hat = infer_latent(Y_k[:, observed], errors)
        e_hat = impute(Y_k, x_hat)

        order = np.lexsort((np.arange(e_hat.size), e_hat))
        best_predicted = tuple(int(j) for j in order[:n_best])
        for j in best_predicted:
            self.observe(j)
        candidates = [j for j in best_predicted if j in self.reports]
        if not candidates:
            candidates = observed  # budget exhausted: reuse what we have

        ensemble = ensemble_selection(
            candidates,
            [self.reports[j].cv_error for j in candidates],
            [self.reports[j].fold_predictions for j in candidates],
            self.train.labels,
            n_classes=self.train.n_classes,
        )
        trained = TrainedEnsemble(
            ensemble, {j: self.trained_member(j) for j, _ in ensemble.members}
        )
        val_error = balanced_error_rate(
            self.validation.labels,
            trained.predict(self.validation.features),
            self.train.n_classes,
        )
        observed_probes = tuple(j for j in plan.S if j in self.reports)
        return RoundResult(
            round_index=round_index,
            rank_used=Y_k.shape[0],
            time_target=time_target,
            S=observed_probes,
            probe_errors=tuple(self.reports[j].cv_error for j in observed_probes),
            x_hat=x_hat,
            e_hat=e_hat,
            best_predicted=best_predicted,
            ensemble=ensemble,
            validation_error=val_error,
            elapsed=self.clock.elapsed(),
        )


def fit_one_round(
    Y_k: np.ndarray,
    runtime_predictors: list[RuntimePredictor],
    collection: list[ModelSpec],
    dataset: Dataset,
    time_target: float,
    n_best: int = 5,
    clock: Clock | None = None,
    *,
    total_budget: float = np.inf,
    n_folds: int = 5,
    seed: int = 0,
    strict_budget: bool = False,
    scalarization: str = "D",
    evaluate=None,
    charge_times=None,
    validation: Dataset | None = None,
) -> RoundResult:
    """Run a single probe-impute-ensemble round on a training dataset.

    ``dataset`` is used for cross-validation; ``validation`` (defaulting to
    the training data itself) only scores the resulting ensemble.
    """
    if time_target <= 0:
        raise ValueError("time target must be positive")
    clock = clock or Clock("virtual")
    split = make_splits(dataset, n_folds=min(n_folds, dataset.n_points), seed=seed)
    runner = _RoundRunner(
        collection,
        runtime_predictors,
        dataset,
        validation or dataset,
        split,
        clock,
        total_budget,
        seed,
        strict_budget,
        scalarization,
        evaluate=evaluate,
        charge_times=charge_times,
    )
    return runner.run_round(0, np.atleast_2d(Y_k), time_target, n_best)


def run_online(
    factors: LatentFactors,
    runtime_predictors: list[RuntimePredictor],
    collection: list[ModelSpec],
    dataset: Dataset,
    time_budget: float,
    *,
    initial_time_target: float | None = None,
    initial_rank: int | None = None,
    n_best: int = 5,
    clock: Clock | None = None,
    n_folds: int = 5,
    seed: int = 0,
    strict_budget: bool = False,
    fresh_rounds: bool = False,
    leakage_free: bool = True,
    scalarization: str = "D",
    evaluate=None,
    charge_times=None,
) -> OnlineResult:
    """Full online stage with the doubling time-target schedule.

    Returns the ensemble with the best validation error across rounds; when
    no round could fit any model, the artifact degrades to a majority-class
    predictor. Virtual-clock runs are bit-for-bit reproducible.
    """
    if time_budget <= 0:
        raise ValueError("time budget must be positive")
    clock = clock or Clock("virtual")
    rng = np.random.default_rng([seed, 17])
    split_seed = int(rng.integers(2**31 - 1))
    train, validation, test, scaler = train_val_test_split(
        dataset, seed=split_seed, leakage_free=leakage_free, return_scaler=True
    )

    time_target = (
        initial_time_target if initial_time_target is not None else time_budget / 64.0
    )
    if time_target <= 0:
        raise ValueError("initial time target must be positive")
    k_max = factors.k_max
    if initial_rank is not None:
        k = int(initial_rank)
        if not 1 <= k <= k_max:
            raise ValueError(f"initial rank {k} outside [1, {k_max}]")
    else:
        k = min(select_rank(factors.singular_values, 0.03), 4, k_max)

    runner = _RoundRunner(
        collection,
        runtime_predictors,
        train,
        validation,
        make_splits(train, n_folds=min(n_folds, train.n_points), seed=seed),
        clock,
        time_budget,
        seed,
        strict_budget,
        scalarization,
        evaluate=evaluate,
        charge_times=charge_times,
    )

    rounds: list[RoundResult] = []
    previous_error: float | None = None
    best_index: int | None = None
    best_trained: TrainedEnsemble | None = None
    round_index = 0
    while time_target <= time_budget / 2 and clock.elapsed() <= time_budget / 2:
        if fresh_rounds:
            runner.reports.clear()
        Y_k = factors.Y[:k, :]
        result = runner.run_round(round_index, Y_k, time_target, n_best)
        rounds.append(result)
        if not result.no_model and (
            best_index is None
            or result.validation_error < rounds[best_index].validation_error
        ):
            best_index = round_index
            best_trained = TrainedEnsemble(
                result.ensemble,
                {j: runner.trained_member(j) for j, _ in result.ensemble.members},
            )
        if previous_error is not None and result.validation_error < previous_error:
            k = min(k + 1, k_max)
        previous_error = result.validation_error
        time_target *= 2
        round_index += 1

    if best_index is None:
        fallback = MajorityClassClassifier().fit(train.features, train.labels)
        val_err = balanced_error_rate(
            validation.labels, fallback.predict(validation.features), train.n_classes
        )
        test_err = balanced_error_rate(
            test.labels, fallback.predict(test.features), train.n_classes
        )
        return OnlineResult(
            rounds=rounds,
            best_round_index=None,
            ensemble=None,
            predictor=fallback,
            validation_error=val_err,
            test_error=test_err,
            train=train,
            validation=validation,
            test=test,
            scaler=scaler,
        )

    best = rounds[best_index]
    test_err = balanced_error_rate(
        test.labels, best_trained.predict(test.features), train.n_classes
    )
    return OnlineResult(
        rounds=rounds,
        best_round_index=best_index,
        ensemble=best.ensemble,
        predictor=best_trained,
        validation_error=best.validation_error,
        test_error=test_err,
        train=train,
        validation=validation,
        test=test,
        scaler=scaler,
    )


def predict_with_ensemble(trained: TrainedEnsemble, X) -> np.ndarray:
    """Majority-vote predictions of a trained ensemble on new points."""
    if not isinstance(trained, TrainedEnsemble):
        raise ContractViolationError("predictor is not a trained ensemble")
    return trained.predict(np.asarray(X, dtype=float))


class TimeConstrainedModelSelector(BaseEstimator, ClassifierMixin):
    """Scikit-learn facade over the online stage.

    ``fit`` splits the provided data into train/validation/test folds
    internally, runs the doubling schedule against the supplied offline
    artifacts, and keeps the best ensemble; ``predict`` votes with it.
    """

    def __init__(
        self,
        factors: LatentFactors = None,
        runtime_predictors: list[RuntimePredictor] = None,
        collection: list[ModelSpec] = None,
        time_budget: float = 64.0,
        initial_time_target: float | None = None,
        initial_rank: int | None = None,
        n_best: int = 5,
        clock_mode: str = "virtual",
        n_folds: int = 5,
        seed: int = 0,
        strict_budget: bool = False,
        fresh_rounds: bool = False,
        leakage_free: bool = True,
        scalarization: str = "D",
    ):
        self.factors = factors
        self.runtime_predictors = runtime_predictors
        self.collection = collection
        self.time_budget = time_budget
        self.initial_time_target = initial_time_target
        self.initial_rank = initial_rank
        self.n_best = n_best
        self.clock_mode = clock_mode
        self.n_folds = n_folds
        self.seed = seed
        self.strict_budget = strict_budget
        self.fresh_rounds = fresh_rounds
        self.leakage_free = leakage_free
        self.scalarization = scalarization

    def fit(self, X, y):
        if self.factors is None or self.runtime_predictors is None or self.collection is None:
            raise ValueError("factors, runtime_predictors and collection are required")
        X, y = check_X_y(X, y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("need at least two classes")
        dataset = Dataset(
            name="selector-fit",
            features=X,
            labels=encoded.astype(int),
            standardized=False,
        )
        result = run_online(
            self.factors,
            self.runtime_predictors,
            self.collection,
            dataset,
            self.time_budget,
            initial_time_target=self.initial_time_target,
            initial_rank=self.initial_rank,
            n_best=self.n_best,
            clock=Clock(self.clock_mode),
            n_folds=self.n_folds,
            seed=self.seed,
            strict_budget=self.strict_budget,
            fresh_rounds=self.fresh_rounds,
            leakage_free=self.leakage_free,
            scalarization=self.scalarization,
        )
        self.result_ = result
        self.ensemble_ = result.ensemble
        self.validation_error_ = result.validation_error
        self.test_error_ = result.test_error
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = check_array(X)
        feats = self.result_.scaler.transform(X)
        codes = self.result_.predictor.predict(feats)
        return self.classes_[codes]
