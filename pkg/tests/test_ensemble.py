import numpy as np
import pytest

from metaselect.errors import ContractViolationError
from metaselect.learners import (
    KnnClassifier,
    balanced_error_rate,
    ensemble_selection,
)
from metaselect.learners.ensemble import Ensemble, TrainedEnsemble, majority_vote

Y_TRUE = np.array([0, 0, 0, 1, 1, 1])
# each candidate errs on one point per class; their majority vote is perfect
PRED_A = np.array([1, 0, 0, 0, 1, 1])
PRED_B = np.array([0, 1, 0, 1, 0, 1])
PRED_C = np.array([0, 0, 1, 1, 1, 0])
THIRD = 1.0 / 3.0


class TestMajorityVote:
    def test_two_member_tie_goes_to_lower_error_member(self):
        vote = majority_vote(np.stack([PRED_A, PRED_B]), [1, 1], [0.2, 0.3], [0, 1], 2)
        assert np.array_equal(vote, PRED_A)
        vote = majority_vote(np.stack([PRED_A, PRED_B]), [1, 1], [0.3, 0.2], [0, 1], 2)
        assert np.array_equal(vote, PRED_B)

    def test_multiplicity_outvotes_error(self):
        # members {A, A, B}: A's two votes win every disagreement
        vote = majority_vote(np.stack([PRED_A, PRED_B]), [2, 1], [0.9, 0.1], [0, 1], 2)
        assert np.array_equal(vote, PRED_A)

    def test_equal_error_tie_breaks_by_model_index(self):
        vote = majority_vote(np.stack([PRED_A, PRED_B]), [1, 1], [0.3, 0.3], [4, 9], 2)
        assert np.array_equal(vote, PRED_A)


class TestEnsembleSelection:
    def test_single_candidate(self):
        ens = ensemble_selection([7], [0.4], [PRED_B], Y_TRUE)
        assert ens.members == ((7, 1),)

    def test_identical_predictions_keep_only_the_better_one(self):
        ens = ensemble_selection([5, 9], [0.3, 0.2], [PRED_A, PRED_A], Y_TRUE)
        assert ens.members == ((9, 1),)

    def test_complementary_trio_all_selected(self):
        ens = ensemble_selection(
            [0, 1, 2], [THIRD, THIRD, THIRD], [PRED_A, PRED_B, PRED_C], Y_TRUE
        )
        assert set(ens.model_indices) == {0, 1, 2}
        vote = majority_vote(
            np.stack([PRED_A, PRED_B, PRED_C]),
            [m for _, m in ens.members],
            list(ens.member_errors),
            list(ens.model_indices),
            2,
        )
        ber = balanced_error_rate(Y_TRUE, vote, 2)
        assert ber == 0.0
        assert ber < THIRD  # strictly better than every member alone

    def test_never_worse_than_best_member(self):
        rng = np.random.default_rng(0)
        for trial in range(25):
            n_points = int(rng.integers(8, 40))
            n_cands = int(rng.integers(2, 8))
            n_classes = int(rng.integers(2, 4))
            y = rng.integers(0, n_classes, n_points)
            preds = [rng.integers(0, n_classes, n_points) for _ in range(n_cands)]
            errors = [balanced_error_rate(y, p, n_classes) for p in preds]
            ens = ensemble_selection(
                list(range(n_cands)), errors, preds, y, n_classes=n_classes
            )
            by_index = {j: p for j, p in enumerate(preds)}
            vote = majority_vote(
                np.stack([by_index[j] for j, _ in ens.members]),
                [m for _, m in ens.members],
                list(ens.member_errors),
                list(ens.model_indices),
                n_classes,
            )
            assert balanced_error_rate(y, vote, n_classes) <= min(errors) + 1e-12

    def test_member_cap(self):
        ens = ensemble_selection(
            [0, 1, 2],
            [THIRD, THIRD, THIRD],
            [PRED_A, PRED_B, PRED_C],
            Y_TRUE,
            max_members=2,
        )
        assert ens.total_multiplicity <= 2

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError):
            ensemble_selection([], [], [], Y_TRUE)


class TestEnsembleType:
    def test_validation(self):
        with pytest.raises(ValueError):
            Ensemble(members=(), member_errors=())
        with pytest.raises(ValueError):
            Ensemble(members=((1, 0),), member_errors=(0.1,))

    def test_round_trip(self):
        ens = Ensemble(members=((3, 2), (5, 1)), member_errors=(0.1, 0.2))
        assert Ensemble.from_dict(ens.to_dict()) == ens


class TestTrainedEnsemble:
    def _fitted(self):
        X = np.array([[0.0], [1.0], [10.0], [11.0]])
        y = np.array([0, 0, 1, 1])
        return KnnClassifier(n_neighbors=1).fit(X, y)

    def test_single_member_matches_model(self):
        learner = self._fitted()
        ens = Ensemble(members=((0, 1),), member_errors=(0.0,))
        trained = TrainedEnsemble(ens, {0: learner})
        X_new = np.array([[0.5], [10.5]])
        assert np.array_equal(trained.predict(X_new), learner.predict(X_new))

    def test_untrained_member_is_a_contract_violation(self):
        ens = Ensemble(members=((0, 1),), member_errors=(0.0,))
        with pytest.raises(ContractViolationError):
            TrainedEnsemble(ens, {0: KnnClassifier()})  # never fit
        with pytest.raises(ContractViolationError):
            TrainedEnsemble(ens, {})
