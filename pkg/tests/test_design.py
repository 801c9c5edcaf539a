import itertools

import numpy as np
import pytest

from metaselect.design import (
    DesignProblem,
    SelectionPlan,
    _complete_rank,
    design_objective,
    duality_gap,
    gram_regularizer,
    plan_probes,
    qr_pivot_select,
    random_select,
    round_selection,
    solve_relaxation,
)
from metaselect.errors import InfeasibleBudgetError


def random_problem(rng, n=None, k=None):
    n = n or int(rng.integers(4, 11))
    k = k or int(rng.integers(1, 4))
    return rng.standard_normal((k, n)) / np.sqrt(k)


class TestDesignObjective:
    def test_identity_gram_values(self):
        # two orthonormal columns: G = I_2
        Y = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert design_objective(Y, [0, 1], "D") == pytest.approx(0.0, abs=1e-6)
        assert design_objective(Y, [0, 1], "A") == pytest.approx(2.0, abs=1e-6)
        assert design_objective(Y, [0, 1], "E") == pytest.approx(1.0, abs=1e-6)

    def test_scaling_determinant_identity(self):
        rng = np.random.default_rng(0)
        Y = rng.standard_normal((3, 7))
        S = [0, 2, 5, 6]
        base = design_objective(Y, S, "D", eps=0.0)
        scaled = design_objective(2.0 * Y, S, "D", eps=0.0)
        assert scaled - base == pytest.approx(-2 * 3 * np.log(2.0), abs=1e-9)

    def test_matches_dense_inverse_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            Y = random_problem(rng)
            v = rng.uniform(0.1, 1.0, Y.shape[1])
            eps = gram_regularizer(Y)
            G = (Y * v) @ Y.T + eps * np.eye(Y.shape[0])
            M = np.linalg.inv(G)
            assert design_objective(Y, v, "D") == pytest.approx(
                np.log(np.linalg.det(M)), rel=1e-8, abs=1e-8
            )
            assert design_objective(Y, v, "A") == pytest.approx(
                np.trace(M), rel=1e-8
            )
            assert design_objective(Y, v, "E") == pytest.approx(
                np.linalg.eigvalsh(M).max(), rel=1e-8
            )

    def test_adding_a_model_never_increases_d_objective(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            Y = random_problem(rng)
            n = Y.shape[1]
            size = int(rng.integers(1, n))
            S = list(rng.choice(n, size=size, replace=False))
            extra = int(rng.choice([j for j in range(n) if j not in S]))
            assert design_objective(Y, S + [extra], "D") <= design_objective(Y, S, "D") + 1e-12


class TestSolveRelaxation:
    def test_one_dimensional_mass_concentrates_on_largest_column(self):
        Y = np.array([[0.5, 2.0, -3.0, 1.0]])
        prob = DesignProblem(Y=Y, count_budget=1)
        v = solve_relaxation(prob)
        assert int(np.argmax(v)) == 2
        assert v[2] >= 0.99

    def test_identical_columns_are_interchangeable(self):
        Y = np.array([[2.0, 2.0, 0.3], [1.0, 1.0, -0.2]])
        prob = DesignProblem(Y=Y, count_budget=1)
        v = solve_relaxation(prob)
        split = design_objective(Y, v)
        lumped = design_objective(Y, np.array([v[0] + v[1], 0.0, v[2]]))
        assert split == pytest.approx(lumped, abs=1e-9)

    def test_relaxation_lower_bounds_integral_optimum(self):
        # spec instance: n=8, k=2, count budget 3
        rng = np.random.default_rng(3)
        Y = random_problem(rng, n=8, k=2)
        prob = DesignProblem(Y=Y, count_budget=3)
        v = solve_relaxation(prob, iters=1000, tol=1e-9)
        relaxed = design_objective(Y, v)
        best = min(
            design_objective(Y, list(S))
            for r in range(1, 4)
            for S in itertools.combinations(range(8), r)
        )
        assert relaxed <= best + 1e-6

    def test_duality_gap_certificate(self):
        rng = np.random.default_rng(4)
        Y = random_problem(rng, n=9, k=3)
        t = rng.uniform(0.5, 2.0, 9)
        prob = DesignProblem(Y=Y, runtimes=t, time_budget=3.0)
        v = solve_relaxation(prob, iters=2000, tol=1e-8)
        assert duality_gap(prob, v) >= -1e-12
        assert duality_gap(prob, v) <= 1e-4

    def test_infeasible_time_budget_raises(self):
        Y = np.ones((1, 3))
        prob = DesignProblem(Y=Y, runtimes=np.array([5.0, 6.0, 7.0]), time_budget=1.0)
        with pytest.raises(InfeasibleBudgetError):
            solve_relaxation(prob)

    def test_weights_stay_feasible(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            Y = random_problem(rng, n=8)
            t = rng.uniform(0.2, 2.0, 8)
            budget = float(t.min() * 2.5)
            prob = DesignProblem(Y=Y, runtimes=t, time_budget=budget)
            v = solve_relaxation(prob)
            assert v.min() >= -1e-12 and v.max() <= 1 + 1e-12
            assert float(v @ t) <= budget + 1e-9


class TestDesignProblemType:
    def test_exactly_one_budget(self):
        Y = np.ones((1, 2))
        with pytest.raises(ValueError):
            DesignProblem(Y=Y)
        with pytest.raises(ValueError):
            DesignProblem(Y=Y, count_budget=1, runtimes=np.ones(2), time_budget=1.0)

    def test_time_budget_needs_positive_runtimes(self):
        Y = np.ones((1, 2))
        with pytest.raises(ValueError):
            DesignProblem(Y=Y, time_budget=1.0)
        with pytest.raises(ValueError):
            DesignProblem(Y=Y, runtimes=np.array([1.0, 0.0]), time_budget=1.0)

    def test_feasibility_flag(self):
        Y = np.ones((2, 3))
        assert DesignProblem(
            Y=Y, runtimes=np.array([1.0, 1.0, 5.0]), time_budget=2.0
        ).feasible
        assert not DesignProblem(
            Y=Y, runtimes=np.array([1.0, 4.0, 5.0]), time_budget=2.0
        ).feasible


class TestRoundSelection:
    def test_keeps_first_budget_exceeding_model(self):
        S = round_selection(
            np.array([0.9, 0.8, 0.1]), np.array([1.0, 1.0, 1.0]), time_budget=2.5
        )
        assert S == [0, 1, 2]

    def test_count_budget_takes_top_weights(self):
        S = round_selection(np.array([0.9, 0.8, 0.1]), count_budget=2)
        assert S == [0, 1]

    def test_tie_break_by_runtime_then_index_with_overshoot_kept(self):
        v = np.array([0.5, 0.5, 0.5])
        t = np.array([5.0, 1.0, 1.0])
        assert round_selection(v, t, time_budget=2.0) == [1, 2, 0]
        assert round_selection(v, t, time_budget=2.0, strict=True) == [1, 2]

    def test_strict_mode_respects_budget_sum(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            n = int(rng.integers(2, 12))
            v = rng.random(n)
            t = rng.uniform(0.1, 3.0, n)
            budget = float(rng.uniform(0.5, t.sum()))
            S = round_selection(v, t, time_budget=budget, strict=True)
            assert sum(t[j] for j in S) <= budget + 1e-12

    def test_count_budget_returns_exactly_n_distinct(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(3, 12))
            N = int(rng.integers(1, n + 1))
            S = round_selection(rng.random(n), count_budget=N)
            assert len(S) == N and len(set(S)) == N

    def test_rejects_double_budgets(self):
        with pytest.raises(ValueError):
            round_selection(np.ones(3), np.ones(3), time_budget=1.0, count_budget=1)


class TestQrPivotSelect:
    def test_first_pivot_is_largest_norm_column(self):
        Y = np.diag([3.0, 2.0, 1.0])
        assert qr_pivot_select(Y, 1) == [0]

    def test_duplicate_dominant_column_not_picked_twice(self):
        Y = np.array([[3.0, 3.0, 0.5], [0.0, 0.0, 0.4]])
        S = qr_pivot_select(Y, 2)
        assert S[0] in (0, 1)
        assert S[1] == 2  # the duplicate has zero residual after the first pivot

    def test_rank_k_selection_is_nonsingular(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            Y = rng.standard_normal((3, 6))
            S = qr_pivot_select(Y, 3)
            assert abs(np.linalg.det(Y[:, S])) > 1e-10

    def test_count_validation(self):
        with pytest.raises(ValueError):
            qr_pivot_select(np.ones((2, 3)), 4)


class TestRandomSelect:
    def test_empty_when_nothing_fits(self):
        assert random_select(np.array([10.0, 10.0]), 5.0, seed=0) == []

    def test_all_fit_returns_permutation(self):
        for seed in range(10):
            S = random_select(np.array([1.0, 1.0, 1.0]), 3.0, seed=seed)
            assert sorted(S) == [0, 1, 2]

    def test_process_frequencies_match_enumeration(self):
        # t = (2, 2, 3), budget 4. First pick is uniform over {0,1,2}.
        # Picking 0 or 1 leaves budget 2: only the other 2-cost model fits
        # -> set {0,1} with probability 2/3. Picking 2 leaves budget 1:
        # nothing fits -> set {2} with probability 1/3.
        t = np.array([2.0, 2.0, 3.0])
        hits = sum(
            set(random_select(t, 4.0, seed=s)) == {0, 1} for s in range(1000)
        )
        assert abs(hits / 1000 - 2.0 / 3.0) < 0.05

    def test_deterministic_per_seed(self):
        t = np.array([1.0, 2.0, 0.5, 1.5])
        assert random_select(t, 3.0, seed=42) == random_select(t, 3.0, seed=42)


class TestPlanProbes:
    def test_plan_fields_and_method_tag(self):
        rng = np.random.default_rng(9)
        Y = random_problem(rng, n=7, k=2)
        t = rng.uniform(0.5, 1.5, 7)
        plan = plan_probes(DesignProblem(Y=Y, runtimes=t, time_budget=3.0))
        assert isinstance(plan, SelectionPlan)
        assert plan.method == "ed-time"
        assert plan.predicted_total_time == pytest.approx(sum(t[j] for j in plan.S))
        assert plan.objective_value == pytest.approx(design_objective(Y, list(plan.S)))

    def test_selected_columns_span_k_dimensions_when_achievable(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            Y = random_problem(rng, n=9, k=3)
            plan = plan_probes(DesignProblem(Y=Y, count_budget=3))
            assert np.linalg.matrix_rank(Y[:, list(plan.S)]) == 3

    def test_rank_completion_swaps_on_count_budget(self):
        # columns 0 and 1 are duplicates; a 2-probe plan must not use both
        Y = np.array([[5.0, 5.0, 1.0], [0.0, 0.0, 1.0]])
        prob = DesignProblem(Y=Y, count_budget=2)
        fixed = _complete_rank(Y, [0, 1], prob, strict=False)
        assert len(fixed) == 2
        assert 2 in fixed

    def test_rank_completion_appends_on_time_budget(self):
        Y = np.array([[5.0, 5.0, 1.0], [0.0, 0.0, 1.0]])
        t = np.array([1.0, 1.0, 1.0])
        prob = DesignProblem(Y=Y, runtimes=t, time_budget=2.0)
        fixed = _complete_rank(Y, [0, 1], prob, strict=False)
        assert fixed == [0, 1, 2]
        strict = _complete_rank(Y, [0, 1], prob, strict=True)
        assert strict == [0, 1]  # no room under the strict budget
