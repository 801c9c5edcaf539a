import numpy as np
import pytest

from metaselect.factorization import (
    LatentFactors,
    factorize,
    impute,
    impute_row,
    infer_latent,
    nmf,
    select_rank,
)


def eigen_oracle(E):
    """Independent SVD via normal equations: eigendecompose E^T E."""
    gram = E.T @ E
    eigvals, eigvecs = np.linalg.eigh(gram)
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    sigma = np.sqrt(np.maximum(eigvals, 0.0))
    return sigma, eigvecs


class TestFactorize:
    def test_rank_one_outer_product(self):
        rng = np.random.default_rng(0)
        E = np.outer(rng.normal(size=6), rng.normal(size=9))
        f = factorize(E)
        assert f.singular_values[1] == pytest.approx(0.0, abs=1e-10)
        assert np.allclose(f.reconstruction(1), E, atol=1e-10)

    def test_identity_has_flat_spectrum(self):
        f = factorize(np.eye(3))
        assert np.allclose(f.singular_values, 1.0)

    def test_full_rank_reconstruction(self):
        E = np.random.default_rng(1).random((12, 7))
        f = factorize(E)
        assert np.linalg.norm(f.X @ f.Y - E) <= 1e-8 * np.linalg.norm(E)

    def test_eckart_young_tail_identity(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            E = rng.normal(size=(rng.integers(4, 12), rng.integers(4, 12)))
            f = factorize(E)
            s = f.singular_values
            scale = np.linalg.norm(E)
            for k in range(1, len(s) + 1):
                err = np.linalg.norm(E - f.reconstruction(k))
                tail = np.sqrt(np.sum(s[k:] ** 2))
                assert abs(err - tail) <= 1e-6 * scale

    def test_agrees_with_normal_equations_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            E = rng.normal(size=(10, 8))
            f = factorize(E)
            sigma, V = eigen_oracle(E)
            scale = max(sigma[0], 1.0)
            assert np.allclose(f.singular_values, sigma, atol=1e-8 * scale)
            for k in (1, 3, 8):
                ours = np.linalg.norm(E - f.reconstruction(k))
                theirs = np.linalg.norm(E - E @ V[:, :k] @ V[:, :k].T)
                assert abs(ours - theirs) <= 1e-8 * np.linalg.norm(E)

    def test_sign_convention_is_deterministic(self):
        E = np.random.default_rng(4).random((9, 5))
        a, b = factorize(E), factorize(E.copy())
        assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
        for i in range(a.Y.shape[0]):
            j = np.argmax(np.abs(a.Y[i]))
            assert a.Y[i, j] > 0

    def test_truncation_equals_low_rank_factorization(self):
        # nestedness: the leading blocks reproduce the best rank-k product
        E = np.random.default_rng(5).random((8, 6))
        f = factorize(E)
        sigma, V = eigen_oracle(E)
        for k in (1, 2, 4):
            direct = E @ V[:, :k] @ V[:, :k].T
            assert np.allclose(f.reconstruction(k), direct, atol=1e-9)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            factorize(np.empty((0, 3)))
        with pytest.raises(ValueError):
            LatentFactors(np.ones((2, 2)), np.ones((2, 2)), np.ones(2)).truncated(3)


class TestSelectRank:
    def test_threshold_is_inclusive_fraction_of_top(self):
        # 0.05 < 0.01 * 10: only two values clear the 1% threshold
        assert select_rank([10.0, 5.0, 0.05], 0.01) == 2
        assert select_rank([10.0, 5.0, 0.05], 0.03) == 2

    def test_mid_spectrum_value_crosses_thresholds(self):
        assert select_rank([10.0, 5.0, 0.2], 0.01) == 3
        assert select_rank([10.0, 5.0, 0.2], 0.03) == 2

    def test_cap_and_floor(self):
        assert select_rank([10.0, 9.0, 8.0], 0.01, cap=2) == 2
        assert select_rank([10.0, 1e-9], 0.5) == 1

    def test_invalid_threshold(self):
        with pytest.raises(ValueError):
            select_rank([1.0], 0.0)
        with pytest.raises(ValueError):
            select_rank([1.0], 1.0)


class TestInferImpute:
    def test_one_dimensional_ratio(self):
        x = infer_latent(np.array([[4.0]]), np.array([2.0]))
        assert x == pytest.approx([0.5])

    def test_full_rank_consistent_system_recovers_exactly(self):
        rng = np.random.default_rng(6)
        Y = rng.normal(size=(2, 2))
        x_true = rng.normal(size=2)
        e = Y.T @ x_true
        assert np.allclose(infer_latent(Y, e), x_true, atol=1e-8)

    def test_overdetermined_matches_hand_solved_normal_equations(self):
        # A = Y^T = [[1,0],[0,1],[1,1]], e = [1,2,4]
        # A^T A = [[2,1],[1,2]], A^T e = [5,6] -> x = [4/3, 7/3]
        # residual = e - A x = [-1/3, -1/3, 1/3], ||r||^2 = 1/3
        Y = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        e = np.array([1.0, 2.0, 4.0])
        x = infer_latent(Y, e)
        assert np.allclose(x, [4.0 / 3.0, 7.0 / 3.0], atol=1e-12)
        residual = e - Y.T @ x
        assert np.sum(residual**2) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_minimum_norm_on_rank_deficient_probes(self):
        Y = np.array([[1.0, 2.0], [2.0, 4.0]])  # rank 1
        x = infer_latent(Y, np.array([1.0, 2.0]))
        # lstsq picks the minimum-norm solution on the span
        assert np.allclose(Y.T @ x, [1.0, 2.0], atol=1e-12)
        assert abs(x @ np.array([-2.0, 1.0])) < 1e-12  # no null-space component

    def test_impute_zero_vector(self):
        Y = np.random.default_rng(7).normal(size=(3, 5))
        assert np.array_equal(impute(Y, np.zeros(3)), np.zeros(5))

    def test_synthetic_rank_k_row_recovered_from_spanning_probes(self):
        rng = np.random.default_rng(8)
        k, n = 3, 12
        Y = rng.normal(size=(k, n))
        x_true = rng.normal(size=k)
        row = Y.T @ x_true
        for probes in ([0, 1, 2], [3, 7, 11], [0, 4, 8, 10]):
            result = impute_row(Y, probes, row[probes])
            assert np.allclose(result.e_hat, row, atol=1e-6 * max(np.abs(row)))

    def test_clamped_view_reports_raw_and_clipped(self):
        Y = np.array([[1.0, 1.0, 1.0]])
        result = impute_row(Y, [0], [2.0])
        assert result.e_hat == pytest.approx([2.0, 2.0, 2.0])
        assert result.e_hat_clamped == pytest.approx([1.0, 1.0, 1.0])
        negative = impute_row(Y, [0], [-0.5])
        assert negative.e_hat_clamped == pytest.approx([0.0, 0.0, 0.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            infer_latent(np.ones((2, 3)), np.ones(2))
        with pytest.raises(ValueError):
            impute(np.ones((2, 3)), np.ones(3))


class TestNmf:
    def test_rank_one_reconstruction(self):
        rng = np.random.default_rng(9)
        E = np.outer(rng.uniform(0.5, 2, 7), rng.uniform(0.5, 2, 9))
        f = nmf(E, 1, iters=500)
        assert f.objective_history[-1] / np.linalg.norm(E) <= 1e-3

    def test_full_rank_close_to_svd_bound(self):
        for s in range(5):
            E = np.random.default_rng(s).uniform(0.05, 1.0, (6, 5))
            f = nmf(E, 5, iters=500)
            svs = np.linalg.svd(E, compute_uv=False)
            svd_rel = np.sqrt(np.sum(svs[5:] ** 2)) / np.linalg.norm(E)
            assert f.objective_history[-1] / np.linalg.norm(E) <= svd_rel + 0.1

    def test_objective_monotone_nonincreasing(self):
        for s in range(5):
            E = np.random.default_rng(100 + s).uniform(0, 1, (12, 9))
            f = nmf(E, 3, iters=100)
            diffs = np.diff(f.objective_history)
            assert diffs.max() <= 1e-10

    def test_factors_stay_positive_with_zero_rows(self):
        E = np.random.default_rng(10).uniform(0, 1, (6, 6))
        E[2, :] = 0.0
        E[:, 4] = 0.0
        f = nmf(E, 2, iters=200)
        assert f.W.min() > 0 and f.H.min() > 0
        assert np.isfinite(f.objective_history).all()

    def test_two_block_matrix_clusters_models(self):
        u1 = np.zeros(10)
        u1[:5] = 1.0
        w1 = np.zeros(12)
        w1[:6] = 1.0
        E = 0.6 * np.outer(u1, w1) + 0.5 * np.outer(1 - u1, 1 - w1) + 0.05
        f = nmf(E, 2, iters=500)
        clusters = f.model_clusters()
        assert len(set(clusters[:6])) == 1
        assert len(set(clusters[6:])) == 1
        assert clusters[0] != clusters[-1]

    def test_rejects_negative_entries_and_bad_rank(self):
        with pytest.raises(ValueError):
            nmf(np.array([[1.0, -0.1]]), 1)
        with pytest.raises(ValueError):
            nmf(np.ones((3, 3)), 4)

    def test_random_init_is_seeded(self):
        E = np.random.default_rng(11).uniform(0, 1, (8, 6))
        a = nmf(E, 2, iters=50, seed=3, init="random")
        b = nmf(E, 2, iters=50, seed=3, init="random")
        assert np.array_equal(a.W, b.W) and np.array_equal(a.H, b.H)
