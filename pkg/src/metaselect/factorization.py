"""Low-rank structure of the error matrix.

Truncated SVD supplies latent meta-features for datasets (rows) and models
(columns); least squares on a probed subset of columns recovers the latent
vector of a new dataset, whose inner products with the model features impute
the full performance vector. NMF with multiplicative updates supplies the
nonnegative clustering view.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LatentFactors:
    """Full-rank factorization E = X @ Y with nested truncations.

    ``X`` is (m, k_max) with rows holding dataset features scaled by the
    singular values; ``Y`` is (k_max, n) with orthonormal rows, columns are
    the model features. Rank-k factors are the leading sub-blocks, so one
    full factorization serves every rank.
    """

    X: np.ndarray
    Y: np.ndarray
    singular_values: np.ndarray

    @property
    def k_max(self) -> int:
        return self.X.shape[1]

    def truncated(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Leading rank-k blocks (X_k, Y_k)."""
        if not 1 <= k <= self.k_max:
            raise ValueError(f"rank {k} outside [1, {self.k_max}]")
        return self.X[:, :k], self.Y[:k, :]

    def reconstruction(self, k: int | None = None) -> np.ndarray:
        if k is None:
            k = self.k_max
        Xk, Yk = self.truncated(k)
        return Xk @ Yk


def factorize(matrix: np.ndarray) -> LatentFactors:
    """Full SVD of the (imputed, fully populated) error matrix.

    Sign convention: every component is oriented so the largest-magnitude
    entry of its model-side singular vector is positive, which makes the
    factors deterministic across runs and platforms.
    """
    E = np.asarray(matrix, dtype=float)
    if E.ndim != 2 or min(E.shape) < 1:
        raise ValueError("need a nonempty 2-D matrix")
    U, s, Vt = np.linalg.svd(E, full_matrices=False)
    for i in range(Vt.shape[0]):
        j = int(np.argmax(np.abs(Vt[i])))
        if Vt[i, j] < 0:
            Vt[i] = -Vt[i]
            U[:, i] = -U[:, i]
    return LatentFactors(X=U * s, Y=Vt, singular_values=s)


def select_rank(
    singular_values: np.ndarray,
    threshold_fraction: float = 0.01,
    cap: int | None = None,
) -> int:
    """Number of singular values at least ``threshold_fraction`` of the top one.

    The result is clamped to ``cap`` when given and is always at least 1.
    """
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError("threshold_fraction must lie in (0, 1)")
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0:
        raise ValueError("empty singular value vector")
    k = int(np.sum(s >= threshold_fraction * s[0]))
    if cap is not None:
        k = min(k, int(cap))
    return max(k, 1)


def infer_latent(Y_observed: np.ndarray, observed_errors: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares latent vector from probed models.

    ``Y_observed`` is (k, |S|): the model features of the probed columns.
    Solves ``Y_observed.T @ x ~= observed_errors`` via the pseudoinverse, so
    rank-deficient probe sets are handled gracefully.
    """
    Y = np.atleast_2d(np.asarray(Y_observed, dtype=float))
    e = np.asarray(observed_errors, dtype=float).ravel()
    if Y.shape[1] != e.size:
        raise ValueError(f"{Y.shape[1]} probe columns vs {e.size} observed errors")
    x, *_ = np.linalg.lstsq(Y.T, e, rcond=None)
    return x


def impute(Y: np.ndarray, x_hat: np.ndarray) -> np.ndarray:
    """Predicted performance of every model: inner products x_hat . y_j."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    x = np.asarray(x_hat, dtype=float).ravel()
    if Y.shape[0] != x.size:
        raise ValueError(f"latent dim {x.size} vs feature rows {Y.shape[0]}")
    return Y.T @ x


@dataclass(frozen=True)
class ImputedVector:
    """A predicted performance vector together with its probe evidence."""

    x_hat: np.ndarray
    e_hat: np.ndarray
    observed_indices: tuple[int, ...]
    observed_values: np.ndarray

    @property
    def e_hat_clamped(self) -> np.ndarray:
        """The predictions clipped into [0, 1]; raw values stay in e_hat."""
        return np.clip(self.e_hat, 0.0, 1.0)


def impute_row(
    Y: np.ndarray, observed_indices, observed_values
) -> ImputedVector:
    """Infer the latent vector from probed columns and impute the full row."""
    idx = tuple(int(j) for j in observed_indices)
    vals = np.asarray(observed_values, dtype=float)
    x_hat = infer_latent(Y[:, list(idx)], vals)
    return ImputedVector(
        x_hat=x_hat,
        e_hat=impute(Y, x_hat),
        observed_indices=idx,
        observed_values=vals,
    )


@dataclass(frozen=True)
class NmfFactors:
    """Nonnegative factors E ~= W @ H plus the objective trace."""

    W: np.ndarray
    H: np.ndarray
    objective_history: np.ndarray

    def model_clusters(self) -> np.ndarray:
        """Cluster of model j: the row of H with the largest entry in column j."""
        return np.argmax(self.H, axis=0)


def nmf(
    matrix: np.ndarray,
    k: int,
    iters: int = 500,
    seed: int = 0,
    init: str = "svd",
    floor: float = 1e-12,
) -> NmfFactors:
    """Multiplicative-update NMF of an entrywise-nonnegative matrix.

    Factors are initialized from the absolute values of the truncated SVD
    (floored at 1e-6) by default, or uniformly at random with ``seed`` when
    ``init='random'``. Entries are floored at ``floor`` after every update so
    zero rows/columns never produce NaNs; the Frobenius objective is recorded
    once per iteration and is nonincreasing up to float noise.
    """
    E = np.asarray(matrix, dtype=float)
    if E.min() < 0:
        raise ValueError("NMF requires an entrywise nonnegative matrix")
    m, n = E.shape
    if not 1 <= k <= min(m, n):
        raise ValueError(f"k={k} outside [1, {min(m, n)}]")
    if init == "svd":
        factors = factorize(E)
        W = np.maximum(np.abs(factors.X[:, :k]), 1e-6)
        H = np.maximum(np.abs(factors.Y[:k, :]), 1e-6)
    elif init == "random":
        rng = np.random.default_rng(seed)
        scale = np.sqrt(E.mean() / max(k, 1) + floor)
        W = rng.uniform(0.1, 1.0, size=(m, k)) * scale
        H = rng.uniform(0.1, 1.0, size=(k, n)) * scale
    else:
        raise ValueError(f"unknown init {init!r}")

    eps = floor
    history = np.empty(iters + 1)
    history[0] = np.linalg.norm(E - W @ H)
    for t in range(iters):
        H *= (W.T @ E) / (W.T @ W @ H + eps)
        np.maximum(H, floor, out=H)
        W *= (E @ H.T) / (W @ (H @ H.T) + eps)
        np.maximum(W, floor, out=W)
        history[t + 1] = np.linalg.norm(E - W @ H)
    return NmfFactors(W=W, H=H, objective_history=history)
