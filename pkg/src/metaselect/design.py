"""Budget-constrained probe selection via optimal experiment design.

The relaxation minimizes a scalarization of the inverse Gram of weighted
model features over the box [0,1]^n intersected with a knapsack constraint
(total predicted runtime, or model count). A Frank-Wolfe solver with exact
line search handles the relaxation; rounding takes the largest weights until
the budget is exceeded. Pivoted QR and a time-constrained random walk serve
as baselines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from metaselect.errors import InfeasibleBudgetError

SCALARIZATIONS = ("D", "A", "E")


@dataclass(frozen=True)
class DesignProblem:
    """Inputs of one probe-selection instance.

    Exactly one of ``time_budget`` (seconds of predicted runtime) and
    ``count_budget`` (number of models) must be set. ``runtimes`` may be
    omitted for count budgets.
    """

    Y: np.ndarray
    runtimes: np.ndarray | None = None
    time_budget: float | None = None
    count_budget: int | None = None
    scalarization: str = "D"

    def __post_init__(self):
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        object.__setattr__(self, "Y", Y)
        if (self.time_budget is None) == (self.count_budget is None):
            raise ValueError("set exactly one of time_budget / count_budget")
        if self.scalarization not in SCALARIZATIONS:
            raise ValueError(f"scalarization must be one of {SCALARIZATIONS}")
        if self.time_budget is not None:
            if self.runtimes is None:
                raise ValueError("time budgets need predicted runtimes")
            t = np.asarray(self.runtimes, dtype=float)
            if t.shape != (Y.shape[1],):
                raise ValueError("runtimes must align with model columns")
            if (t <= 0).any():
                raise ValueError("predicted runtimes must be positive")
            object.__setattr__(self, "runtimes", t)
            if self.time_budget <= 0:
                raise ValueError("time budget must be positive")
        else:
            if self.count_budget < 1:
                raise ValueError("count budget must be at least 1")
            if self.runtimes is not None:
                object.__setattr__(
                    self, "runtimes", np.asarray(self.runtimes, dtype=float)
                )

    @property
    def k(self) -> int:
        return self.Y.shape[0]

    @property
    def n_models(self) -> int:
        return self.Y.shape[1]

    @property
    def feasible(self) -> bool:
        """Whether the cheapest k models fit the budget (count: n >= k)."""
        if self.count_budget is not None:
            return self.n_models >= self.k
        cheapest = np.sort(self.runtimes)[: self.k]
        return float(cheapest.sum()) <= self.time_budget


def gram_regularizer(Y: np.ndarray) -> float:
    """Ridge: 1e-8 times the mean diagonal of the full Gram Y @ Y.T."""
    Y = np.atleast_2d(Y)
    diag_mean = float(np.einsum("ij,ij->", Y, Y)) / Y.shape[0]
    return 1e-8 * max(diag_mean, 1e-300)


def _weighted_gram(Y: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (Y * v) @ Y.T


def design_objective(
    Y: np.ndarray,
    weights_or_indices,
    scalarization: str = "D",
    eps: float | None = None,
) -> float:
    """Scalarized inverse-Gram objective of a weighting or an index set.

    D: log det (G + eps I)^-1, A: trace of the inverse, E: largest eigenvalue
    of the inverse. Smaller is better for all three.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    w = np.asarray(weights_or_indices)
    if w.ndim == 1 and w.size == Y.shape[1] and w.dtype.kind == "f":
        v = w.astype(float)
    else:
        v = np.zeros(Y.shape[1])
        v[np.asarray(weights_or_indices, dtype=int)] = 1.0
    if eps is None:
        eps = gram_regularizer(Y)
    G = _weighted_gram(Y, v) + eps * np.eye(Y.shape[0])
    if scalarization == "D":
        sign, logdet = np.linalg.slogdet(G)
        if sign <= 0:
            raise np.linalg.LinAlgError("regularized Gram not positive definite")
        return -logdet
    eigs = np.linalg.eigvalsh(G)
    if scalarization == "A":
        return float(np.sum(1.0 / eigs))
    if scalarization == "E":
        return float(1.0 / eigs[0])
    raise ValueError(f"scalarization must be one of {SCALARIZATIONS}")


def _objective_and_gradient(Y, v, eps, scalarization):
    k = Y.shape[0]
    G = _weighted_gram(Y, v) + eps * np.eye(k)
    if scalarization == "D":
        sign, logdet = np.linalg.slogdet(G)
        M = np.linalg.inv(G)
        MY = M @ Y
        grad = -np.einsum("ij,ij->j", Y, MY)
        return -logdet, grad
    eigvals, eigvecs = np.linalg.eigh(G)
    if scalarization == "A":
        M2 = eigvecs @ np.diag(1.0 / eigvals**2) @ eigvecs.T
        grad = -np.einsum("ij,ij->j", Y, M2 @ Y)
        return float(np.sum(1.0 / eigvals)), grad
    # E: 1/lambda_min(G); subgradient via the bottom eigenvector.
    u = eigvecs[:, 0]
    lam = eigvals[0]
    grad = -((u @ Y) ** 2) / lam**2
    return float(1.0 / lam), grad


def _linear_oracle(grad, problem: DesignProblem) -> np.ndarray:
    """Minimize grad . s over the box-and-knapsack feasible set."""
    n = grad.size
    s = np.zeros(n)
    if problem.count_budget is not None:
        order = np.lexsort((np.arange(n), grad))
        take = order[: problem.count_budget]
        s[take[grad[take] < 0]] = 1.0
        return s
    t = problem.runtimes
    ratio = grad / t  # most negative first
    order = np.lexsort((np.arange(n), t, ratio))
    remaining = problem.time_budget
    for j in order:
        if grad[j] >= 0 or remaining <= 0:
            break
        if t[j] <= remaining:
            s[j] = 1.0
            remaining -= t[j]
        else:
            s[j] = remaining / t[j]
            break
    return s


def _line_search(Y, v, s, eps, scalarization, bisections: int = 50) -> float:
    """Exact step size on the segment v -> s by bisection on the derivative.

    Works on the k x k Gram matrices so each probe costs O(k^3) regardless
    of the number of models.
    """
    k = Y.shape[0]
    A = _weighted_gram(Y, v) + eps * np.eye(k)
    delta = _weighted_gram(Y, s) - _weighted_gram(Y, v)

    def derivative(gamma):
        G = A + gamma * delta
        if scalarization == "D":
            return -float(np.trace(np.linalg.solve(G, delta)))
        eigvals, eigvecs = np.linalg.eigh(G)
        if scalarization == "A":
            M = eigvecs @ np.diag(1.0 / eigvals) @ eigvecs.T
            return -float(np.trace(M @ delta @ M))
        u = eigvecs[:, 0]
        return -float(u @ delta @ u) / eigvals[0] ** 2

    lo, hi = 0.0, 1.0
    if derivative(1.0) <= 0:
        return 1.0
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        if derivative(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return lo


def solve_relaxation(
    problem: DesignProblem, iters: int = 500, tol: float = 1e-6
) -> np.ndarray:
    """Frank-Wolfe solution of the relaxed design problem.

    Returns weights v in [0,1]^n satisfying the budget. Iterations stop when
    the Frank-Wolfe duality gap certifies the objective is within ``tol`` of
    the relaxation optimum. Raises :class:`InfeasibleBudgetError` when not a
    single model fits a time budget.
    """
    Y = problem.Y
    if problem.time_budget is not None and problem.runtimes.min() > problem.time_budget:
        raise InfeasibleBudgetError(
            f"no model fits the time budget {problem.time_budget:g}s "
            f"(cheapest predicted runtime {problem.runtimes.min():g}s)"
        )
    eps = gram_regularizer(Y)
    scal = problem.scalarization
    _, grad0 = _objective_and_gradient(Y, np.zeros(problem.n_models), eps, scal)
    v = _linear_oracle(grad0, problem)
    for _ in range(iters):
        _, grad = _objective_and_gradient(Y, v, eps, scal)
        s = _linear_oracle(grad, problem)
        gap = float(grad @ (v - s))
        if gap <= tol:
            break
        gamma = _line_search(Y, v, s, eps, scal)
        if gamma <= 0:
            break
        v = v + gamma * (s - v)
        np.clip(v, 0.0, 1.0, out=v)
    return v


def duality_gap(problem: DesignProblem, v: np.ndarray) -> float:
    """Frank-Wolfe gap of v: an upper bound on its suboptimality."""
    eps = gram_regularizer(problem.Y)
    _, grad = _objective_and_gradient(problem.Y, v, eps, problem.scalarization)
    s = _linear_oracle(grad, problem)
    return float(grad @ (v - s))


def round_selection(
    v: np.ndarray,
    runtimes: np.ndarray | None = None,
    time_budget: float | None = None,
    count_budget: int | None = None,
    strict: bool = False,
) -> list[int]:
    """Round relaxed weights to an ordered probe set.

    Indices are taken by decreasing weight (ties: lower runtime, then lower
    index). Count budgets take exactly that many. Time budgets stop at the
    first model whose inclusion pushes the cumulative predicted runtime over
    the budget; that model is kept by default and dropped under ``strict``.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    if (time_budget is None) == (count_budget is None):
        raise ValueError("set exactly one of time_budget / count_budget")
    t = np.ones(n) if runtimes is None else np.asarray(runtimes, dtype=float)
    order = np.lexsort((np.arange(n), t, -v))
    if count_budget is not None:
        if count_budget > n:
            raise ValueError(f"count budget {count_budget} exceeds {n} models")
        return [int(j) for j in order[:count_budget]]
    selected: list[int] = []
    cumulative = 0.0
    for j in order:
        selected.append(int(j))
        cumulative += t[j]
        if cumulative > time_budget:
            if strict:
                selected.pop()
            break
    return selected


def qr_pivot_select(Y: np.ndarray, count: int) -> list[int]:
    """First ``count`` pivot columns of a column-pivoted QR of Y."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if not 1 <= count <= Y.shape[1]:
        raise ValueError(f"count {count} outside [1, {Y.shape[1]}]")
    _, _, piv = scipy.linalg.qr(Y, pivoting=True, mode="economic")
    return [int(j) for j in piv[:count]]


def random_select(
    runtimes: np.ndarray, time_budget: float, seed: int | np.random.Generator = 0
) -> list[int]:
    """Time-constrained random baseline.

    Repeatedly picks uniformly among the not-yet-selected models whose
    predicted runtime fits the remaining budget, until none fits.
    """
    t = np.asarray(runtimes, dtype=float)
    if time_budget <= 0:
        raise ValueError("time budget must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    remaining = float(time_budget)
    available = np.ones(t.size, dtype=bool)
    selected: list[int] = []
    while True:
        fits = np.flatnonzero(available & (t <= remaining))
        if fits.size == 0:
            return selected
        j = int(rng.choice(fits))
        selected.append(j)
        available[j] = False
        remaining -= t[j]


@dataclass(frozen=True)
class SelectionPlan:
    """A solved and rounded probe plan."""

    method: str
    v: np.ndarray
    S: tuple[int, ...]
    predicted_total_time: float
    objective_value: float

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "v": [float(x) for x in self.v],
            "S": list(self.S),
            "predicted_total_time": self.predicted_total_time,
            "objective_value": self.objective_value,
        }


def _complete_rank(Y, selected, problem: DesignProblem, strict: bool) -> list[int]:
    """Ensure the selected columns span as much of the k dims as possible.

    Time budgets append the cheapest rank-increasing model (respecting the
    budget only in strict mode); count budgets swap a redundant low-weight
    member out so the set size is preserved.
    """
    target = min(problem.k, np.linalg.matrix_rank(Y))
    S = list(selected)
    if not S:
        return S

    def rank_of(idxs):
        return np.linalg.matrix_rank(Y[:, idxs]) if idxs else 0

    current = rank_of(S)
    if current >= target:
        return S
    t = problem.runtimes if problem.runtimes is not None else np.ones(problem.n_models)
    others = [j for j in np.lexsort((np.arange(problem.n_models), t)) if j not in S]
    for j in others:
        if current >= target:
            break
        if rank_of(S + [int(j)]) <= current:
            continue
        if problem.count_budget is not None:
            # Swap out the latest-picked member whose removal keeps the rank.
            for pos in range(len(S) - 1, -1, -1):
                rest = S[:pos] + S[pos + 1 :]
                if rank_of(rest) == current:
                    S = rest + [int(j)]
                    current = rank_of(S)
                    break
        else:
            if strict and sum(t[i] for i in S) + t[j] > problem.time_budget:
                continue
            S.append(int(j))
            current = rank_of(S)
    return S


def plan_probes(
    problem: DesignProblem,
    iters: int = 500,
    tol: float = 1e-6,
    strict: bool = False,
    ensure_rank: bool = True,
) -> SelectionPlan:
    """Solve the relaxation, round it, and package the resulting plan."""
    v = solve_relaxation(problem, iters=iters, tol=tol)
    S = round_selection(
        v,
        runtimes=problem.runtimes,
        time_budget=problem.time_budget,
        count_budget=problem.count_budget,
        strict=strict,
    )
    if ensure_rank:
        S = _complete_rank(problem.Y, S, problem, strict)
    t = problem.runtimes
    total = float(sum(t[j] for j in S)) if t is not None else float(len(S))
    method = "ed-time" if problem.time_budget is not None else "ed-number"
    return SelectionPlan(
        method=method,
        v=v,
        S=tuple(S),
        predicted_total_time=total,
        objective_value=design_objective(problem.Y, S, problem.scalarization),
    )
