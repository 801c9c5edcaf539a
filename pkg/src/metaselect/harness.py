"""Evaluation protocols: meta-LOOCV regret, cold start, spectra, clusters.

Every protocol leaves one dataset row out, factorizes the remaining matrix,
selects probes with the method under test, imputes the held-out row from its
probed entries (replayed from the stored matrix), and scores the result.
Outputs are plain dict rows ready for CSV emission.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from metaselect.corpus import Dataset
from metaselect.design import DesignProblem, plan_probes, qr_pivot_select, random_select
from metaselect.factorization import factorize, impute_row, nmf, select_rank
from metaselect.learners.collection import ModelSpec
from metaselect.offline import (
    ErrorMatrix,
    RuntimeMatrix,
    RuntimePredictor,
    fit_runtime,
)
from metaselect.online import Clock, OnlineResult, run_online

FLOAT_FMT = "%.17g"

REGRET_METHODS = ("ed_number", "ed_time", "qr", "random", "oracle")
COLD_START_METHODS = ("ed_D", "ed_A", "ed_E", "regressor_baseline")


def _matrix_values(matrix) -> tuple[np.ndarray, list[str]]:
    if isinstance(matrix, ErrorMatrix):
        return matrix.values, list(matrix.dataset_ids)
    if isinstance(matrix, RuntimeMatrix):
        return matrix.values, list(matrix.dataset_ids)
    values = np.atleast_2d(np.asarray(matrix, dtype=float))
    return values, [str(i) for i in range(values.shape[0])]


@dataclass(frozen=True)
class RegretRecord:
    dataset_id: str
    method: str
    budget_type: str  # "count" | "time"
    budget: float
    seed: int | None
    n_observed: int
    regret: float

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset_id,
            "method": self.method,
            "budget_type": self.budget_type,
            "budget": self.budget,
            "seed": "" if self.seed is None else self.seed,
            "n_observed": self.n_observed,
            "regret": self.regret,
        }


def _loo_runtime_estimates(runtime_values, sizes, held_out: int) -> np.ndarray:
    """Predicted runtimes of every model for the held-out dataset."""
    m, n = runtime_values.shape
    rest = np.arange(m) != held_out
    if sizes is None:
        return np.maximum(runtime_values[rest].mean(axis=0), 1e-12)
    sizes = np.atleast_2d(np.asarray(sizes, dtype=float))
    out = np.empty(n)
    for j in range(n):
        pred = fit_runtime(sizes[rest], runtime_values[rest, j], index=j)
        out[j] = max(pred.predict(sizes[held_out, 0], sizes[held_out, 1]), 1e-12)
    return out


def _choose_probes(
    method: str,
    Y: np.ndarray,
    rank_rule: int,
    budget_type: str,
    budget: float,
    t_hat: np.ndarray,
    rng: np.random.Generator | None,
) -> list[int]:
    n = Y.shape[1]
    if method == "oracle":
        return list(range(n))
    if budget_type == "count":
        N = int(budget)
        k_sel = min(rank_rule, N)
        Yk = Y[:k_sel]
        if method == "ed_number":
            return list(plan_probes(DesignProblem(Y=Yk, count_budget=N)).S)
        if method == "qr":
            return qr_pivot_select(Yk, N)
        if method == "random":
            return [int(j) for j in rng.choice(n, size=min(N, n), replace=False)]
        raise ValueError(f"method {method!r} unsupported for count budgets")
    Yk = Y[:rank_rule]
    if method == "ed_time":
        problem = DesignProblem(Y=Yk, runtimes=t_hat, time_budget=float(budget))
        return list(plan_probes(problem).S)
    if method == "random":
        return random_select(t_hat, float(budget), seed=rng)
    raise ValueError(f"method {method!r} unsupported for time budgets")


def _impute_heldout(Y: np.ndarray, rank_rule: int, S, true_row: np.ndarray) -> np.ndarray:
    """Infer with rank adapted to the observation count, capped by the rule."""
    k_inf = max(1, min(rank_rule, len(S)))
    return impute_row(Y[:k_inf], S, true_row[list(S)]).e_hat


def meta_loocv_regret(
    error_matrix,
    methods=("ed_number", "qr", "random"),
    count_budgets=(),
    time_budgets=(),
    runtime_matrix=None,
    sizes=None,
    seeds=range(20),
    rank_threshold: float = 0.01,
    rank_cap: int | None = None,
) -> list[RegretRecord]:
    """Leave-one-dataset-out regret of each selection method at each budget.

    The held-out row is excluded from factorization and from runtime-predictor
    fitting; its probed entries are replayed from the stored matrix. For the
    design/QR methods the chosen model is the argmin of the imputed vector
    (that is the engine's mechanism); the random baseline instead returns the
    best model it actually observed, since it has no inference step of its
    own. Regret is the chosen model's true error minus the row minimum.
    Deterministic methods yield one record per (row, budget); the random
    baseline yields one per seed.
    """
    E, dataset_ids = _matrix_values(error_matrix)
    T = None
    if runtime_matrix is not None:
        T, _ = _matrix_values(runtime_matrix)
    m, n = E.shape
    needs_time = bool(time_budgets)
    records: list[RegretRecord] = []
    for i in range(m):
        rest = np.delete(E, i, axis=0)
        factors = factorize(rest)
        rank_rule = select_rank(factors.singular_values, rank_threshold, cap=rank_cap)
        true_row = E[i]
        if needs_time or "ed_time" in methods:
            t_hat = (
                _loo_runtime_estimates(T, sizes, i)
                if T is not None
                else np.ones(n)
            )
        else:
            t_hat = np.ones(n)
        minimum = float(true_row.min())
        jobs = [("count", float(b)) for b in count_budgets]
        jobs += [("time", float(b)) for b in time_budgets]
        for budget_type, budget in jobs:
            for method in methods:
                if method == "random":
                    seed_list = list(seeds)
                elif method == "ed_time" and budget_type == "count":
                    continue
                elif method in ("ed_number", "qr") and budget_type == "time":
                    continue
                else:
                    seed_list = [None]
                for seed in seed_list:
                    rng = (
                        np.random.default_rng([seed, i]) if seed is not None else None
                    )
                    S = _choose_probes(
                        method, factors.Y, rank_rule, budget_type, budget, t_hat, rng
                    )
                    if not S:
                        regret = float(true_row.max() - minimum)
                        records.append(
                            RegretRecord(
                                dataset_ids[i], method, budget_type, budget, seed, 0, regret
                            )
                        )
                        continue
                    if method in ("random", "oracle"):
                        pick = int(S[np.argmin(true_row[S])])
                    else:
                        e_hat = _impute_heldout(factors.Y, rank_rule, S, true_row)
                        pick = int(np.lexsort((np.arange(n), e_hat))[0])
                    records.append(
                        RegretRecord(
                            dataset_ids[i],
                            method,
                            budget_type,
                            budget,
                            seed,
                            len(S),
                            float(true_row[pick] - minimum),
                        )
                    )
    return records


def summarize_regret(records: list[RegretRecord]) -> list[dict]:
    """Median and quartiles per (method, budget); seeded methods aggregate
    per-seed medians by their mean."""
    groups: dict[tuple, list[RegretRecord]] = {}
    for rec in records:
        groups.setdefault((rec.method, rec.budget_type, rec.budget), []).append(rec)
    rows = []
    for (method, budget_type, budget), recs in sorted(groups.items()):
        seeds = {r.seed for r in recs}
        if seeds == {None}:
            values = np.array([r.regret for r in recs])
            median = float(np.median(values))
            q25, q75 = (float(q) for q in np.percentile(values, [25, 75]))
        else:
            per_seed = []
            for s in sorted(s for s in seeds if s is not None):
                vals = np.array([r.regret for r in recs if r.seed == s])
                per_seed.append(
                    (np.median(vals), *np.percentile(vals, [25, 75]))
                )
            per_seed = np.array(per_seed)
            median, q25, q75 = (float(x) for x in per_seed.mean(axis=0))
        rows.append(
            {
                "method": method,
                "budget_type": budget_type,
                "budget": budget,
                "median_regret": median,
                "q25": q25,
                "q75": q75,
                "n_records": len(recs),
            }
        )
    return rows


def rank_curve(records: list[RegretRecord]) -> list[dict]:
    """Average relative rank of each method per budget (1 is best).

    Seeded methods enter with their per-dataset mean regret; ties share the
    mean rank.
    """
    per_cell: dict[tuple, dict[str, list[float]]] = {}
    methods_by_type: dict[str, set] = {}
    for rec in records:
        cell = per_cell.setdefault((rec.dataset_id, rec.budget_type, rec.budget), {})
        cell.setdefault(rec.method, []).append(rec.regret)
        methods_by_type.setdefault(rec.budget_type, set()).add(rec.method)
    sums: dict[tuple, np.ndarray] = {}
    counts: dict[tuple, int] = {}
    for (dataset, budget_type, budget), cell in per_cell.items():
        methods = sorted(methods_by_type[budget_type])
        if set(cell) != set(methods):
            raise ValueError(
                f"dataset {dataset}: methods {sorted(cell)} != {methods} "
                f"at budget {budget}"
            )
        regrets = np.array([np.mean(cell[m]) for m in methods])
        ranks = rankdata(regrets, method="average")
        key = (budget_type, budget)
        sums[key] = sums.get(key, np.zeros(len(methods))) + ranks
        counts[key] = counts.get(key, 0) + 1
    rows = []
    for key in sorted(sums):
        methods = sorted(methods_by_type[key[0]])
        avg = sums[key] / counts[key]
        for method, rank in zip(methods, avg):
            rows.append(
                {
                    "budget_type": key[0],
                    "budget": key[1],
                    "method": method,
                    "average_rank": float(rank),
                }
            )
    return rows


@dataclass(frozen=True)
class ColdStartRecord:
    dataset_id: str
    method: str
    relative_rmse: float
    best_model_hit: bool
    top_overlap: float
    n_observed: int

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset_id,
            "method": self.method,
            "relative_rmse": self.relative_rmse,
            "best_model_hit": int(self.best_model_hit),
            "top_overlap": self.top_overlap,
            "n_observed": self.n_observed,
        }


def cold_start_compare(
    error_matrix,
    methods=COLD_START_METHODS,
    probe_budget_seconds: float = 4.0,
    rank_threshold: float = 0.01,
    runtime_matrix=None,
    sizes=None,
    top_h: int = 5,
    n_neighbor_rows: int = 5,
) -> list[ColdStartRecord]:
    """Leave-one-out comparison of cold-start imputation methods.

    The ED variants differ in the covariance scalarization steering probe
    selection. The regressor baseline reuses the D-design probe set but
    imputes the row as the average of its nearest rows in observed-entry
    space (a self-contained stand-in for an external nonlinear regressor).
    """
    E, dataset_ids = _matrix_values(error_matrix)
    T = None
    if runtime_matrix is not None:
        T, _ = _matrix_values(runtime_matrix)
    m, n = E.shape
    records: list[ColdStartRecord] = []
    for i in range(m):
        rest = np.delete(E, i, axis=0)
        factors = factorize(rest)
        k = select_rank(factors.singular_values, rank_threshold)
        Yk = factors.Y[:k]
        t_hat = _loo_runtime_estimates(T, sizes, i) if T is not None else np.ones(n)
        true_row = E[i]
        best_true = int(np.lexsort((np.arange(n), true_row))[0])
        top_true = set(np.lexsort((np.arange(n), true_row))[:top_h].tolist())
        norm = max(float(np.linalg.norm(true_row)), 1e-300)
        probe_cache: dict[str, list[int]] = {}

        def evaluate(method: str, S: list[int], e_hat: np.ndarray):
            pick = int(np.lexsort((np.arange(n), e_hat))[0])
            top_pred = set(np.lexsort((np.arange(n), e_hat))[:top_h].tolist())
            records.append(
                ColdStartRecord(
                    dataset_id=dataset_ids[i],
                    method=method,
                    relative_rmse=float(np.linalg.norm(true_row - e_hat)) / norm,
                    best_model_hit=pick == best_true,
                    top_overlap=len(top_true & top_pred) / top_h,
                    n_observed=len(S),
                )
            )

        for method in methods:
            if method.startswith("ed_"):
                scal = method.split("_", 1)[1]
                problem = DesignProblem(
                    Y=Yk,
                    runtimes=t_hat,
                    time_budget=probe_budget_seconds,
                    scalarization=scal,
                )
                S = list(plan_probes(problem).S)
                probe_cache[method] = S
                if not S:
                    evaluate(method, S, np.full(n, true_row.mean()))
                    continue
                imp = impute_row(Yk[:, :], S, true_row[S])
                evaluate(method, S, imp.e_hat)
            elif method == "regressor_baseline":
                S = probe_cache.get("ed_D")
                if S is None:
                    problem = DesignProblem(
                        Y=Yk, runtimes=t_hat, time_budget=probe_budget_seconds
                    )
                    S = list(plan_probes(problem).S)
                if not S:
                    evaluate(method, S, np.full(n, true_row.mean()))
                    continue
                dists = np.linalg.norm(rest[:, S] - true_row[S], axis=1)
                nearest = np.argsort(dists, kind="stable")[: min(n_neighbor_rows, m - 1)]
                evaluate(method, S, rest[nearest].mean(axis=0))
            else:
                raise ValueError(f"unknown cold-start method {method!r}")
    return records


def spectrum_report(error_matrix) -> tuple[list[dict], dict[float, int]]:
    """Singular values with their ratio to the top one, plus threshold counts."""
    E, _ = _matrix_values(error_matrix)
    s = np.linalg.svd(E, compute_uv=False)
    top = s[0] if s[0] > 0 else 1.0
    rows = [
        {"index": idx, "sigma": float(val), "ratio": float(val / top)}
        for idx, val in enumerate(s, start=1)
    ]
    counts = {
        threshold: int(np.sum(s >= threshold * s[0]))
        for threshold in (0.01, 0.03)
    }
    return rows, counts


def nmf_cluster_report(
    error_matrix,
    k: int,
    families: list[str],
    iters: int = 500,
    seed: int = 0,
) -> dict:
    """Cluster models by their largest NMF coefficient; count per family.

    Also reports the family entropy (natural log) of each cluster for the
    sparsity-of-algorithm-types reading; entropy 0 means a pure cluster.
    """
    E, _ = _matrix_values(error_matrix)
    if len(families) != E.shape[1]:
        raise ValueError("families must align with matrix columns")
    shift = min(0.0, float(E.min()))
    factors = nmf(E - shift, k=k, iters=iters, seed=seed)
    clusters = factors.model_clusters()
    family_order = list(dict.fromkeys(families))
    counts = np.zeros((len(family_order), k), dtype=int)
    for fam, cl in zip(families, clusters):
        counts[family_order.index(fam), cl] += 1
    entropies = []
    for cl in range(k):
        col = counts[:, cl]
        total = col.sum()
        if total == 0:
            entropies.append(0.0)
            continue
        p = col[col > 0] / total
        entropies.append(float(-(p * np.log(p)).sum()))
    return {
        "k": k,
        "families": family_order,
        "assignments": [int(c) for c in clusters],
        "counts": counts,
        "cluster_entropy": entropies,
        "objective_history": factors.objective_history,
    }


def ensemble_size_histogram(sizes) -> tuple[dict[int, int], float]:
    """Histogram of distinct-member ensemble sizes and the <=5 fraction."""
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise ValueError("no ensemble sizes supplied")
    bins: dict[int, int] = {}
    for s in sizes:
        bins[s] = bins.get(s, 0) + 1
    small = sum(c for s, c in bins.items() if s <= 5) / len(sizes)
    return dict(sorted(bins.items())), small


def run_corpus_online(
    corpus: list[Dataset],
    factors,
    runtime_predictors: list[RuntimePredictor],
    collection: list[ModelSpec],
    budget_fraction: float = 0.5,
    n_best: int = 5,
    seed: int = 0,
    strict_budget: bool = False,
) -> list[OnlineResult]:
    """Run the online stage on every corpus dataset under a virtual clock.

    Each dataset's budget is ``budget_fraction`` of the total predicted time
    of the whole collection on it, so the schedule has room for a few rounds.
    """
    by_index = {p.index: p for p in runtime_predictors}
    results = []
    for dataset in corpus:
        t_hat = np.array(
            [
                max(by_index[s.index].predict(dataset.n_points, dataset.p_features), 1e-12)
                for s in collection
            ]
        )
        budget = float(budget_fraction * t_hat.sum())
        results.append(
            run_online(
                factors,
                runtime_predictors,
                collection,
                dataset,
                budget,
                n_best=n_best,
                clock=Clock("virtual"),
                seed=seed,
                strict_budget=strict_budget,
            )
        )
    return results


# ---------------------------------------------------------------------------
# CSV / manifest emission


def write_csv(path, header: list[str], rows: list[dict]) -> None:
    """Locale-independent CSV with 17-significant-digit floats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            out = []
            for key in header:
                val = row[key]
                if isinstance(val, float):
                    out.append(FLOAT_FMT % val)
                else:
                    out.append(str(val))
            writer.writerow(out)


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, config: dict, input_paths: list) -> None:
    """Record the resolved config and content hashes of every input file."""
    manifest = {
        "config": config,
        "inputs": {
            str(p): sha256_file(p) for p in input_paths if Path(p).exists()
        },
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
