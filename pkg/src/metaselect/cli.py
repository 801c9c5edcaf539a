"""Command-line interface: gen-corpus, offline, fit, and report.

Exit codes: 0 success, 2 usage error, 3 input error, 4 internal contract
violation. The OBOE_OUT environment variable, when set, is prepended to
relative output paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from metaselect import harness, synth
from metaselect.corpus import load_dataset, load_manifest
from metaselect.errors import (
    ContractViolationError,
    InfeasibleBudgetError,
    InsufficientDataError,
    MalformedInputError,
    MetaselectError,
    UnusableDatasetError,
)
from metaselect.factorization import factorize, select_rank
from metaselect.learners.collection import (
    default_collection,
    load_collection,
    save_collection,
)
from metaselect.learners.metrics import balanced_error_rate
from metaselect.offline import (
    FLOAT_FMT,
    build_matrices,
    fit_all_runtime_predictors,
    load_error_matrix,
    load_runtime_matrix,
    load_runtime_predictors,
    runtime_accuracy_report,
    save_error_matrix,
    save_runtime_matrix,
    save_runtime_predictors,
    RuntimeMatrix,
)
from metaselect.online import Clock, run_online

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_INTERNAL = 4


def resolve_out(path: str) -> Path:
    root = os.environ.get("OBOE_OUT")
    p = Path(path)
    if root and not p.is_absolute():
        p = Path(root) / p
    p.mkdir(parents=True, exist_ok=True)
    return p


def _guard_outputs(paths: list[Path], force: bool) -> None:
    existing = [str(p) for p in paths if p.exists()]
    if existing and not force:
        raise MalformedInputError(
            "refusing to overwrite existing outputs (pass --force): "
            + ", ".join(existing)
        )


def _write_jsonl(path: Path, records: list[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")


def _load_offline(offline_dir: str):
    d = Path(offline_dir)
    error_matrix = load_error_matrix(d / "error_matrix.csv", d / "failure_mask.csv")
    runtime_matrix = load_runtime_matrix(d / "runtime_matrix.csv")
    predictors = load_runtime_predictors(d / "runtime_predictors.json")
    collection = load_collection(d / "collection.json")
    sizes_path = d / "sizes.csv"
    sizes = None
    if sizes_path.exists():
        rows = [
            line.strip().split(",")
            for line in sizes_path.read_text().strip().splitlines()[1:]
        ]
        sizes = np.array([[float(r[1]), float(r[2])] for r in rows])
    return error_matrix, runtime_matrix, predictors, collection, sizes


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_corpus(args) -> int:
    out = resolve_out(args.out)
    manifest = synth.write_corpus(out, count=args.count, seed=args.seed)
    print(f"wrote {args.count} datasets and {manifest}")
    return EXIT_OK


def cmd_offline(args) -> int:
    out = resolve_out(args.out)
    targets = [
        out / "error_matrix.csv",
        out / "runtime_matrix.csv",
        out / "failure_mask.csv",
        out / "runtime_predictors.json",
        out / "collection.json",
        out / "sizes.csv",
        out / "manifest.json",
    ]
    _guard_outputs(targets, args.force)

    manifest_path = Path(args.manifest)
    corpus = []
    with open(manifest_path) as fh:
        records = json.load(fh)
    for rec in records:
        ds_path = Path(rec["path"])
        if not ds_path.is_absolute():
            ds_path = manifest_path.parent / ds_path
        try:
            corpus.append(load_dataset(ds_path, name=rec.get("name")))
        except (MalformedInputError, UnusableDatasetError) as exc:
            if args.strict:
                raise
            print(f"warning: skipping {ds_path}: {exc}", file=sys.stderr)
    if not corpus:
        raise MalformedInputError(f"{manifest_path}: no usable datasets")

    collection = default_collection(args.collection)
    error_matrix, runtime_matrix = build_matrices(
        corpus, collection, n_folds=args.folds, seed=args.seed, jobs=args.jobs
    )
    if args.virtual_times:
        replay_path = args.virtual_times
        replay_path = replay_path[5:] if replay_path.startswith("from:") else replay_path
        replay = load_runtime_matrix(replay_path)
        if replay.dataset_ids != runtime_matrix.dataset_ids or replay.model_ids != runtime_matrix.model_ids:
            raise MalformedInputError(
                f"{replay_path}: dataset/model ids do not match this corpus"
            )
        runtime_matrix = replay

    sizes = np.array([[d.n_points, d.p_features] for d in corpus], dtype=float)
    predictors = fit_all_runtime_predictors(runtime_matrix, sizes)

    save_error_matrix(error_matrix, targets[0], mask_path=targets[2])
    save_runtime_matrix(runtime_matrix, targets[1])
    save_runtime_predictors(predictors, targets[3])
    save_collection(collection, targets[4])
    with open(targets[5], "w") as fh:
        fh.write("dataset,n_points,p_features\n")
        for d in corpus:
            fh.write(f"{d.name},{d.n_points},{d.p_features}\n")
    harness.write_manifest(
        targets[6],
        {
            "command": "offline",
            "collection": args.collection,
            "folds": args.folds,
            "seed": args.seed,
            "jobs": args.jobs,
            "virtual_times": args.virtual_times,
        },
        [manifest_path],
    )
    n_failures = int(error_matrix.failure_mask.sum())
    print(
        f"offline: {len(corpus)} datasets x {len(collection)} models, "
        f"{n_failures} failed cells -> {out}"
    )
    return EXIT_OK


def cmd_fit(args) -> int:
    out = resolve_out(args.out)
    targets = [out / "round_log.jsonl", out / "ensemble.json", out / "metrics.json"]
    _guard_outputs(targets, args.force)

    error_matrix, _, predictors, collection, _ = _load_offline(args.offline)
    dataset = load_dataset(
        args.dataset,
        has_header=args.has_header,
        label_col=args.label_col,
        standardize_features=not args.leakage_free,
    )
    factors = factorize(error_matrix.values)
    result = run_online(
        factors,
        predictors,
        collection,
        dataset,
        args.budget,
        initial_time_target=args.target0,
        initial_rank=args.rank0,
        n_best=args.n_best,
        clock=Clock(args.clock),
        seed=args.seed,
        strict_budget=args.strict_budget,
        fresh_rounds=args.fresh_rounds,
        leakage_free=args.leakage_free,
    )

    _write_jsonl(targets[0], result.round_log())
    ensemble_doc = {
        "no_model": result.no_model,
        "dataset": dataset.name,
        "ensemble": None if result.no_model else result.ensemble.to_dict(),
        "members": []
        if result.no_model
        else [collection[j].to_dict() for j in result.ensemble.model_indices],
    }
    with open(targets[1], "w") as fh:
        json.dump(ensemble_doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    train_error = balanced_error_rate(
        result.train.labels,
        result.predictor.predict(result.train.features),
        result.train.n_classes,
    )
    metrics = {
        "train_error": train_error,
        "validation_error": result.validation_error,
        "test_error": result.test_error,
        "rounds": len(result.rounds),
        "no_model": result.no_model,
    }
    with open(targets[2], "w") as fh:
        json.dump(metrics, fh, indent=1, sort_keys=True)
        fh.write("\n")
    flag = " (no_model fallback)" if result.no_model else ""
    print(
        f"fit: {len(result.rounds)} rounds, validation BER "
        f"{result.validation_error:.4f}, test BER {result.test_error:.4f}{flag}"
    )
    return EXIT_OK


def _report_spectrum(args, out: Path) -> None:
    error_matrix = load_error_matrix(args.matrix)
    rows, counts = harness.spectrum_report(error_matrix)
    _guard_outputs([out / "spectrum.csv", out / "spectrum_counts.csv"], args.force)
    harness.write_csv(out / "spectrum.csv", ["index", "sigma", "ratio"], rows)
    harness.write_csv(
        out / "spectrum_counts.csv",
        ["threshold", "count"],
        [{"threshold": t, "count": c} for t, c in sorted(counts.items())],
    )


def _report_nmf(args, out: Path) -> None:
    error_matrix = load_error_matrix(args.matrix)
    collection = load_collection(args.collection)
    families = [s.algorithm for s in collection]
    sigma = np.linalg.svd(error_matrix.values, compute_uv=False)
    k = args.rank if args.rank else select_rank(sigma, args.rank_threshold)
    report = harness.nmf_cluster_report(
        error_matrix, k=k, families=families, iters=args.iters, seed=args.seed
    )
    _guard_outputs([out / "nmf_clusters.csv", out / "nmf_counts.csv"], args.force)
    harness.write_csv(
        out / "nmf_clusters.csv",
        ["model_index", "family", "cluster"],
        [
            {
                "model_index": j,
                "family": families[col],
                "cluster": report["assignments"][col],
            }
            for col, j in enumerate(error_matrix.model_ids)
        ],
    )
    count_rows = []
    for fi, fam in enumerate(report["families"]):
        for cl in range(report["k"]):
            count_rows.append(
                {
                    "family": fam,
                    "cluster": cl,
                    "count": int(report["counts"][fi, cl]),
                    "cluster_entropy": report["cluster_entropy"][cl],
                }
            )
    harness.write_csv(
        out / "nmf_counts.csv",
        ["family", "cluster", "count", "cluster_entropy"],
        count_rows,
    )


def _parse_budget_list(text: str) -> list[float]:
    if not text:
        return []
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if "-" in tok and not tok.startswith("-"):
            lo, hi = tok.split("-", 1)
            out.extend(float(x) for x in range(int(lo), int(hi) + 1))
        elif tok:
            out.append(float(tok))
    return out


def _report_regret(args, out: Path) -> None:
    error_matrix, runtime_matrix, _, _, sizes = _load_offline(args.offline)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    records = harness.meta_loocv_regret(
        error_matrix,
        methods=methods,
        count_budgets=_parse_budget_list(args.count_budgets),
        time_budgets=_parse_budget_list(args.time_budgets),
        runtime_matrix=runtime_matrix,
        sizes=sizes,
        seeds=range(args.seeds),
        rank_threshold=args.rank_threshold,
    )
    _guard_outputs(
        [out / "regret_records.csv", out / "regret_summary.csv", out / "rank_curve.csv"],
        args.force,
    )
    harness.write_csv(
        out / "regret_records.csv",
        ["dataset", "method", "budget_type", "budget", "seed", "n_observed", "regret"],
        [r.to_dict() for r in records],
    )
    harness.write_csv(
        out / "regret_summary.csv",
        ["method", "budget_type", "budget", "median_regret", "q25", "q75", "n_records"],
        harness.summarize_regret(records),
    )
    harness.write_csv(
        out / "rank_curve.csv",
        ["budget_type", "budget", "method", "average_rank"],
        harness.rank_curve(records),
    )


def _report_coldstart(args, out: Path) -> None:
    error_matrix, runtime_matrix, _, _, sizes = _load_offline(args.offline)
    records = harness.cold_start_compare(
        error_matrix,
        probe_budget_seconds=args.budget_seconds,
        rank_threshold=args.rank_threshold,
        runtime_matrix=runtime_matrix,
        sizes=sizes,
        top_h=args.top_h,
    )
    _guard_outputs([out / "coldstart.csv"], args.force)
    harness.write_csv(
        out / "coldstart.csv",
        ["dataset", "method", "relative_rmse", "best_model_hit", "top_overlap", "n_observed"],
        [r.to_dict() for r in records],
    )


def _report_runtime_accuracy(args, out: Path) -> None:
    _, runtime_matrix, _, collection, sizes = _load_offline(args.offline)
    if sizes is None:
        raise MalformedInputError(f"{args.offline}/sizes.csv is required")
    rows = runtime_accuracy_report(
        runtime_matrix, sizes, [s.algorithm for s in collection]
    )
    _guard_outputs([out / "runtime_accuracy.csv"], args.force)
    harness.write_csv(
        out / "runtime_accuracy.csv",
        ["family", "n_cells", "within_factor_2", "within_factor_4"],
        rows,
    )


def _report_ensemble_size(args, out: Path) -> None:
    _guard_outputs([out / "ensemble_sizes.csv", out / "online_runs.jsonl"], args.force)
    if args.runs:
        sizes = []
        with open(args.runs) as fh:
            for line in fh:
                rec = json.loads(line)
                if rec.get("ensemble"):
                    sizes.append(len(rec["ensemble"]["members"]))
        run_records = None
    else:
        error_matrix, _, predictors, collection, _ = _load_offline(args.offline)
        manifest = Path(args.corpus)
        corpus = load_manifest(manifest)
        factors = factorize(error_matrix.values)
        results = harness.run_corpus_online(
            corpus,
            factors,
            predictors,
            collection,
            budget_fraction=args.budget_fraction,
            seed=args.seed,
        )
        sizes = [
            r.ensemble.distinct_size for r in results if r.ensemble is not None
        ]
        run_records = [
            {
                "dataset": r.train.name.split(":")[0],
                "no_model": r.no_model,
                "validation_error": r.validation_error,
                "test_error": r.test_error,
                "ensemble": None if r.no_model else r.ensemble.to_dict(),
            }
            for r in results
        ]
    bins, small_fraction = harness.ensemble_size_histogram(sizes)
    harness.write_csv(
        out / "ensemble_sizes.csv",
        ["size", "count"],
        [{"size": s, "count": c} for s, c in bins.items()],
    )
    if run_records is not None:
        _write_jsonl(out / "online_runs.jsonl", run_records)
    print(f"ensemble sizes: {bins}; fraction with <=5 members: {small_fraction:.3f}")


def cmd_report(args) -> int:
    out = resolve_out(args.out)
    dispatch = {
        "spectrum": _report_spectrum,
        "nmf": _report_nmf,
        "regret": _report_regret,
        "coldstart": _report_coldstart,
        "runtime-accuracy": _report_runtime_accuracy,
        "ensemble-size": _report_ensemble_size,
    }
    dispatch[args.kind](args, out)
    print(f"report {args.kind} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metaselect",
        description="Time-constrained model selection from an error matrix.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-corpus", help="generate the bundled synthetic corpus")
    g.add_argument("--out", required=True)
    g.add_argument("--count", type=int, default=20)
    g.add_argument("--seed", type=int, default=7)
    g.set_defaults(func=cmd_gen_corpus)

    o = sub.add_parser("offline", help="build error/runtime matrices and predictors")
    o.add_argument("--manifest", required=True)
    o.add_argument("--collection", choices=["small", "full"], default="small")
    o.add_argument("--out", required=True)
    o.add_argument("--folds", type=int, default=5)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--jobs", type=int, default=1)
    o.add_argument(
        "--virtual-times",
        default=None,
        help="replay runtimes from an existing runtime_matrix.csv (accepts from:PATH)",
    )
    o.add_argument("--strict", action="store_true", help="fail on dataset load errors")
    o.add_argument("--force", action="store_true")
    o.set_defaults(func=cmd_offline)

    f = sub.add_parser("fit", help="run the online stage on one dataset")
    f.add_argument("--offline", required=True, help="directory written by offline")
    f.add_argument("--dataset", required=True)
    f.add_argument("--budget", type=float, required=True, help="total time budget (s)")
    f.add_argument("--target0", type=float, default=None, help="initial time target")
    f.add_argument("--rank0", type=int, default=None, help="initial rank")
    f.add_argument("--n-best", type=int, default=5)
    f.add_argument("--clock", choices=["virtual", "wall"], default="virtual")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--strict-budget", action="store_true")
    f.add_argument("--fresh-rounds", action="store_true")
    f.add_argument(
        "--whole-data-preprocessing",
        dest="leakage_free",
        action="store_false",
        help="standardize with whole-dataset statistics before splitting",
    )
    f.add_argument("--has-header", action="store_true")
    f.add_argument("--label-col", type=int, default=-1)
    f.add_argument("--out", required=True)
    f.add_argument("--force", action="store_true")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("report", help="emit CSV reports")
    r.add_argument(
        "kind",
        choices=["spectrum", "nmf", "regret", "coldstart", "runtime-accuracy", "ensemble-size"],
    )
    r.add_argument("--out", required=True)
    r.add_argument("--force", action="store_true")
    r.add_argument("--matrix", help="error matrix CSV (spectrum, nmf)")
    r.add_argument("--collection", help="collection JSON (nmf)")
    r.add_argument("--offline", help="offline directory (regret, coldstart, runtime-accuracy, ensemble-size)")
    r.add_argument("--corpus", help="corpus manifest (ensemble-size)")
    r.add_argument("--runs", help="existing online_runs.jsonl (ensemble-size)")
    r.add_argument("--methods", default="ed_number,qr,random")
    r.add_argument("--count-budgets", default="", help="e.g. 1-10 or 1,2,5")
    r.add_argument("--time-budgets", default="", help="e.g. 0.5,1,2 (seconds)")
    r.add_argument("--seeds", type=int, default=20)
    r.add_argument("--rank-threshold", type=float, default=0.01)
    r.add_argument("--rank", type=int, default=None, help="override NMF rank")
    r.add_argument("--iters", type=int, default=500)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--budget-seconds", type=float, default=4.0)
    r.add_argument("--budget-fraction", type=float, default=0.5)
    r.add_argument("--top-h", type=int, default=5)
    r.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MalformedInputError, UnusableDatasetError, InsufficientDataError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, InfeasibleBudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ContractViolationError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except MetaselectError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
