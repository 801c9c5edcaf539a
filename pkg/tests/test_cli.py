import json
import os
from pathlib import Path

import numpy as np
import pytest

from metaselect.cli import main
from metaselect.offline import ErrorMatrix, save_error_matrix


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """gen-corpus + offline, shared by the report tests."""
    root = tmp_path_factory.mktemp("cli")
    corpus_dir = root / "corpus"
    offline_dir = root / "offline"
    assert main(["gen-corpus", "--out", str(corpus_dir), "--count", "4", "--seed", "11"]) == 0
    assert (
        main(
            [
                "offline",
                "--manifest",
                str(corpus_dir / "manifest.json"),
                "--collection",
                "small",
                "--out",
                str(offline_dir),
                "--seed",
                "3",
            ]
        )
        == 0
    )
    return {"root": root, "corpus": corpus_dir, "offline": offline_dir}


class TestGenCorpus:
    def test_writes_manifest_and_files(self, tmp_path):
        out = tmp_path / "c"
        assert main(["gen-corpus", "--out", str(out), "--count", "3", "--seed", "1"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest) == 3
        for rec in manifest:
            assert (out / rec["path"]).exists()


class TestOffline:
    def test_outputs_exist(self, pipeline):
        off = pipeline["offline"]
        for name in (
            "error_matrix.csv",
            "runtime_matrix.csv",
            "failure_mask.csv",
            "runtime_predictors.json",
            "collection.json",
            "sizes.csv",
            "manifest.json",
        ):
            assert (off / name).exists()

    def test_refuses_overwrite_without_force(self, pipeline):
        code = main(
            [
                "offline",
                "--manifest",
                str(pipeline["corpus"] / "manifest.json"),
                "--out",
                str(pipeline["offline"]),
            ]
        )
        assert code == 3

    def test_rerun_is_error_deterministic_and_replay_fixes_times(self, pipeline, tmp_path):
        corpus = pipeline["corpus"]
        first = pipeline["offline"]
        second = tmp_path / "again"
        assert (
            main(
                [
                    "offline",
                    "--manifest",
                    str(corpus / "manifest.json"),
                    "--out",
                    str(second),
                    "--seed",
                    "3",
                    "--virtual-times",
                    f"from:{first / 'runtime_matrix.csv'}",
                ]
            )
            == 0
        )
        assert (second / "error_matrix.csv").read_bytes() == (
            first / "error_matrix.csv"
        ).read_bytes()
        assert (second / "runtime_matrix.csv").read_bytes() == (
            first / "runtime_matrix.csv"
        ).read_bytes()


class TestFit:
    def _budget(self, pipeline):
        text = (pipeline["offline"] / "runtime_matrix.csv").read_text().splitlines()[1:]
        total = sum(sum(float(x) for x in line.split(",")[1:]) for line in text)
        return total / len(text) / 2  # half the mean per-dataset total

    def test_fit_writes_artifacts(self, pipeline, tmp_path):
        out = tmp_path / "fit"
        dataset = json.loads((pipeline["corpus"] / "manifest.json").read_text())[0]
        code = main(
            [
                "fit",
                "--offline",
                str(pipeline["offline"]),
                "--dataset",
                str(pipeline["corpus"] / dataset["path"]),
                "--budget",
                str(self._budget(pipeline)),
                "--clock",
                "virtual",
                "--seed",
                "5",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert set(metrics) >= {"train_error", "validation_error", "test_error", "no_model"}
        log_lines = (out / "round_log.jsonl").read_text().strip().splitlines()
        assert log_lines
        record = json.loads(log_lines[0])
        assert {"round", "k", "time_target", "S", "e_S", "T_best"} <= set(record)

    def test_virtual_fit_is_bit_reproducible(self, pipeline, tmp_path):
        dataset = json.loads((pipeline["corpus"] / "manifest.json").read_text())[1]
        args = [
            "fit",
            "--offline",
            str(pipeline["offline"]),
            "--dataset",
            str(pipeline["corpus"] / dataset["path"]),
            "--budget",
            str(self._budget(pipeline)),
            "--clock",
            "virtual",
            "--seed",
            "9",
        ]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert (out1 / "round_log.jsonl").read_bytes() == (out2 / "round_log.jsonl").read_bytes()
        assert (out1 / "ensemble.json").read_bytes() == (out2 / "ensemble.json").read_bytes()

    def test_tiny_budget_yields_no_model_fallback_with_exit_zero(self, pipeline, tmp_path):
        dataset = json.loads((pipeline["corpus"] / "manifest.json").read_text())[0]
        out = tmp_path / "fallback"
        code = main(
            [
                "fit",
                "--offline",
                str(pipeline["offline"]),
                "--dataset",
                str(pipeline["corpus"] / dataset["path"]),
                "--budget",
                "1e-6",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        doc = json.loads((out / "ensemble.json").read_text())
        assert doc["no_model"] is True


class TestReports:
    def test_spectrum_on_rank_one_matrix(self, tmp_path):
        E = ErrorMatrix(
            np.outer([0.5, 1.0], [0.2, 0.4, 0.8]),
            ("d0", "d1"),
            (0, 1, 2),
            np.zeros((2, 3), dtype=bool),
        )
        matrix_path = tmp_path / "E.csv"
        save_error_matrix(E, matrix_path)
        out = tmp_path / "rep"
        assert main(["report", "spectrum", "--matrix", str(matrix_path), "--out", str(out)]) == 0
        lines = (out / "spectrum.csv").read_text().strip().splitlines()
        assert len(lines) == 3  # header + two singular values
        assert float(lines[2].split(",")[1]) == pytest.approx(0.0, abs=1e-12)

    def test_regret_report_shapes(self, pipeline, tmp_path):
        out = tmp_path / "regret"
        code = main(
            [
                "report",
                "regret",
                "--offline",
                str(pipeline["offline"]),
                "--methods",
                "ed_number,qr,random",
                "--count-budgets",
                "2,4",
                "--seeds",
                "5",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        records = (out / "regret_records.csv").read_text().strip().splitlines()
        # 4 datasets x (ed_number + qr + 5 random seeds) x 2 budgets + header
        assert len(records) == 1 + 4 * (1 + 1 + 5) * 2
        summary = (out / "regret_summary.csv").read_text().strip().splitlines()
        assert len(summary) == 1 + 3 * 2
        ranks = (out / "rank_curve.csv").read_text().strip().splitlines()
        assert len(ranks) == 1 + 3 * 2

    def test_runtime_accuracy_report(self, pipeline, tmp_path):
        out = tmp_path / "acc"
        code = main(
            ["report", "runtime-accuracy", "--offline", str(pipeline["offline"]), "--out", str(out)]
        )
        assert code == 0
        lines = (out / "runtime_accuracy.csv").read_text().strip().splitlines()
        assert lines[0] == "family,n_cells,within_factor_2,within_factor_4"
        for line in lines[1:]:
            _, _, w2, w4 = line.split(",")
            assert float(w2) <= float(w4)

    def test_nmf_report(self, pipeline, tmp_path):
        out = tmp_path / "nmf"
        code = main(
            [
                "report",
                "nmf",
                "--matrix",
                str(pipeline["offline"] / "error_matrix.csv"),
                "--collection",
                str(pipeline["offline"] / "collection.json"),
                "--rank",
                "2",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        counts = (out / "nmf_counts.csv").read_text().strip().splitlines()[1:]
        total = sum(int(line.split(",")[2]) for line in counts)
        assert total == 40

    def test_coldstart_report(self, pipeline, tmp_path):
        out = tmp_path / "cold"
        code = main(
            [
                "report",
                "coldstart",
                "--offline",
                str(pipeline["offline"]),
                "--budget-seconds",
                "2.0",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        lines = (out / "coldstart.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 4 * 4  # 4 datasets x 4 methods

    def test_ensemble_size_from_runs_file(self, tmp_path):
        runs = tmp_path / "runs.jsonl"
        with open(runs, "w") as fh:
            for size in (1, 2, 5, 7):
                rec = {
                    "ensemble": {
                        "members": [
                            {"index": i, "multiplicity": 1, "cv_error": 0.1}
                            for i in range(size)
                        ]
                    }
                }
                fh.write(json.dumps(rec) + "\n")
        out = tmp_path / "hist"
        assert main(["report", "ensemble-size", "--runs", str(runs), "--out", str(out)]) == 0
        lines = (out / "ensemble_sizes.csv").read_text().strip().splitlines()
        assert lines == ["size,count", "1,1", "2,1", "5,1", "7,1"]


class TestExitCodes:
    def test_missing_input_is_exit_3(self, tmp_path):
        assert main(
            ["report", "spectrum", "--matrix", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]
        ) == 3

    def test_usage_error_is_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_oboe_out_env_var_overrides_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("OBOE_OUT", str(tmp_path))
        monkeypatch.chdir(tmp_path)
        assert main(["gen-corpus", "--out", "relative-corpus", "--count", "2"]) == 0
        assert (tmp_path / "relative-corpus" / "manifest.json").exists()
