import csv
import json

import numpy as np
import pytest

from maternmle import MaternParams, grad_and_fisher, log_likelihood
from maternmle.cli import main, read_dataset, run_benchmark, write_dataset


def run_cli(*argv):
    return main(list(argv))


def make_dataset_csv(tmp_path, n=36, theta="1,0.1,0.5", seed=5, name="data.csv"):
    path = tmp_path / name
    code = run_cli("simulate", str(path), "--n", str(n), "--theta", theta, "--seed", str(seed))
    assert code == 0
    return path


class TestSimulateCommand:
    def test_writes_csv_and_metadata(self, tmp_path):
        path = make_dataset_csv(tmp_path, n=16, seed=7)
        lines = path.read_text().splitlines()
        assert lines[0] == "x,y,z"
        assert len(lines) == 17
        meta = json.loads((tmp_path / "data.csv.meta.json").read_text())
        assert meta["generator"] == "numpy-pcg64"
        assert meta["seed"] == 7
        assert meta["theta_true"] == {"sigma2": 1.0, "alpha": 0.1, "nu": 0.5}

    def test_byte_identical_rerun(self, tmp_path):
        first = make_dataset_csv(tmp_path, name="a.csv")
        second = make_dataset_csv(tmp_path, name="b.csv")
        assert first.read_bytes() == second.read_bytes()

    def test_round_trip_preserves_values(self, tmp_path):
        path = make_dataset_csv(tmp_path, n=25, seed=3)
        data = read_dataset(path)
        rewritten = tmp_path / "copy.csv"
        write_dataset(rewritten, data.locations, data.values)
        assert path.read_bytes() == rewritten.read_bytes()
        again = read_dataset(rewritten)
        np.testing.assert_array_equal(data.locations, again.locations)
        np.testing.assert_array_equal(data.values, again.values)

    def test_non_square_grid_rejected(self, tmp_path, capsys):
        code = run_cli("simulate", str(tmp_path / "x.csv"), "--n", "5", "--theta", "1,0.1,0.5")
        assert code == 2
        assert "perfect-square" in capsys.readouterr().err


class TestReadDataset:
    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(Exception) as info:
            read_dataset(path)
        assert "line 1" in str(info.value)

    def test_rejects_wrong_column_count(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y,z\n0,0,1\n0.5,0.5\n")
        with pytest.raises(Exception) as info:
            read_dataset(path)
        assert "line 3" in str(info.value)
        assert "expected 3 fields" in str(info.value)

    def test_rejects_non_numeric(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y,z\n0,0,oops\n")
        with pytest.raises(Exception) as info:
            read_dataset(path)
        assert "line 2" in str(info.value)


class TestEstimateCommand:
    def test_happy_path_record(self, tmp_path):
        data_path = make_dataset_csv(tmp_path, n=36)
        out = tmp_path / "result.json"
        code = run_cli(
            "estimate", str(data_path),
            "--method", "fisher-bt",
            "--lower", "0.01,0.01,0.01", "--upper", "5,5,2",
            "--out", str(out), "--trace",
        )
        assert code == 0
        document = json.loads(out.read_text())
        (record,) = document["records"]
        assert record["method"] == "fisher-bt"
        assert set(record["theta_hat"]) == {"sigma2", "alpha", "nu"}
        assert record["loglik_calls"] >= 9
        assert record["grad_calls"] >= 1
        assert record["termination"] in {"gradient_tol", "fallback_converged", "budget_exhausted"}
        assert len(record["trace"]) >= 1
        # recorded loglik re-evaluates to the same value
        data = read_dataset(data_path)
        hat = MaternParams(**record["theta_hat"])
        assert log_likelihood(data, hat) == pytest.approx(record["loglik"], abs=1e-10)
        if record["std_errors"] is not None:
            assert all(se > 0 for se in record["std_errors"])

    def test_parse_error_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("x,y,z\n0,0,1\n0.5,0.5\n")
        code = run_cli("estimate", str(path))
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("error: ")
        assert "line 3: expected 3 fields, got 2" in err

    def test_missing_file_exit_code(self, tmp_path, capsys):
        code = run_cli("estimate", str(tmp_path / "absent.csv"))
        assert code == 2

    def test_optimization_failure_exit_code(self, tmp_path, capsys):
        path = tmp_path / "dup.csv"
        path.write_text("x,y,z\n0,0,0.2\n0,0,0.7\n")
        code = run_cli(
            "estimate", str(path),
            "--lower", "2.505,2.505,1.005", "--upper", "2.505,2.505,1.005",
        )
        assert code == 3
        assert "optimization failed" in capsys.readouterr().err

    def test_both_methods_cross_check(self, tmp_path):
        data_path = make_dataset_csv(tmp_path, n=100, seed=11)
        out = tmp_path / "both.json"
        code = run_cli("estimate", str(data_path), "--method", "both", "--out", str(out))
        assert code == 0
        records = json.loads(out.read_text())["records"]
        assert [r["method"] for r in records] == ["fisher-bt", "nelder-mead"]
        fisher_ll = records[0]["loglik"]
        nm_ll = records[1]["loglik"]
        assert fisher_ll >= nm_ll - 1e-3


class TestLoglikCommand:
    def test_matches_direct_evaluation(self, tmp_path, capsys):
        data_path = make_dataset_csv(tmp_path, n=25, seed=2)
        code = run_cli("loglik", str(data_path), "--theta", "1,0.1,0.5")
        assert code == 0
        document = json.loads(capsys.readouterr().out)
        data = read_dataset(data_path)
        ev = grad_and_fisher(data, MaternParams(1.0, 0.1, 0.5))
        assert document["loglik"] == pytest.approx(ev.loglik, rel=1e-14)
        np.testing.assert_allclose(document["grad"], ev.grad, rtol=1e-14)
        np.testing.assert_allclose(document["fisher"], ev.fisher, rtol=1e-14)


class TestBenchmarkCommand:
    def test_summary_shape_and_determinism(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            code = run_cli(
                "benchmark",
                "--theta", "1,0.1,0.5",
                "--n", "16", "--n", "25",
                "--m", "2",
                "--methods", "both",
                "--seed", "9",
                "--out-dir", str(out),
            )
            assert code == 0
        with open(out_a / "summary.csv") as handle:
            rows = list(csv.DictReader(handle))
        # 1 theta x 2 sizes x 2 methods x 4 params
        assert len(rows) == 16
        assert {r["param"] for r in rows} == {"sigma2", "alpha", "nu", "micro"}
        assert {r["method"] for r in rows} == {"fisher-bt", "nelder-mead"}
        # deficits are measured against the per-dataset best method
        assert all(float(r["mean_loglik_deficit"]) >= 0.0 for r in rows)

        def stable_part(path):
            with open(path) as handle:
                return [
                    {k: v for k, v in row.items() if k != "mean_wall_time"}
                    for row in csv.DictReader(handle)
                ]

        assert stable_part(out_a / "summary.csv") == stable_part(out_b / "summary.csv")

    def test_run_records_written(self, tmp_path):
        out = tmp_path / "bench"
        code = run_cli(
            "benchmark",
            "--theta", "1,0.1,0.5",
            "--n", "16",
            "--m", "2",
            "--methods", "fisher-bt",
            "--seed", "3",
            "--out-dir", str(out),
        )
        assert code == 0
        files = sorted(p.name for p in out.glob("run_*.json"))
        assert files == ["run_t0_n16_r0.json", "run_t0_n16_r1.json"]
        record = json.loads((out / "run_t0_n16_r0.json").read_text())
        assert record["records"][0]["method"] == "fisher-bt"

    def test_parallel_jobs_match_serial(self, tmp_path):
        theta = [MaternParams(1.0, 0.1, 0.5)]
        serial_results, serial_summary = run_benchmark(
            theta, [16], 2, ["fisher-bt"], (0.01, 0.01, 0.01), (5.0, 5.0, 2.0), 9, jobs=1
        )
        parallel_results, parallel_summary = run_benchmark(
            theta, [16], 2, ["fisher-bt"], (0.01, 0.01, 0.01), (5.0, 5.0, 2.0), 9, jobs=2
        )

        def strip_wall(summary):
            return [row[:-1] for row in summary]

        assert strip_wall(serial_summary) == strip_wall(parallel_summary)
        assert [r["records"][0]["theta_hat"] for r in serial_results] == [
            r["records"][0]["theta_hat"] for r in parallel_results
        ]
