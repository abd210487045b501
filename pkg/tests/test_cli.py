"""CLI: commands, exit codes, file formats, config round-trips, determinism."""
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from entrobound.cli import ExperimentConfig, emit_csv, emit_f64le, ingest, main
from entrobound.errors import IngestError


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestBoundCommand:
    def test_reference_value_printed(self, capsys):
        code, out, _ = run_cli(
            ["bound", "--k", "1", "--l", "1", "--m", "100", "--n", "1000000",
             "--delta", "0.05"],
            capsys,
        )
        assert code == 0
        assert out.startswith("total=0.064116313591567")

    def test_invalid_m_exit_2(self, capsys):
        code, _, err = run_cli(
            ["bound", "--k", "1", "--l", "4", "--m", "8", "--n", "1000", "--delta", "0.1"],
            capsys,
        )
        assert code == 2
        assert err.startswith("error: validity:")

    def test_bad_delta_exit_2(self, capsys):
        code, _, err = run_cli(
            ["bound", "--k", "1", "--l", "1", "--m", "10", "--n", "10", "--delta", "1.5"],
            capsys,
        )
        assert code == 2
        assert err.startswith("error: invalid:")


class TestEstimateCommand:
    def test_csv_columns_and_meta(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        code, _, _ = run_cli(
            ["estimate", "--density", "tent", "--k", "1", "--l", "4", "--n", "10000",
             "--delta", "0.1", "--seed", "7", "--out", str(out)],
            capsys,
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "estimate,total_bound,quant_bias,stat_dev,emp_bias,M,N"
        fields = lines[1].split(",")
        assert abs(float(fields[0]) - (0.5 - math.log(2.0))) <= float(fields[1])
        meta = (tmp_path / "r.csv.meta").read_text()
        assert "command = estimate" in meta
        assert "seed = 7" in meta
        assert "version = " in meta
        assert "wall_time_s = " in meta

    def test_estimate_from_ingested_file(self, tmp_path, capsys):
        data = tmp_path / "pts.csv"
        data.write_text("x\n0.1\n0.2\n0.3\n0.9\n")
        out = tmp_path / "r.csv"
        code, _, _ = run_cli(
            ["estimate", "--input", str(data), "--k", "1", "--l", "1",
             "--delta", "0.2", "--out", str(out)],
            capsys,
        )
        assert code == 0
        assert ",4" in out.read_text().splitlines()[1]  # N = 4

    def test_missing_input_exit_1(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["estimate", "--input", str(tmp_path / "nope.csv"), "--k", "1",
             "--l", "1", "--delta", "0.2"],
            capsys,
        )
        assert code == 1
        assert err.startswith("error: io:")

    def test_out_of_support_input_exit_2(self, tmp_path, capsys):
        data = tmp_path / "pts.csv"
        data.write_text("0.5\n1.5\n")
        code, _, err = run_cli(
            ["estimate", "--input", str(data), "--k", "1", "--l", "1", "--delta", "0.2"],
            capsys,
        )
        assert code == 2


class TestMiEstimateCommand:
    def test_independent_tents(self, tmp_path, capsys):
        out = tmp_path / "mi.csv"
        code, _, _ = run_cli(
            ["mi-estimate", "--density", "tent", "--k1", "1", "--k2", "1",
             "--l", "8", "--n", "5000", "--delta", "0.1", "--seed", "3",
             "--out", str(out)],
            capsys,
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "estimate,total_bound,quant_bias,stat_dev,emp_bias,m_x,m_y,m_xy,N"
        fields = lines[1].split(",")
        assert abs(float(fields[0])) <= float(fields[1])


class TestCoverageCommand:
    def test_rows_and_summary(self, tmp_path, capsys):
        out = tmp_path / "cov.csv"
        code, _, _ = run_cli(
            ["coverage", "--density", "tent", "--k", "1", "--l", "4", "--n", "2000",
             "--delta", "0.1", "--trials", "8", "--seed", "3", "--out", str(out)],
            capsys,
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 1 + 8 + 1  # header + trials + summary
        assert lines[-1].startswith("summary")
        coverage = float(lines[-1].split(",")[-1])
        assert coverage >= 0.9

    def test_single_trial(self, tmp_path, capsys):
        out = tmp_path / "cov1.csv"
        code, _, _ = run_cli(
            ["coverage", "--density", "tent", "--k", "1", "--l", "4", "--n", "500",
             "--delta", "0.1", "--trials", "1", "--seed", "3", "--out", str(out)],
            capsys,
        )
        assert code == 0
        assert len(out.read_text().splitlines()) == 3

    def test_thread_count_does_not_change_output(self, tmp_path, capsys, monkeypatch):
        outputs = []
        for threads in ("1", "4"):
            monkeypatch.setenv("ENTROBOUND_THREADS", threads)
            out = tmp_path / f"cov_{threads}.csv"
            code, _, _ = run_cli(
                ["coverage", "--density", "tent", "--k", "1", "--l", "4",
                 "--n", "1000", "--delta", "0.1", "--trials", "6", "--seed", "9",
                 "--out", str(out)],
                capsys,
            )
            assert code == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]


class TestDemoCommands:
    @pytest.mark.parametrize("command", ["prop1-demo", "mi-demo", "kl-demo"])
    def test_smoke(self, command, tmp_path, capsys):
        out = tmp_path / "demo.csv"
        code, _, _ = run_cli(
            [command, "--c", "0.5", "--delta", "0.2", "--n", "30", "--trials", "10",
             "--seed", "5", "--out", str(out)],
            capsys,
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("trials,failure_fraction,below_threshold_fraction")
        assert len(lines) == 2


class TestVerifyLemmas:
    def test_all_hold_k1(self, tmp_path, capsys):
        out = tmp_path / "lem.csv"
        code, _, _ = run_cli(["verify-lemmas", "--k", "1", "--out", str(out)], capsys)
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "check,k,m,lhs,rhs,holds"
        assert len(lines) > 10
        assert all(line.endswith("true") for line in lines[1:])


class TestIngest:
    def test_csv_with_header(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y\n0.1,0.2\n0.3,0.4\n")
        pts = ingest(path, "csv")
        assert pts.shape == (2, 2)
        assert pts[1, 1] == 0.4

    def test_csv_without_header(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0.1,0.2\n0.3,0.4\n")
        assert ingest(path, "csv").shape == (2, 2)

    def test_parse_error_names_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0.1,abc\n")
        with pytest.raises(IngestError, match="line 1"):
            ingest(path, "csv")

    def test_nan_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0.1\nnan\n")
        with pytest.raises(IngestError, match="non-finite"):
            ingest(path, "csv")

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0.1,0.2\n0.3\n")
        with pytest.raises(IngestError, match="line 2"):
            ingest(path, "csv")

    def test_f64le_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        pts = rng.random((17, 3))
        path = tmp_path / "d.bin"
        emit_f64le(path, pts)
        back = ingest(path, "f64le", k=3)
        assert np.array_equal(back, pts)

    def test_f64le_two_points(self, tmp_path):
        path = tmp_path / "d.bin"
        path.write_bytes(np.array([0.25, 0.75]).astype("<f8").tobytes())
        assert ingest(path, "f64le", k=1).shape == (2, 1)

    def test_f64le_bad_length(self, tmp_path):
        path = tmp_path / "d.bin"
        path.write_bytes(b"\x00" * 12)
        with pytest.raises(IngestError, match="multiple"):
            ingest(path, "f64le", k=1)

    def test_f64le_non_finite_rejected(self, tmp_path):
        path = tmp_path / "d.bin"
        path.write_bytes(np.array([0.5, math.inf]).astype("<f8").tobytes())
        with pytest.raises(IngestError, match="non-finite"):
            ingest(path, "f64le", k=1)

    def test_csv_round_trip(self, tmp_path):
        pts = np.random.default_rng(5).random((9, 2))
        path = tmp_path / "d.csv"
        emit_csv(path, pts)
        assert np.array_equal(ingest(path, "csv"), pts)


class TestConfigFile:
    def test_round_trip(self):
        config = ExperimentConfig(
            command="estimate", density="tent", k=1, l=4.0, n=1000,
            delta=0.1, seed=42, out="r.csv",
        )
        assert ExperimentConfig.from_text(config.to_text()) == config

    def test_config_drives_run(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            f"command = estimate\ndensity = tent\nk = 1\nl = 4\nn = 1000\n"
            f"delta = 0.1\nseed = 7\nout = {out}\n"
        )
        code, _, _ = run_cli(["estimate", "--config", str(cfg)], capsys)
        assert code == 0
        assert out.exists()

    def test_cli_flag_overrides_config(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("density = tent\nk = 1\nl = 4\nn = 1000\ndelta = 0.1\nseed = 7\n")
        code, _, _ = run_cli(
            ["estimate", "--config", str(cfg), "--n", "2000", "--out", str(out)],
            capsys,
        )
        assert code == 0
        assert out.read_text().splitlines()[1].endswith(",2000")

    def test_command_mismatch_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("command = bound\n")
        code, _, err = run_cli(["estimate", "--config", str(cfg)], capsys)
        assert code == 2
        assert "config file is for command" in err


class TestDeterminism:
    def test_identical_runs_byte_identical(self, tmp_path, capsys):
        args = ["coverage", "--density", "tent", "--k", "1", "--l", "4",
                "--n", "1000", "--delta", "0.1", "--trials", "5", "--seed", "11"]
        outputs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            code, _, _ = run_cli(args + ["--out", str(out)], capsys)
            assert code == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]


class TestConsoleScript:
    def test_entry_point_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "entrobound.cli", "bound", "--k", "1", "--l", "1",
             "--m", "100", "--n", "1000000", "--delta", "0.05"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.startswith("total=0.064116")
