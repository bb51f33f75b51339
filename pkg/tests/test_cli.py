"""Command-line interface: outputs, determinism, config handling, exit codes."""

from __future__ import annotations

import csv
import os
import subprocess

import pytest

from oisac import worker_count


def run_cli(*args, env_extra=None):
    env = os.environ.copy()
    env.pop("OISAC_THREADS", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        ["oisac", *map(str, args)], capture_output=True, text=True, env=env
    )


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


class TestHelp:
    @pytest.mark.parametrize("args", [["--help"], ["cost", "--help"], ["region", "--help"], ["cdf", "--help"]])
    def test_help_exits_clean(self, args):
        assert run_cli(*args).returncode == 0


class TestCostCommand:
    def test_bound_curve_csv_and_figure(self, tmp_path):
        out = tmp_path / "c"
        res = run_cli("cost", "--estimator", "bcrb", "--out", out)
        assert res.returncode == 0, res.stderr
        rows = read_rows(out / "cost_bcrb_0.5.csv")
        assert len(rows) == 121
        assert set(rows[0]) == {"x", "cost", "variance", "bias_sq", "estimator", "n_r", "n_y", "seed"}
        assert float(rows[0]["x"]) == 0.0
        assert float(rows[0]["cost"]) == pytest.approx(2.0, rel=1e-9)
        assert float(rows[-1]["x"]) == 30.0
        assert (out / "cost_bcrb_0.5.png").exists()

    def test_no_figures_skips_rendering(self, tmp_path):
        out = tmp_path / "c"
        assert run_cli("cost", "--estimator", "bcrb", "--out", out, "--no-figures").returncode == 0
        assert (out / "cost_bcrb_0.5.csv").exists()
        assert not list(out.glob("*.png"))

    def test_existing_outputs_are_protected(self, tmp_path):
        out = tmp_path / "c"
        assert run_cli("cost", "--estimator", "bcrb", "--out", out).returncode == 0
        clobber = run_cli("cost", "--estimator", "bcrb", "--out", out)
        assert clobber.returncode == 2
        assert "--overwrite" in clobber.stderr
        assert run_cli("cost", "--estimator", "bcrb", "--out", out, "--overwrite").returncode == 0

    def test_monte_carlo_runs_are_byte_identical(self, tmp_path):
        args = ("cost", "--estimator", "mle", "--nr", 60, "--ny", 40, "--seed", 9)
        outs = []
        for name, env in (("a", None), ("b", None), ("c", {"OISAC_THREADS": "1"})):
            out = tmp_path / name
            assert run_cli(*args, "--out", out, "--no-figures", env_extra=env).returncode == 0
            outs.append((out / "cost_mle_0.5.csv").read_bytes())
        assert outs[0] == outs[1] == outs[2]


class TestRegionCommand:
    def test_closed_form_sweep_outputs(self, tmp_path):
        out = tmp_path / "r"
        res = run_cli("region", "--solver", "cfa", "--out", out, "--snapshot-t", "10")
        assert res.returncode == 0, res.stderr
        rows = read_rows(out / "region_cfa_bcrb.csv")
        assert len(rows) == 41
        assert set(rows[0]) == {"t", "s_star", "distortion", "rate_bits", "mean_power", "solver", "estimator"}
        d = [float(r["distortion"]) for r in rows]
        assert d == sorted(d)  # boundary is written left to right
        for r in rows:
            assert abs(float(r["mean_power"]) - 10.0) < 1e-3 + 1e-12
        assert (out / "region_cfa_bcrb.png").exists()
        assert (out / "dist_t10.0.csv").exists()

    def test_sweep_is_byte_identical_across_thread_counts(self, tmp_path):
        blobs = []
        for name, env in (("a", None), ("b", {"OISAC_THREADS": "1"})):
            out = tmp_path / name
            res = run_cli(
                "region", "--solver", "cfa", "--out", out, "--no-figures", env_extra=env
            )
            assert res.returncode == 0
            blobs.append((out / "region_cfa_bcrb.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_custom_dual_list_parsing(self, tmp_path):
        out = tmp_path / "r"
        res = run_cli("region", "--solver", "cfa", "--t", "0,1,10", "--out", out, "--no-figures")
        assert res.returncode == 0
        assert len(read_rows(out / "region_cfa_bcrb.csv")) == 3

        out2 = tmp_path / "r2"
        res = run_cli(
            "region", "--solver", "cfa", "--t", "logspace:0.1:100:4", "--out", out2, "--no-figures"
        )
        assert res.returncode == 0
        assert len(read_rows(out2 / "region_cfa_bcrb.csv")) == 4

        bad = run_cli("region", "--solver", "cfa", "--t", "banana", "--out", tmp_path / "r3")
        assert bad.returncode == 2

    def test_endpoints_mode_prints_and_writes_nothing(self, tmp_path):
        out = tmp_path / "e"
        res = run_cli("region", "--endpoints", "--out", out)
        assert res.returncode == 0
        assert "com-opt:" in res.stdout and "sens-opt:" in res.stdout
        assert "x_star = 10.0" in res.stdout
        assert not (out.exists() and list(out.glob("*.csv")))


class TestCdfCommand:
    def test_selected_modes_write_one_csv_each(self, tmp_path):
        out = tmp_path / "d"
        res = run_cli("cdf", "com-opt-cf", "sens-opt-bcrb", "--out", out)
        assert res.returncode == 0, res.stderr
        a = read_rows(out / "cdf_com-opt-cf.csv")
        b = read_rows(out / "cdf_sens-opt-bcrb.csv")
        assert set(a[0]) == {"x", "cdf"}
        assert len(a) == len(b) == 121
        assert float(a[-1]["cdf"]) == pytest.approx(1.0, abs=1e-9)
        assert (out / "cdf.png").exists()

    def test_unknown_mode_is_rejected(self, tmp_path):
        res = run_cli("cdf", "nonsense-mode", "--out", tmp_path / "d")
        assert res.returncode == 2


class TestConfigFile:
    def test_config_values_are_used_and_flags_win(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("lam = 0.3\nn_r = 50\nn_y = 30\nseed = 5\n")
        out = tmp_path / "a"
        res = run_cli("cost", "--estimator", "mle", "--config", cfg, "--out", out, "--no-figures")
        assert res.returncode == 0, res.stderr
        assert (out / "cost_mle_0.3.csv").exists()

        out2 = tmp_path / "b"
        res = run_cli(
            "cost", "--estimator", "mle", "--config", cfg, "--lambda", "0.5",
            "--out", out2, "--no-figures",
        )
        assert res.returncode == 0
        assert (out2 / "cost_mle_0.5.csv").exists()

    def test_unknown_key_is_named_in_the_error(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("frobnicate = 1\n")
        res = run_cli("cost", "--config", cfg, "--out", tmp_path / "x")
        assert res.returncode == 2
        assert "unknown key 'frobnicate'" in res.stderr

    def test_unparsable_value_is_reported(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("lam = banana\n")
        res = run_cli("cost", "--config", cfg, "--out", tmp_path / "x")
        assert res.returncode == 2
        assert "lam" in res.stderr


class TestWorkerCount:
    def test_explicit_override_wins(self):
        assert worker_count(3) == 3

    def test_environment_variable_is_honored(self, monkeypatch):
        monkeypatch.setenv("OISAC_THREADS", "2")
        assert worker_count() == 2

    def test_default_is_at_least_one(self, monkeypatch):
        monkeypatch.delenv("OISAC_THREADS", raising=False)
        assert worker_count() >= 1
