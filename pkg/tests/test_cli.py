"""Command-line surface: argument handling, file outputs, exit codes."""

import dataclasses
import os

import numpy as np
import pytest
import yaml

from dispatch_mcd import checks, cli
from dispatch_mcd.io import (
    RunConfig,
    SynthParams,
    config_to_dict,
    save_config,
    synth_profiles,
    save_profiles,
    read_schedule_csv,
)
from dispatch_mcd.degradation import StorageParams
from dispatch_mcd.horizon import McdGrid


@pytest.fixture()
def tiny_config(tmp_path):
    """A horizon small enough for CLI runs to finish in seconds."""
    cfg = RunConfig(
        storage=StorageParams(
            usage_budget_mwh=16000.0,
            calendar_usage_mwh=50.0,
            soh_end_of_life=0.97,
            impedance_eol_ratio=1.15,
        ),
        years=1,
        compress_days_per_period=91,  # 4 periods per year
        grid=McdGrid(dc_usd_per_mwh=0.5, cmax_usd_per_mwh=25.0,
                     tprimes=(1, 2, 3, 4), refine_splits=1),
        synth=SynthParams(load_diurnal_amplitude=0.28, wind_capacity_mw=105.0),
        seed=11,
    )
    path = tmp_path / "config.yaml"
    save_config(cfg, path)
    return cfg, path


class TestDispatchCommand:
    def test_priced_day_writes_tables(self, tiny_config, tmp_path):
        _, cfg_path = tiny_config
        out = tmp_path / "out"
        rc = cli.main([
            "dispatch", "--config", str(cfg_path), "--synth",
            "--c-usd-per-mwh", "10", "--out", str(out), "--no-plots",
        ])
        assert rc == 0
        assert (out / "dispatch_schedule.csv").exists()
        summary = yaml.safe_load((out / "dispatch_summary.yaml").read_text())
        assert summary["mode"] == "DegradationCost"
        assert summary["solver_status"] == "optimal"
        manifest = yaml.safe_load((out / "manifest.yaml").read_text())
        assert manifest["command"] == "dispatch"

    def test_capped_day_with_figure(self, tiny_config, tmp_path):
        _, cfg_path = tiny_config
        out = tmp_path / "out"
        rc = cli.main([
            "dispatch", "--config", str(cfg_path), "--synth",
            "--u-mwh", "300", "--out", str(out),
        ])
        assert rc == 0
        assert (out / "dispatch_day.png").exists()

    def test_profile_file_input(self, tiny_config, tmp_path):
        cfg, cfg_path = tiny_config
        prof_path = tmp_path / "prof.csv"
        save_profiles(synth_profiles(cfg.seed, cfg.synth), prof_path)
        out = tmp_path / "out"
        rc = cli.main([
            "dispatch", "--config", str(cfg_path), "--profiles", str(prof_path),
            "--c-usd-per-mwh", "5", "--out", str(out), "--no-plots",
        ])
        assert rc == 0

    def test_mode_flags_are_exclusive(self, tiny_config, tmp_path):
        _, cfg_path = tiny_config
        with pytest.raises(SystemExit) as err:
            cli.main([
                "dispatch", "--config", str(cfg_path), "--synth",
                "--u-mwh", "300", "--c-usd-per-mwh", "5", "--out", str(tmp_path / "o"),
            ])
        assert err.value.code == 2


class TestOptimizeCommand:
    def test_small_optimize_run(self, tiny_config, tmp_path):
        _, cfg_path = tiny_config
        out = tmp_path / "opt"
        rc = cli.main([
            "optimize", "--config", str(cfg_path), "--synth",
            "--out", str(out), "--no-plots",
        ])
        assert rc == 0
        sched = read_schedule_csv(out / "mcd_schedule.csv")
        assert sched["t"].size >= 1
        assert np.all(sched["c_usd_per_mwh"] >= 0)
        summary = yaml.safe_load((out / "optimize_summary.yaml").read_text())
        assert summary["savings_usd"] > 0
        assert (out / "candidates.csv").exists()

    def test_empty_grid_exits_one(self, tiny_config, tmp_path):
        # A zero price ceiling with a scarce budget cannot close the sweep.
        _, cfg_path = tiny_config
        rc = cli.main([
            "optimize", "--config", str(cfg_path), "--synth",
            "--out", str(tmp_path / "opt"), "--cmax", "0", "--no-plots",
        ])
        assert rc == 1

    def test_figures_rendered_by_default(self, tiny_config, tmp_path):
        _, cfg_path = tiny_config
        out = tmp_path / "opt"
        rc = cli.main(["optimize", "--config", str(cfg_path), "--synth", "--out", str(out)])
        assert rc == 0
        assert (out / "mcd_schedule.png").exists()
        assert (out / "soh.png").exists()


class TestValidateCommand:
    def test_exit_zero_iff_suite_passes(self, tmp_path, monkeypatch):
        canned = [checks.CheckResult("a", True, "ok", 0.0)]
        monkeypatch.setattr(checks, "run_all", lambda quick=False: canned)
        rc = cli.main(["validate", "--out", str(tmp_path / "v")])
        assert rc == 0
        report = yaml.safe_load((tmp_path / "v" / "validation_report.yaml").read_text())
        assert report["passed"] is True

        canned_fail = [checks.CheckResult("a", True, "ok", 0.0),
                       checks.CheckResult("b", False, "broken", 0.0)]
        monkeypatch.setattr(checks, "run_all", lambda quick=False: canned_fail)
        rc = cli.main(["validate", "--out", str(tmp_path / "v2")])
        assert rc == 1
        report = yaml.safe_load((tmp_path / "v2" / "validation_report.yaml").read_text())
        assert report["passed"] is False

    def test_usage_error_exit_two(self):
        with pytest.raises(SystemExit) as err:
            cli.main(["optimize"])  # missing required flags
        assert err.value.code == 2


class TestWorkdirResolution:
    def test_env_var_used_as_base(self, tiny_config, tmp_path, monkeypatch):
        _, cfg_path = tiny_config
        monkeypatch.setenv(cli.WORKDIR_ENV, str(tmp_path))
        rc = cli.main([
            "dispatch", "--config", str(cfg_path), "--synth",
            "--c-usd-per-mwh", "5", "--out", "rel_out", "--no-plots",
        ])
        assert rc == 0
        assert (tmp_path / "rel_out" / "dispatch_summary.yaml").exists()

    def test_missing_config_exit_one(self, tmp_path):
        rc = cli.main([
            "dispatch", "--config", str(tmp_path / "nope.yaml"), "--synth",
            "--c-usd-per-mwh", "5", "--out", str(tmp_path / "o"), "--no-plots",
        ])
        assert rc == 1


class TestCompareAndSweep:
    def test_compare_writes_policy_tables(self, tiny_config, tmp_path):
        _, cfg_path = tiny_config
        out = tmp_path / "cmp"
        rc = cli.main([
            "compare", "--config", str(cfg_path), "--synth", "--out", str(out),
        ])
        assert rc == 0
        summary = yaml.safe_load((out / "compare_summary.yaml").read_text())
        pols = summary["policies"]
        assert set(pols) == {"optimal_mcd", "no_soh_term", "lcod", "zero_cost", "no_storage"}
        assert pols["optimal_mcd"]["savings_usd"] >= pols["lcod"]["savings_usd"] - 1e-6
        assert pols["optimal_mcd"]["savings_usd"] >= pols["zero_cost"]["savings_usd"] - 1e-6
        assert (out / "compare_periods.csv").exists()
        assert (out / "savings.png").exists()
        assert (out / "mcd_schedule.png").exists()

    def test_sweep_bg_fits_line(self, tiny_config, tmp_path):
        _, cfg_path = tiny_config
        out = tmp_path / "bg"
        rc = cli.main([
            "sweep-bg", "--config", str(cfg_path), "--synth",
            "--values", "30,40", "--out", str(out), "--no-plots",
        ])
        assert rc == 0
        summary = yaml.safe_load((out / "sweep_bg_summary.yaml").read_text())
        assert summary["fit"]["slope"] > 0
        assert (out / "sweep_bg.csv").exists()

    def test_sweep_bg_needs_two_values(self, tiny_config, tmp_path):
        _, cfg_path = tiny_config
        with pytest.raises(SystemExit) as err:
            cli.main([
                "sweep-bg", "--config", str(cfg_path), "--synth",
                "--values", "30", "--out", str(tmp_path / "bg"),
            ])
        assert err.value.code == 2
