"""Command-line surface: subcommands, exit codes, artifacts."""

import json

import numpy as np
import pytest

from wavemon.cli import main
from wavemon.formats import read_record, read_snapshot, read_table, verify_manifest

SMALL_CONFIG = """
meta:
  label: cli-demo
grid:
  extent_um: [[-120.0, 120.0]]
  points: [128]
potential:
  kind: harmonic
  stiffness_ev_per_um2: [2.35e-14]
  center_um: [0.0]
initial:
  true_state:
    center_um: [-20.0]
    width_um: 8.0
  estimate:
    center_um: [15.0]
    width_um: 6.0
monitor:
  gamma_per_um2_ms: 0.05
run:
  mode: continuous
  scheme: weak2
  dt_ms: 0.02
  duration_ms: 1.0
  seed: 42
  snapshot_times_ms: [0.0, 1.0]
"""


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL_CONFIG)
    return path


class TestBasics:
    def test_list_scenarios(self, capsys):
        assert main(["list-scenarios"]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert out == ["double-well-1d", "mexican-hat-2d", "henon-heiles-2d",
                       "henon-heiles-kick", "separable-degenerate-2d",
                       "free-localization-1d"]

    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["run", "double-well-1d", "--frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_subcommand(self, capsys):
        assert main([]) == 1

    def test_bad_config_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("grid: {extent_um: [[-1.0, 1.0]], points: [4]}\n")
        assert main(["run", str(bad)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_validate_prints_gamma_and_rate(self, config_path, capsys):
        assert main(["validate", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "gamma = 0.05" in out
        assert "decoherence rate" in out


class TestRun:
    def test_run_writes_artifacts_and_manifest(self, config_path, tmp_path, capsys):
        out_dir = tmp_path / "out"
        assert main(["run", str(config_path), "--out", str(out_dir), "-q"]) == 0
        for name in ("config.yaml", "fidelity.tsv", "observables.tsv",
                     "record.qrec", "final_true.qmon", "final_estimate.qmon",
                     "manifest.json"):
            assert (out_dir / name).exists(), name
        assert (out_dir / "snapshots" / "snap_00_true.qmon").exists()
        assert (out_dir / "snapshots" / "snap_01_est.qmon").exists()
        assert verify_manifest(out_dir) == []
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["master_seed"] == 42
        assert "config.yaml" in manifest["files"]

    def test_reruns_byte_identical(self, config_path, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", str(config_path), "--out", str(a), "-q"]) == 0
        assert main(["run", str(config_path), "--out", str(b), "-q"]) == 0
        for name in ("fidelity.tsv", "observables.tsv", "record.qrec",
                     "final_estimate.qmon"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_seed_override_changes_output(self, config_path, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["run", str(config_path), "--out", str(a), "-q"])
        main(["run", str(config_path), "--out", str(b), "--seed", "43", "-q"])
        assert (a / "fidelity.tsv").read_bytes() != (b / "fidelity.tsv").read_bytes()

    def test_run_builtin_by_name(self, tmp_path):
        out = tmp_path / "loc"
        code = main(["run", "free-localization-1d", "--variant", "desk",
                     "--out", str(out), "-q"])
        assert code == 0
        table = read_table(out / "fidelity.tsv")
        assert table["time_ms"][-1] == pytest.approx(101.0)


class TestReplay:
    def test_live_and_replay_estimates_identical(self, config_path, tmp_path):
        live = tmp_path / "live"
        rep = tmp_path / "rep"
        assert main(["run", str(config_path), "--out", str(live), "-q"]) == 0
        assert main(["replay", str(live / "record.qrec"), str(config_path),
                     "--out", str(rep), "-q"]) == 0
        live_obs = read_table(live / "observables.tsv")
        rep_obs = read_table(rep / "replay_observables.tsv")
        assert np.array_equal(rep_obs["est_mean_x"], live_obs["est_mean_x"])
        assert np.array_equal(rep_obs["est_var_x"], live_obs["est_var_x"])
        _, live_final = read_snapshot(live / "final_estimate.qmon")
        _, rep_final = read_snapshot(rep / "final_estimate.qmon")
        assert np.array_equal(live_final, rep_final)

    def test_dt_mismatch_rejected(self, config_path, tmp_path, capsys):
        live = tmp_path / "live"
        main(["run", str(config_path), "--out", str(live), "-q"])
        other = tmp_path / "other.yaml"
        other.write_text(SMALL_CONFIG.replace("dt_ms: 0.02", "dt_ms: 0.01"))
        assert main(["replay", str(live / "record.qrec"), str(other)]) == 2


class TestEnsemble:
    def test_ensemble_artifacts(self, config_path, tmp_path):
        out = tmp_path / "ens"
        assert main(["ensemble", str(config_path), "--n", "3",
                     "--out", str(out), "-q"]) == 0
        table = read_table(out / "mean_fidelity.tsv")
        assert set(table) == {"time_ms", "mean_fidelity", "se_fidelity", "n"}
        assert table["n"][0] == 3
        for i in range(3):
            assert (out / f"traj_{i:03d}" / "fidelity.tsv").exists()
        assert verify_manifest(out) == []
        rec = read_record(out / "traj_001" / "record.qrec")
        assert rec.meta["seed"] == 42 ^ 1

    def test_ensemble_first_member_matches_single_run(self, config_path, tmp_path):
        single = tmp_path / "single"
        ens = tmp_path / "ens"
        main(["run", str(config_path), "--out", str(single), "-q"])
        main(["ensemble", str(config_path), "--n", "2", "--out", str(ens), "-q"])
        assert (single / "fidelity.tsv").read_bytes() == \
            (ens / "traj_000" / "fidelity.tsv").read_bytes()


class TestProbeOrder:
    def test_probe_order_prints_slopes(self, tmp_path, capsys):
        code = main(["probe-order", "--n-pairs", "6"])
        assert code == 0
        out = capsys.readouterr().out
        assert "scheme weak2" in out and "scheme em" in out
        assert "fitted weak order" in out
