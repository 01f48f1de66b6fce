import json
import math
import os
import subprocess
import sys

import numpy as np

from jcsubdyn import cli

ROOT10 = math.sqrt(10.0)


def base_config(path, **overrides):
    cfg = {
        "omega": 1.0, "omega0": 0.8, "g": 0.02,
        "alpha_mag": ROOT10, "alpha_phase": 0.0,
        "n_max": 45,
        "atom_init": {"uu": 1.0, "ud_re": 0.0, "ud_im": 0.0, "dd": 0.0},
        "grid": {"start": 0.0, "stop": 10.0, "steps": 40},
        "oracle": False,
        "output": {"format": "csv", "path": str(path)},
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def load_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    data_lines = [ln for ln in lines if not ln.startswith("#")]
    header = data_lines[0].split(",")
    rows = np.array([[float(x) for x in ln.split(",")] for ln in data_lines[1:]])
    return comments, header, rows


class TestExitCodes:
    def test_success(self, tmp_path):
        out = tmp_path / "ok.csv"
        cfg = write_config(tmp_path, base_config(out))
        assert cli.main(["--config", cfg]) == 0
        assert out.exists()

    def test_degenerate_grid_is_config_error(self, tmp_path, capsys):
        rc = cli.main(["--grid", "0", "0", "2", "--output", str(tmp_path / "x.csv")])
        assert rc == 2
        assert "grid" in capsys.readouterr().err

    def test_malformed_json_reports_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"omega": 1.0,\n  "oops": }\n')
        assert cli.main(["--config", str(bad)]) == 2
        err = capsys.readouterr().err
        assert "line 2" in err and "column" in err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {**base_config(tmp_path / "x.csv"), "bogus": 1})
        assert cli.main(["--config", cfg]) == 2
        assert "bogus" in capsys.readouterr().err

    def test_unwritable_path_is_io_error(self, tmp_path):
        cfg = write_config(tmp_path, base_config("/nonexistent-dir/deep/out.csv"))
        assert cli.main(["--config", cfg]) == 4

    def test_invalid_atom_density_rejected(self, tmp_path, capsys):
        cfg = base_config(tmp_path / "x.csv",
                          atom_init={"uu": 0.9, "ud_re": 0.0, "ud_im": 0.0, "dd": 0.9})
        assert cli.main(["--config", write_config(tmp_path, cfg)]) == 2
        assert "density" in capsys.readouterr().err


class TestOutputs:
    def test_csv_shape_three_points_two_channels(self, tmp_path):
        out = tmp_path / "small.csv"
        cfg = base_config(out, grid={"start": 0.0, "stop": 1.0, "steps": 3},
                          channels=["abs_quasi_a", "quasi_n"])
        assert cli.main(["--config", write_config(tmp_path, cfg)]) == 0
        comments, header, rows = load_csv(out)
        assert header == ["gt", "abs_quasi_a", "quasi_n"]
        assert rows.shape == (3, 3)
        assert any(ln.startswith("# scenario:") for ln in comments)

    def test_csv_embeds_full_scenario(self, tmp_path):
        out = tmp_path / "embed.csv"
        cfg = base_config(out)
        assert cli.main(["--config", write_config(tmp_path, cfg)]) == 0
        comments, _, _ = load_csv(out)
        scenario_line = next(ln for ln in comments if ln.startswith("# scenario: "))
        echo = json.loads(scenario_line[len("# scenario: "):])
        assert echo["omega"] == 1.0 and echo["n_max"] == 45
        assert echo["atom_init"]["uu"] == 1.0
        assert echo["grid"]["steps"] == 40

    def test_json_round_trip(self, tmp_path):
        out = tmp_path / "series.json"
        cfg = base_config(out, output={"format": "json", "path": str(out)})
        assert cli.main(["--config", write_config(tmp_path, cfg)]) == 0
        doc = json.loads(out.read_text())
        assert set(doc) == {"scenario", "gt", "channels", "metadata"}
        assert len(doc["gt"]) == 40
        assert doc["metadata"]["version"]
        assert doc["scenario"]["g"] == 0.02
        for values in doc["channels"].values():
            assert len(values) == 40

    def test_deterministic_bytes(self, tmp_path):
        out = tmp_path / "a.csv"
        cfg = write_config(tmp_path, base_config(out))
        assert cli.main(["--config", cfg]) == 0
        first = out.read_bytes()
        assert cli.main(["--config", cfg]) == 0
        assert out.read_bytes() == first

    def test_flags_override_config(self, tmp_path):
        out = tmp_path / "o.json"
        cfg = write_config(tmp_path, base_config(out, output={"format": "json",
                                                              "path": str(out)}))
        assert cli.main(["--config", cfg, "--omega0", "0.9", "--channels",
                         "quasi_n,sigma_z_mean"]) == 0
        doc = json.loads(out.read_text())
        assert doc["scenario"]["omega0"] == 0.9
        assert sorted(doc["channels"]) == ["quasi_n", "sigma_z_mean"]


class TestOracleMode:
    def test_free_run_channels_identical_after_rounding(self, tmp_path):
        out = tmp_path / "free.json"
        cfg = base_config(out, g=0.0, grid={"start": 0.0, "stop": 5.0, "steps": 25},
                          oracle=True, output={"format": "json", "path": str(out)})
        assert cli.main(["--config", write_config(tmp_path, cfg)]) == 0
        doc = json.loads(out.read_text())
        for name in ("abs_quasi_a", "quasi_n", "sigma_z_mean", "sigma_z_upper"):
            closed = np.round(np.array(doc["channels"][name]), 12)
            oracle = np.round(np.array(doc["channels"][f"oracle_{name}"]), 12)
            np.testing.assert_array_equal(closed, oracle)

    def test_interacting_run_cross_checks(self, tmp_path):
        out = tmp_path / "xc.json"
        cfg = base_config(out, grid={"start": 0.0, "stop": 8.0, "steps": 12}, oracle=True,
                          output={"format": "json", "path": str(out)})
        assert cli.main(["--config", write_config(tmp_path, cfg)]) == 0
        doc = json.loads(out.read_text())
        assert doc["metadata"]["oracle_deviation_max"] < 1e-6

    def test_divergence_beyond_tolerance_exits_3(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(cli, "CROSSCHECK_TOL", 0.0)  # make roundoff a "divergence"
        out = tmp_path / "fail.json"
        cfg = base_config(out, grid={"start": 0.0, "stop": 4.0, "steps": 6}, oracle=True,
                          output={"format": "json", "path": str(out)})
        assert cli.main(["--config", write_config(tmp_path, cfg)]) == 3
        assert "cross-check" in capsys.readouterr().err
        assert not out.exists()


class TestMultiScenario:
    def test_bundled_style_config_emits_one_file_per_scenario(self, tmp_path):
        cfgs = [base_config(tmp_path / f"run{i}.csv", omega0=w0)
                for i, w0 in enumerate((0.85, 0.8, 0.6))]
        path = write_config(tmp_path, {"scenarios": cfgs})
        assert cli.main(["--config", path]) == 0
        for i in range(3):
            assert (tmp_path / f"run{i}.csv").exists()

    def test_output_flag_conflicts_with_multi(self, tmp_path, capsys):
        cfgs = [base_config(tmp_path / "a.csv"), base_config(tmp_path / "b.csv")]
        path = write_config(tmp_path, {"scenarios": cfgs})
        assert cli.main(["--config", path, "--output", str(tmp_path / "c.csv")]) == 2
        assert "multi-scenario" in capsys.readouterr().err


class TestTruncationWarning:
    def test_starved_n_max_warns_but_runs(self, tmp_path, capsys):
        out = tmp_path / "warn.csv"
        cfg = base_config(out, n_max=15)  # far too small for M = 10
        assert cli.main(["--config", write_config(tmp_path, cfg)]) == 0
        assert "tail mass" in capsys.readouterr().err
        assert out.exists()

    def test_auto_n_max_resolves(self, tmp_path):
        out = tmp_path / "auto.json"
        cfg = base_config(out, n_max="auto", output={"format": "json", "path": str(out)})
        assert cli.main(["--config", write_config(tmp_path, cfg)]) == 0
        doc = json.loads(out.read_text())
        assert doc["scenario"]["n_max"] >= 36
        assert doc["metadata"]["tail_ok"] is True


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "jcsubdyn", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "gt grid" in proc.stdout


class TestBundledFigureConfig:
    def _series_from_csv(self, path):
        """Rebuild an analysis series from an emitted CSV (plot-tool viewpoint)."""
        from jcsubdyn import analysis
        from jcsubdyn.jcm import JcmParams

        comments, header, rows = load_csv(path)
        echo = json.loads(next(ln for ln in comments if ln.startswith("# scenario: "))
                          [len("# scenario: "):])
        atom = echo["atom_init"]
        rho = np.array([[atom["uu"], atom["ud_re"] + 1j * atom["ud_im"]],
                        [atom["ud_re"] - 1j * atom["ud_im"], atom["dd"]]], dtype=complex)
        scenario = analysis.Scenario(
            params=JcmParams(echo["omega"], echo["omega0"], echo["g"], echo["n_max"]),
            atom_init=rho, magnitude=echo["alpha_mag"], phase=echo["alpha_phase"],
            grid=(echo["grid"]["start"], echo["grid"]["stop"], echo["grid"]["steps"]),
            channels=tuple(echo["channels"]), oracle=echo["oracle"])
        channels = {name: rows[:, i] for i, name in enumerate(header) if name != "gt"}
        return analysis.TimeSeries(scenario, rows[:, 0], channels, {})

    def test_three_series_files_with_features(self, tmp_path, monkeypatch):
        from jcsubdyn import analysis

        repo_config = os.path.join(os.path.dirname(__file__), "..", "configs", "figure1.json")
        monkeypatch.chdir(tmp_path)
        assert cli.main(["--config", os.path.abspath(repo_config)]) == 0
        names = ["figure1_detuning_7p5.csv", "figure1_detuning_10.csv",
                 "figure1_detuning_20.csv"]
        revived = 0
        for name in names:
            assert (tmp_path / name).exists()
            series = self._series_from_csv(tmp_path / name)
            feats = analysis.collapse_revival_features(series)
            assert feats.collapse_detected
            assert -1.0 < feats.plateau < 1.0
            revived += bool(feats.revival_peaks)
        # the two smaller detunings revive within the bundled gt window
        assert revived >= 2
