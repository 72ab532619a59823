import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from pulsed_qubit.errors import ConfigError, RefinementExhaustedError
from pulsed_qubit.harness import cli, config, io
from pulsed_qubit.pulses import DeltaKick, Gaussian, Sampled

TWO_PI = 2 * math.pi

GAUSS = {
    "system": {"delta_e": 1.0},
    "pulse": {"kind": "gaussian", "v_peak": 0.6, "t_center": 4.0, "sigma": 0.8},
    "t_final": 9.0,
    "propagation": {"record_stride": 32},
}


def write_config(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def run(tmp_path, command, data, *extra):
    cfg = write_config(tmp_path / "cfg.json", data)
    out = tmp_path / "out"
    args = [command, "--config", cfg]
    if command != "classify":
        args += ["--out-dir", str(out)]
    return cli.main(args + list(extra)), out


class TestConfig:
    def test_defaults(self):
        cfg = config.parse_config({"system": {"delta_e": 2.0}, "pulse": {"kind": "delta_kick", "alpha_k": 1, "t_k": 0}})
        assert cfg.initial_state.a1 == 1 and cfg.ratio == 0.1
        assert isinstance(cfg.pulse, DeltaKick)

    @pytest.mark.parametrize("data", [
        {"system": {"delta_e": 1}, "extra": 1},
        {"system": {"delta_e": 1, "mass": 2}},
        {"system": {"delta_e": 1}, "pulse": {"kind": "gaussian", "v_peak": 1, "t_center": 0, "sigma": 1, "phase": 0}},
        {"system": {"delta_e": 1}, "propagation": {"steps": 10}},
        {"system": {"delta_e": 1}, "atlas": {"nz": 3}},
    ])
    def test_unknown_keys_rejected(self, data):
        with pytest.raises(ConfigError, match="unknown key"):
            config.parse_config(data)

    @pytest.mark.parametrize("data", [
        {"system": {"delta_e": -1}},
        {"system": {"delta_e": "1"}},
        {"system": {"delta_e": 1}, "pulse": {"kind": "gaussian", "v_peak": 1, "t_center": 0, "sigma": 0}},
        {"system": {"delta_e": 1}, "pulse": {"kind": "triangle"}},
        {"system": {"delta_e": 1}, "t_final": -2},
        {"system": {"delta_e": 1}, "initial_state": {"a1": 1, "a2": 1}},
        {"system": {"delta_e": 1}, "propagation": {"step_count": 4}},
        {"system": {"delta_e": 1}, "regimes_to_compare": ["rwa"]},
        {"system": {"delta_e": 1}, "thresholds": {"ratio": 0}},
        {"system": {"delta_e": 1}, "atlas": {"family": "kick"}},
        {"pulse": {"kind": "delta_kick", "alpha_k": 1, "t_k": 0}},
        [1, 2],
    ])
    def test_invalid_values(self, data):
        with pytest.raises(ConfigError):
            config.parse_config(data)

    def test_bad_json(self):
        with pytest.raises(ConfigError):
            config.loads("{not json")

    @pytest.mark.parametrize("data", [
        GAUSS,
        {"system": {"delta_e": 0.5, "hbar": 2.0},
         "pulse": {"kind": "sampled", "times": [0, 1, 2], "values": [0, 1.5, 0]},
         "t_final": 3, "initial_state": {"a1": [0.6, 0], "a2": [0, 0.8]},
         "regimes_to_compare": ["kicked", "adiabatic"], "thresholds": {"ratio": 0.05},
         "output": {"dir": "x", "prefix": "p", "svg": False}},
        {"atlas": {"nx": 3, "ny": 2, "family": "rectangular"}},
    ])
    def test_round_trip(self, data):
        cfg = config.parse_config(data)
        again = config.loads(json.dumps(cfg.to_dict()))
        assert again == cfg
        assert again.to_dict() == cfg.to_dict()

    def test_atlas_inherits_system(self):
        cfg = config.parse_config({"system": {"delta_e": 2.0, "hbar": 0.5}, "thresholds": {"ratio": 0.2}, "atlas": {}})
        assert cfg.atlas.delta_e == 2.0 and cfg.atlas.hbar == 0.5 and cfg.atlas.ratio == 0.2

    def test_sampled_pulse(self):
        cfg = config.parse_config({"system": {"delta_e": 1}, "pulse": {"kind": "sampled", "times": [0, 1], "values": [1, 2]}})
        assert cfg.pulse == Sampled(((0.0, 1.0), (1.0, 2.0)))


class TestIO:
    def test_fmt(self):
        assert io.fmt(0.1) == "0.10000000000000001"
        assert float(io.fmt(1 / 3)) == 1 / 3
        assert io.fmt(math.nan) == "nan" and io.fmt(-math.inf) == "-inf" and io.fmt(3) == "3"

    def test_csv_rfc4180(self, tmp_path):
        p = io.write_csv(tmp_path / "a.csv", ("a", "b"), [(1.5, "x,y")])
        assert p.read_bytes() == b'a,b\r\n1.5,"x,y"\r\n'

    def test_json_sorted_and_nan(self):
        text = io.json_text({"b": math.nan, "a": np.float64(1.0), "c": np.arange(2)})
        assert json.loads(text) == {"a": 1.0, "b": "nan", "c": [0, 1]}
        assert text.index('"a"') < text.index('"b"')

    def test_svg_self_contained(self):
        vals = np.array([[1e-6, math.nan], [0.1, 2.0]])
        svg = io.heatmap_svg(vals, np.array([0.1, 1.0]) * TWO_PI, np.array([0.1, 1.0]) * TWO_PI, "t")
        assert svg.startswith("<?xml") and 'version="1.1"' in svg
        assert "#bbbbbb" in svg and "href" not in svg
        assert svg.count("<rect") == 4 + 50


class TestEvolve:
    def test_kick_full_transfer(self, tmp_path):
        data = {"system": {"delta_e": 1.3},
                "pulse": {"kind": "delta_kick", "alpha_k": math.pi / 2, "t_k": 1.0},
                "t_final": 3.0, "output": {"prefix": "k"}}
        code, out = run(tmp_path, "evolve", data)
        assert code == 0
        header, rows = read_csv(out / "k_timeseries.csv")
        assert header == ["t", "re_a1", "im_a1", "re_a2", "im_a2", "p1", "p2"]
        assert rows[-1, 5] == pytest.approx(0, abs=1e-10) and rows[-1, 6] == pytest.approx(1, abs=1e-10)
        summary = json.loads((out / "k_summary.json").read_text())
        assert summary["units_note"] == config.UNITS_NOTE
        assert summary["regime_report"]["coords"]["x"] == pytest.approx(math.pi / 2)
        assert summary["unitarity_defect"] < 1e-12

    def test_zero_potential_constant_populations(self, tmp_path):
        data = {"system": {"delta_e": 2.0}, "pulse": {"kind": "rectangular", "v0": 0, "t_start": 0, "width": 1},
                "t_final": 5.0, "initial_state": {"a1": [0.6, 0], "a2": [0, 0.8]}}
        code, out = run(tmp_path, "evolve", data)
        _, rows = read_csv(out / "run_timeseries.csv")
        assert code == 0
        np.testing.assert_allclose(rows[:, 5], 0.36, atol=1e-14)
        np.testing.assert_allclose(rows[:, 6], 0.64, atol=1e-14)

    def test_gaussian_conservation(self, tmp_path):
        code, out = run(tmp_path, "evolve", GAUSS)
        _, rows = read_csv(out / "run_timeseries.csv")
        assert code == 0 and rows[0, 0] == 0 and rows[-1, 0] == 9.0
        np.testing.assert_allclose(rows[:, 5] + rows[:, 6], 1, atol=1e-10)

    def test_deterministic(self, tmp_path):
        for sub in ("a", "b"):
            (tmp_path / sub).mkdir()
            run(tmp_path / sub, "evolve", GAUSS)
        for name in ("run_timeseries.csv", "run_summary.json"):
            assert (tmp_path / "a/out" / name).read_bytes() == (tmp_path / "b/out" / name).read_bytes()


class TestCompare:
    def test_degenerate_oracle(self, tmp_path):
        data = {"system": {"delta_e": 0.0}, "pulse": {"kind": "gaussian", "v_peak": 1.1, "t_center": 3, "sigma": 0.6},
                "t_final": 6.0, "propagation": {"tolerance": 1e-11, "record_stride": 64}}
        code, out = run(tmp_path, "compare", data)
        res = json.loads((out / "run_comparison.json").read_text())
        assert code == 0
        assert res["regimes"]["degenerate"]["matrix_error"] < 1e-9
        assert res["regimes"]["degenerate"]["applicable"] is True

    def test_small_perturbative(self, tmp_path):
        alpha, sigma = 0.05, 0.7
        data = {"system": {"delta_e": 1.0},
                "pulse": {"kind": "gaussian", "v_peak": alpha / (sigma * math.sqrt(TWO_PI)), "t_center": 8 * sigma, "sigma": sigma},
                "t_final": 16 * sigma, "regimes_to_compare": ["perturbative"],
                "propagation": {"record_stride": 256}}
        code, out = run(tmp_path, "compare", data)
        res = json.loads((out / "run_comparison.json").read_text())
        assert code == 0 and res["regimes"]["perturbative"]["transfer_error"] < alpha ** 2

    def test_adiabatic_from_upper_state(self, tmp_path):
        data = {"system": {"delta_e": 1.0}, "pulse": {"kind": "gaussian", "v_peak": 1.0, "t_center": 2400, "sigma": 300},
                "t_final": 4800.0, "initial_state": {"a1": 0, "a2": 1},
                "propagation": {"step_count": 32, "tolerance": 1e-8, "record_stride": 8192},
                "regimes_to_compare": ["adiabatic"]}
        code, out = run(tmp_path, "compare", data)
        res = json.loads((out / "run_comparison.json").read_text())
        assert code == 0
        assert res["regimes"]["adiabatic"]["transfer_error"] < 1e-3
        assert res["regimes"]["adiabatic"]["applicable"] is True

    def test_outside_validity_still_evaluated(self, tmp_path):
        pulse = {"kind": "gaussian", "v_peak": 0.6, "t_center": 6.4, "sigma": 0.8}
        data = dict(GAUSS, pulse=pulse, t_final=14.0, regimes_to_compare=["degenerate", "kicked", "adiabatic", "zero_potential"])
        code, out = run(tmp_path, "compare", data)
        res = json.loads((out / "run_comparison.json").read_text())
        assert code == 0 and set(res["regimes"]) == {"degenerate", "kicked", "adiabatic", "zero_potential"}
        for entry in res["regimes"].values():
            assert entry["matrix_error"] >= 0 and 0 <= entry["transfer_error"] <= 2
            assert "validity_margin" in entry
        ts = np.array(res["time_series"]["rows"])
        np.testing.assert_allclose(ts[:, 1] + ts[:, 2], 1, atol=1e-10)

    def test_structural_precondition_reported(self, tmp_path):
        data = dict(GAUSS, t_final=4.0, regimes_to_compare=["adiabatic"])
        code, out = run(tmp_path, "compare", data)
        entry = json.loads((out / "run_comparison.json").read_text())["regimes"]["adiabatic"]
        assert code == 0 and entry["matrix_error"] is None and "initial value" in entry["note"]


SMALL_ATLAS = {"atlas": {"nx": 3, "ny": 2, "x_min": 0.01, "x_max": 0.5, "y_min": 0.01, "y_max": 0.2},
               "output": {"prefix": "m"}}


class TestAtlas:
    def test_outputs(self, tmp_path):
        code, out = run(tmp_path, "atlas", SMALL_ATLAS, "--jobs", "1")
        assert code == 0
        names = sorted(p.name for p in out.iterdir())
        assert len([n for n in names if n.endswith(".csv")]) == 6
        assert len([n for n in names if n.endswith(".svg")]) == 6
        header, rows = read_csv(out / "m_atlas_perturbative.csv")
        assert header == ["x", "y", "error", "transfer_error"] and rows.shape == (6, 4)
        man = json.loads((out / "m_atlas_manifest.json").read_text())
        assert man["invalid_cells"] == 0 and man["atlas"]["nx"] == 3 and "created" in man
        assert man["tau_convention"] and man["units_note"]

    def test_lower_left_both_small(self, tmp_path):
        code, out = run(tmp_path, "atlas", SMALL_ATLAS, "--jobs", "1")
        _, pert = read_csv(out / "m_atlas_perturbative.csv")
        _, kick = read_csv(out / "m_atlas_kicked.csv")
        assert pert[0, 2] < 1e-2 and kick[0, 2] < 1e-2

    def test_deterministic_data_files(self, tmp_path):
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        run(tmp_path / "a", "atlas", SMALL_ATLAS, "--jobs", "1")
        run(tmp_path / "b", "atlas", SMALL_ATLAS, "--jobs", "2")
        for p in (tmp_path / "a/out").iterdir():
            if "manifest" not in p.name:
                assert p.read_bytes() == (tmp_path / "b/out" / p.name).read_bytes()

    def test_invalid_cells_nan(self, tmp_path, monkeypatch):
        from pulsed_qubit import regime_map

        def boom(*a, **k):
            raise RefinementExhaustedError("step refinement exhausted")
        monkeypatch.setattr(regime_map, "refine_to_tolerance", boom)
        code, out = run(tmp_path, "atlas", dict(SMALL_ATLAS, output={"prefix": "m", "svg": False}), "--jobs", "1")
        _, rows = read_csv(out / "m_atlas_kicked.csv")
        assert code == 0 and np.isnan(rows[:, 2]).all()
        assert json.loads((out / "m_atlas_manifest.json").read_text())["invalid_cells"] == 6

    def test_jobs_validated(self, tmp_path):
        code, _ = run(tmp_path, "atlas", SMALL_ATLAS, "--jobs", "0")
        assert code == cli.EXIT_CONFIG


class TestClassify:
    def classify(self, tmp_path, capsys, pulse, de=1.0):
        code, _ = run(tmp_path, "classify", {"system": {"delta_e": de}, "pulse": pulse})
        assert code == 0
        return json.loads(capsys.readouterr().out)

    def test_small_kick(self, tmp_path, capsys):
        r = self.classify(tmp_path, capsys, {"kind": "delta_kick", "alpha_k": 0.05, "t_k": 1})
        assert {"kicked", "perturbative"} <= set(r["applicable"])
        assert r["ratio"] == 0.1 and r["units_note"]

    def test_central(self, tmp_path, capsys):
        tau = 2 * TWO_PI
        sigma = tau / math.sqrt(TWO_PI)
        r = self.classify(tmp_path, capsys, {"kind": "gaussian", "v_peak": TWO_PI / tau, "t_center": 8 * sigma, "sigma": sigma})
        assert r["central"] is True and r["applicable"] == []

    def test_zero_potential_long(self, tmp_path, capsys):
        r = self.classify(tmp_path, capsys, {"kind": "rectangular", "v0": 0, "t_start": 0, "width": 500})
        assert r["applicable"] == ["perturbative", "zero_potential"]


class TestExitCodes:
    def test_config_error(self, tmp_path, capsys):
        code, _ = run(tmp_path, "evolve", {"system": {"delta_e": 1}, "bogus": True})
        err = json.loads(capsys.readouterr().err)
        assert code == cli.EXIT_CONFIG and err["kind"] == "config" and err["exit_code"] == 2

    def test_missing_pulse(self, tmp_path):
        code, _ = run(tmp_path, "evolve", {"system": {"delta_e": 1}})
        assert code == cli.EXIT_CONFIG

    def test_propagation_error(self, tmp_path, capsys, monkeypatch):
        def boom(*a, **k):
            raise RefinementExhaustedError("step refinement exhausted")
        monkeypatch.setattr(cli, "refine_to_tolerance", boom)
        code, _ = run(tmp_path, "evolve", GAUSS)
        assert code == cli.EXIT_PROPAGATION
        assert json.loads(capsys.readouterr().err)["exception"] == "RefinementExhaustedError"

    def test_io_error(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        cfg = write_config(tmp_path / "c.json", GAUSS)
        assert cli.main(["evolve", "--config", cfg, "--out-dir", str(blocker / "sub")]) == cli.EXIT_IO

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["classify", "--config", str(tmp_path / "none.json")]) == cli.EXIT_IO

    def test_module_entry_point(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", {"system": {"delta_e": 1}, "pulse": {"kind": "delta_kick", "alpha_k": 0.1, "t_k": 0}})
        proc = subprocess.run([sys.executable, "-m", "pulsed_qubit.harness", "classify", "--config", cfg],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0 and json.loads(proc.stdout)["coords"]["x"] == 0.1
