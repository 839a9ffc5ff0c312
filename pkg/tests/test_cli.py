"""Config validation, emit round-trips, and end-to-end CLI runs."""

import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from nelsonlab.cli import (
    ConfigError,
    config_hash,
    emit,
    main,
    parse_config,
    read_rows,
)


MINIMAL_BATH = {
    "gamma2": 0.01, "c_w": 1.0, "tau_bar": 1.0, "n_collisions": 100,
}


class TestParseConfig:
    def test_minimal_bath_fills_defaults(self):
        cfg = parse_config(json.dumps(MINIMAL_BATH), "bath")
        assert cfg["bath_kind"] == "isotropic-fixed-speed"
        assert cfg["mode"] == "physical"
        assert cfg["burn_in"] == 0.1
        assert cfg["v0"] == [0.0, 0.0, 0.0]
        assert cfg["target_correlation"] is None

    def test_range_error_names_field(self):
        bad = dict(MINIMAL_BATH, gamma2=-1.0)
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(bad), "bath")
        assert any("gamma2" in p for p in err.value.problems)

    def test_unknown_key_rejected(self):
        bad = dict(MINIMAL_BATH, colour="blue")
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(bad), "bath")
        assert any("colour" in p and "unknown" in p for p in err.value.problems)

    def test_syntax_error_reports_position(self):
        with pytest.raises(ConfigError) as err:
            parse_config("{\n  \"gamma2\": ,\n}", "bath")
        assert "line 2" in err.value.problems[0]

    def test_all_violations_listed(self):
        bad = {"gamma2": -1.0, "c_w": 0.0, "n_collisions": -3, "colour": 1}
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(bad), "bath")
        text = "\n".join(err.value.problems)
        for token in ("gamma2", "c_w", "n_collisions", "colour", "tau_bar"):
            assert token in text

    def test_physics_parameters_have_no_defaults(self):
        for key in ("gamma2", "c_w", "tau_bar", "n_collisions"):
            partial = {k: v for k, v in MINIMAL_BATH.items() if k != key}
            with pytest.raises(ConfigError) as err:
                parse_config(json.dumps(partial), "bath")
            assert any(key in p and "missing" in p for p in err.value.problems)

    def test_nelson_wave_requirements(self):
        cfg = {
            "wave": {"kind": "harmonic_ground_state", "mass": 1.0, "eta": 1.0},
            "potential": {"kind": "harmonic"},
            "tau_bar": 1.0, "n_particles": 10, "t0": 0.0, "t1": 1.0,
            "dt": 0.001,
        }
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(cfg), "nelson")
        text = "\n".join(err.value.problems)
        assert "wave.omega" in text
        assert "potential.omega" in text

    def test_collide_requires_exactly_one_source(self):
        with pytest.raises(ConfigError):
            parse_config("{}", "collide")
        with pytest.raises(ConfigError):
            parse_config(json.dumps({"events": [], "input": "x.csv"}),
                         "collide")


HEAD_ON_EVENT = {
    "M": 4.0, "m": 1.0, "phi": [1.0, 0.0, 0.0],
    "v1": [1.0, 0.0, 0.0], "w1": [-1.0, 0.0, 0.0],
}


class TestEmit:
    # Values chosen to stress 17-digit round-tripping.
    ROWS = [
        {"a": 1.0 / 3.0, "b": 1e-17, "c": -2.5, "n": 7, "flag": True,
         "name": "x"},
        {"a": math.pi, "b": float("nan"), "c": 1e300, "n": -1, "flag": False,
         "name": "y"},
    ]
    META = {"tool": "nelsonlab", "seed": 42}

    def test_csv_round_trip_is_bit_exact(self, tmp_path):
        path = tmp_path / "out.csv"
        emit(self.ROWS, "csv", str(path), self.META)
        meta, rows = read_rows(str(path))
        assert meta["tool"] == "nelsonlab"
        for got, want in zip(rows, self.ROWS):
            for key, value in want.items():
                if isinstance(value, float) and math.isnan(value):
                    assert math.isnan(got[key])
                elif isinstance(value, float):
                    assert got[key] == value  # bit-for-bit at 17 digits
                else:
                    assert got[key] == value

    def test_json_round_trip(self, tmp_path):
        path = tmp_path / "out.json"
        emit(self.ROWS, "json", str(path), self.META)
        meta, rows = read_rows(str(path))
        assert meta["seed"] == 42
        assert rows[0]["a"] == 1.0 / 3.0
        assert math.isnan(rows[1]["b"])

    def test_formats_carry_identical_numbers(self, tmp_path):
        p_csv = tmp_path / "o.csv"
        p_json = tmp_path / "o.json"
        emit(self.ROWS, "csv", str(p_csv), self.META)
        emit(self.ROWS, "json", str(p_json), self.META)
        _, csv_rows = read_rows(str(p_csv))
        _, json_rows = read_rows(str(p_json))
        for a, b in zip(csv_rows, json_rows):
            for key in a:
                if isinstance(a[key], float) and math.isnan(a[key]):
                    assert math.isnan(b[key])
                else:
                    assert a[key] == b[key]

    def test_empty_rows_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit([], "csv", str(path), self.META)
        text = path.read_text()
        assert text.startswith("# tool=nelsonlab")
        assert text.endswith("\n")
        assert len([l for l in text.splitlines() if not l.startswith("#")]) == 0

    def test_trailing_newline(self, tmp_path):
        for fmt in ("csv", "json"):
            path = tmp_path / f"t.{fmt}"
            emit(self.ROWS, fmt, str(path), self.META)
            assert path.read_text().endswith("\n")

    def test_config_hash_stable(self):
        a = config_hash({"x": 1.0}, 42, "bath")
        b = config_hash({"x": 1.0}, 42, "bath")
        c = config_hash({"x": 2.0}, 42, "bath")
        assert a == b and a != c


class TestEndToEnd:
    def _run(self, tmp_path, subcommand, config, *extra):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        out = tmp_path / "out.csv"
        code = main([subcommand, "--config", str(cfg_path),
                     "--output", str(out), "--quiet", *extra])
        return code, out

    def test_collide_head_on_row(self, tmp_path):
        code, out = self._run(tmp_path, "collide",
                              {"events": [HEAD_ON_EVENT]})
        assert code == 0
        meta, rows = read_rows(str(out))
        row = rows[0]
        assert_allclose(row["v2_x"], 0.2, atol=1e-12)
        assert_allclose(row["w2_x"], 2.2, atol=1e-12)
        assert_allclose(row["ledger_total"], 1.25, rtol=1e-12)
        assert meta["seed"] == "42"  # documented default, never wall clock

    def test_collide_from_csv_input(self, tmp_path):
        src = tmp_path / "events.csv"
        src.write_text(
            "M,m,phi_x,phi_y,phi_z,v1_x,v1_y,v1_z,w1_x,w1_y,w1_z\n"
            "4.0,1.0,1,0,0,1,0,0,-1,0,0\n")
        code, out = self._run(tmp_path, "collide", {"input": str(src)})
        assert code == 0
        _, rows = read_rows(str(out))
        assert_allclose(rows[0]["v2_x"], 0.2, atol=1e-12)

    def test_bath_summary_columns(self, tmp_path):
        config = dict(MINIMAL_BATH, n_collisions=2000)
        code, out = self._run(tmp_path, "bath", config, "--mode", "paper")
        assert code == 0
        _, rows = read_rows(str(out))
        assert rows[0]["mode"] == "paper"
        assert rows[0]["n"] == 2000
        assert rows[0]["energy_ratio"] > 0

    def test_bath_equilibration_column(self, tmp_path):
        config = dict(MINIMAL_BATH, n_collisions=100_000)
        code, out = self._run(tmp_path, "bath", config, "--mode", "paper")
        assert code == 0
        _, rows = read_rows(str(out))
        assert 0.95 <= rows[0]["energy_ratio"] <= 1.05

    def test_bath_trajectory_rows(self, tmp_path):
        config = dict(MINIMAL_BATH, n_collisions=20, trajectory=True)
        code, out = self._run(tmp_path, "bath", config)
        assert code == 0
        _, rows = read_rows(str(out))
        assert len(rows) == 21
        assert rows[0]["t"] == 0.0

    def test_nelson_energy_series_and_histogram(self, tmp_path):
        config = {
            "wave": {"kind": "harmonic_ground_state", "mass": 1.0,
                     "eta": 1.0, "omega": 1.0},
            "potential": {"kind": "matched"},
            "tau_bar": 2.0, "n_particles": 4000, "t0": 0.0, "t1": 0.2,
            "dt": 0.001, "n_snapshots": 3, "dump_histogram": True,
        }
        code, out = self._run(tmp_path, "nelson", config)
        assert code == 0
        _, rows = read_rows(str(out))
        assert len(rows) == 3
        # 0.5 ground energy plus the 3 eta / tau_bar constant.
        assert abs(rows[0]["energy"] - 2.0) < 0.05
        _, hist = read_rows(str(tmp_path / "out_hist.csv"))
        dens = [r["density"] for r in hist if r["snapshot"] == 0]
        centers = [r["bin_center"] for r in hist if r["snapshot"] == 0]
        width = centers[1] - centers[0]
        assert abs(sum(dens) * width - 1.0) < 1e-9

    def test_minkowski_report(self, tmp_path):
        config = {"gamma2": 0.01, "c_w": 1.0, "n_events": 20_000}
        code, out = self._run(tmp_path, "minkowski", config)
        assert code == 0
        _, rows = read_rows(str(out))
        row = rows[0]
        assert row["identity_gap"] < 1e-12
        assert abs(row["statistical_residual"]) < 4 * row["statistical_se"]
        assert row["frame_residual_max"] < 1e-12

    def test_selftest_subset_exit_zero(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"criteria": [1, 2, 3, 11]}))
        out = tmp_path / "self.csv"
        code = main(["selftest", "--config", str(cfg_path),
                     "--output", str(out)])
        assert code == 0
        text = capsys.readouterr().out
        assert text.count("PASS") >= 4
        _, rows = read_rows(str(out))
        assert all(r["passed"] for r in rows)

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text(json.dumps({"gamma2": -2.0}))
        code = main(["bath", "--config", str(cfg_path),
                     "--output", str(tmp_path / "x.csv"), "--quiet"])
        assert code == 2
        err = capsys.readouterr().err
        payload = json.loads(err)
        assert payload["error"]["kind"] == "config"
        assert any("gamma2" in p for p in payload["error"]["problems"])

    def test_missing_config_for_bath(self, tmp_path):
        code = main(["bath", "--output", str(tmp_path / "x.csv"), "--quiet"])
        assert code == 2


class TestDeterminism:
    def test_identical_runs_byte_identical(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(dict(MINIMAL_BATH, n_collisions=5000)))
        outs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            assert main(["bath", "--config", str(cfg), "--seed", "7",
                         "--output", str(out), "--quiet"]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_minkowski_workers_byte_identical(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(
            {"gamma2": 0.05, "c_w": 1.0, "n_events": 10_000}))
        outs = []
        for name, workers in (("w1.csv", "1"), ("w4.csv", "4")):
            out = tmp_path / name
            assert main(["minkowski", "--config", str(cfg), "--seed", "11",
                         "--output", str(out), "--workers", workers,
                         "--quiet"]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_seed_changes_output(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(dict(MINIMAL_BATH, n_collisions=500)))
        blobs = []
        for seed in ("1", "2"):
            out = tmp_path / f"s{seed}.csv"
            assert main(["bath", "--config", str(cfg), "--seed", seed,
                         "--output", str(out), "--quiet"]) == 0
            blobs.append(out.read_bytes())
        assert blobs[0] != blobs[1]
