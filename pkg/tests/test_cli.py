import csv
import json

import numpy as np
import pytest

from isac_ee.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, main, parse_values
from isac_ee.model import ConfigError, ScenarioConfig

SMALL = {
    "schema_version": 1, "num_antennas": 4, "num_users": 2, "num_targets": 1,
    "user_aods_deg": [-30.0, 30.0], "target_angles_deg": [0.0], "pathloss_db": -99.0,
    "noise_power_dbm": -80.0, "sinr_thresholds_db": 3.0, "beampattern_thresholds_dbm": 15.0,
    "p_max_dbm": 30.0, "p_c_dbm": 25.0, "amplifier_efficiency": 0.35, "dynamic_power_coeff_dbm": -26.0,
}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL))
    return path


@pytest.fixture(scope="module")
def table1_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("table1")
    assert main(["solve", "-o", str(out)]) == EXIT_OK
    return out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve_outputs(table1_run):
    names = {p.name for p in table1_run.iterdir()}
    assert {"solution.json", "convergence.csv", "beampattern.csv", "metrics.json",
            "beampattern.png", "convergence.png"} <= names
    rows = read_csv(table1_run / "beampattern.csv")
    assert len(rows) == 361 and rows[0]["angle_deg"] == "-90" and rows[-1]["angle_deg"] == "90"
    gains = {float(r["angle_deg"]): float(r["gain_watts"]) for r in rows}
    for theta in (-54.0, -18.0, 18.0, 54.0):
        assert gains[theta] >= 0.1 - 1e-7
    metrics = json.loads((table1_run / "metrics.json").read_text())
    assert metrics["status"] == "OPTIMAL"
    assert set(metrics["power_w"]) == {"transmit", "amplifier", "circuit", "dynamic", "total"}
    assert 1 / metrics["ee"] - 1 / metrics["ee_prime"] == pytest.approx(10 ** -5.6, rel=1e-6)
    conv = read_csv(table1_run / "convergence.csv")
    assert list(conv[0]) == ["iter", "t", "u", "lambda", "gap", "seconds"]


def test_validate_round_trip(table1_run, capsys):
    assert main(["validate", str(table1_run / "solution.json")]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["passed"]


def test_validate_catches_zeroed_beam(table1_run, tmp_path, capsys):
    doc = json.loads((table1_run / "solution.json").read_text())
    doc["beamformers"][0] = [[0.0, 0.0]] * 16
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["validate", str(bad)]) == EXIT_INFEASIBLE
    report = json.loads(capsys.readouterr().out)
    assert report["sinr_slack"][0] < 0


def test_outputs_are_deterministic(table1_run, tmp_path):
    assert main(["solve", "-o", str(tmp_path)]) == EXIT_OK
    for name in ("solution.json", "metrics.json", "beampattern.csv"):
        assert (tmp_path / name).read_bytes() == (table1_run / name).read_bytes()
    # wall-clock seconds are the only column allowed to differ
    a, b = read_csv(tmp_path / "convergence.csv"), read_csv(table1_run / "convergence.csv")
    assert [{k: v for k, v in r.items() if k != "seconds"} for r in a] == \
           [{k: v for k, v in r.items() if k != "seconds"} for r in b]


def test_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "num_antennas": 4,\n}')
    assert main(["solve", "-c", str(bad), "-o", str(tmp_path)]) == EXIT_CONFIG
    assert "bad.json:3:1" in capsys.readouterr().err


def test_config_errors(tmp_path, small_config):
    doc = dict(SMALL, num_users=3)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    assert main(["solve", "-c", str(path), "-o", str(tmp_path)]) == EXIT_CONFIG
    assert main(["solve", "-c", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["sweep", "-c", str(small_config), "--param", "gamma_dbm", "-o", str(tmp_path)]) == EXIT_CONFIG
    assert main(["sweep", "-c", str(small_config), "--param", "bogus", "--values", "1"]) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG


def test_paper_normalization_exit_code(tmp_path, capsys):
    assert main(["solve", "--steering-mode", "PAPER_1_OVER_N", "-o", str(tmp_path)]) == EXIT_INFEASIBLE
    assert "power_lower_bound" in capsys.readouterr().err


def test_sweep_small(tmp_path, small_config):
    assert main(["sweep", "-c", str(small_config), "--param", "tau_db", "--values", "0,3", "60",
                 "-o", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "sweep.csv")
    assert list(rows[0]) == ["param_value", "ee", "ee_prime", "rate", "power", "min_target_gain",
                             "detection_prob", "status", "iters"]
    assert [r["status"] for r in rows] == ["OPTIMAL", "OPTIMAL", "INFEASIBLE_SCENARIO"]
    # both floors are slack here, so the two values agree up to the SCA stopping tolerance
    assert float(rows[0]["ee"]) >= float(rows[1]["ee"]) * (1 - 1e-3)
    assert (tmp_path / "sweep.png").exists()


def test_sweep_parallel_matches_serial(tmp_path, small_config):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["sweep", "-c", str(small_config), "--param", "pmax_dbm", "--values", "28", "30"]
    assert main(args + ["-o", str(a)]) == EXIT_OK
    assert main(args + ["-o", str(b), "--jobs", "2"]) == EXIT_OK
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()


@pytest.mark.parametrize("mode", ["sensing", "dinkelbach", "comm-only"])
def test_baseline_modes(tmp_path, small_config, mode):
    assert main(["baseline", "-c", str(small_config), "--mode", mode, "-o", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "metrics.json").read_text())
    assert doc["mode"] == mode and doc["ee"] > 0


def test_parse_values():
    assert parse_values(["1,2", "3"]) == [1.0, 2.0, 3.0]
    for bad in ([], ["x"], ["nan"]):
        with pytest.raises(ConfigError):
            parse_values(bad)


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "isac_ee", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "solve" in out.stdout
