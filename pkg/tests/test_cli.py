import json

import pytest

from aoii_smdp.cli import EXIT_BATTERY_FAILED, EXIT_CONFIG, EXIT_IO, EXIT_VALIDATION, main
from aoii_smdp.cycle_model import smdp_parameters
from aoii_smdp.experiments import scenario_two

FAST = ["--horizon", "10000", "--replications", "3"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, json.loads(out.strip().splitlines()[-1]), err


def test_solve_smoke(capsys, tmp_path):
    code, doc, _ = run(capsys, "solve", "--scenario", "scenario2", "--lambda", "1.0", "--out", str(tmp_path))
    assert code == 0 and len(doc["policy"]) == 3
    saved = json.loads((tmp_path / "solve_scenario2.json").read_text())
    assert saved["policy"] == doc["policy"]
    assert (tmp_path / "solve_scenario2_thresholds.csv").read_text().startswith("j,tau\n1,")


def test_solve_rejects_bad_row(capsys, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"scenario": {"Q": [[0.5, 0.6], [0.3, 0.7]], "penalties": [[0, 1], [0, 1]],
                                            "gamma": [1.0], "G": [[0.2]]}}))
    code, doc, _ = run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path))
    assert code == EXIT_VALIDATION
    assert doc["error"] == "RowSumViolation" and "row 0" in doc["message"]


def test_solve_boundary_warning(capsys, tmp_path):
    code, doc, err = run(capsys, "solve", "--scenario", "scenario2", "--lambda", "5", "--tau-max", "2",
                         "--out", str(tmp_path))
    assert code == 0
    assert "tau_max=2" in err and doc["warnings"]


def test_simulate_smoke_and_repeatable(capsys, tmp_path):
    args = ["simulate", "--scenario", "scenario2", "--policy", "uniform:2", "--lambda", "1", *FAST]
    code, doc, _ = run(capsys, *args, "--out", str(tmp_path / "a"))
    assert code == 0 and doc["avg_cost"] > 0
    run(capsys, *args, "--out", str(tmp_path / "b"))
    a = (tmp_path / "a" / "simulate_scenario2.json").read_bytes()
    assert a == (tmp_path / "b" / "simulate_scenario2.json").read_bytes()


def test_simulate_bad_policy(capsys, tmp_path):
    code, doc, _ = run(capsys, "simulate", "--policy", "rs:1.5", *FAST, "--out", str(tmp_path))
    assert code == EXIT_VALIDATION and doc["error"] == "InvalidPolicy"


def test_simulate_trace(capsys, tmp_path):
    code, doc, _ = run(capsys, "simulate", "--policy", "multi:1,2,3", *FAST, "--trace", "t/trace.csv",
                       "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "t" / "trace.csv").read_text().splitlines()
    assert lines[0].startswith("clock,X,X_hat") and len(lines) == 10_001
    code, doc, _ = run(capsys, "simulate", *FAST, "--trace", "../escape.csv", "--out", str(tmp_path))
    assert code == EXIT_CONFIG


def test_seed_precedence(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("AOII_SEED", "99")
    _, doc, _ = run(capsys, "simulate", *FAST, "--out", str(tmp_path))
    assert json.loads((tmp_path / "simulate_scenario2.json").read_text())["seed"] == 99
    run(capsys, "simulate", *FAST, "--seed", "5", "--out", str(tmp_path))
    assert json.loads((tmp_path / "simulate_scenario2.json").read_text())["seed"] == 5


def test_sweep_outputs(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"xi_grid": [0.5, 1.0], "lambda_grid": [0, 1]}))
    code, doc, _ = run(capsys, "sweep", "--scenario", "scenario1", "--config", str(cfg), "--tau-max", "5", *FAST,
                       "--out", str(tmp_path))
    assert code == 0 and len(doc["files"]) == 2
    assert (tmp_path / "scenario1_thresholds.csv").exists()
    code, doc, _ = run(capsys, "sweep", "--config", str(cfg), "--policies", "smdp,st", "--tau-max", "5", *FAST,
                       "--out", str(tmp_path))
    text = (tmp_path / "scenario2_sweep.csv").read_text()
    assert "rs_sim_cost" not in text and "st_sim_cost" in text


def test_sweep_bad_grid(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"lambda_grid": ["zero", 1]}))
    code, doc, _ = run(capsys, "sweep", "--config", str(cfg), "--out", str(tmp_path))
    assert code == EXIT_CONFIG and doc["error"] == "ConfigError"


def test_config_errors(capsys, tmp_path):
    code, doc, _ = run(capsys, "solve", "--scenario", "nope", "--out", str(tmp_path))
    assert code == EXIT_CONFIG
    code, doc, _ = run(capsys, "solve", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path))
    assert code == EXIT_IO


def test_validate_too_few_cycles(capsys, tmp_path):
    code, doc, _ = run(capsys, "validate", "--cycles", "100", "--out", str(tmp_path))
    assert code == EXIT_VALIDATION and doc["error"] == "MinimumSampleSize"


def test_validate_names_corrupted_cell(capsys, tmp_path):
    sc = scenario_two()
    p = smdp_parameters(sc.source, sc.channel, 5)
    text = p.to_csv().splitlines()
    # j=3, tau=2: bump the age cost
    row = next(i for i, ln in enumerate(text) if ln.startswith("3,2,"))
    cols = text[row].split(",")
    cols[2] = repr(float(cols[2]) + 5.0)
    text[row] = ",".join(cols)
    path = tmp_path / "params.csv"
    path.write_text("\n".join(text) + "\n")
    code, doc, err = run(capsys, "validate", "--cycles", "20000", "--params-csv", str(path), "--out", str(tmp_path))
    assert code == EXIT_BATTERY_FAILED
    assert "j=3,tau=2,a" in doc["failed"]
    assert "FAIL" in err
