import json
import subprocess
import sys
from pathlib import Path

import pytest

from spoar.cli import build_parser, main, _experiment_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
FAST = ["--set", "q=200", "--set", "p=50", "--set", 'lag={"policy": "fixed", "l": 1}',
        "--set", "losses.spo_plus.max_epochs=20", "--set", "losses.l1.max_epochs=20",
        "--set", "losses.l2.max_epochs=20"]


@pytest.fixture
def traj(tmp_path):
    path = tmp_path / "traj.csv"
    assert main(["generate", "--config", str(CONFIGS / "sys.json"), "--n", "1300", "--seed", "7",
                 "--out", str(path)]) == 0
    return path


def test_generate_rows(traj):
    lines = traj.read_text().splitlines()
    assert lines[0] == "t,y1,y2" and len(lines) == 1301
    side = json.loads(Path(str(traj) + ".json").read_text())
    assert side["seed"] == 7 and side["spec"]["deg"] == 2 and side["spec"]["xi_halfwidth"] == 0.25


def test_generate_rerun_identical(traj, tmp_path):
    again = tmp_path / "again.csv"
    main(["generate", "--config", str(CONFIGS / "sys.json"), "--n", "1300", "--seed", "7", "--out", str(again)])
    assert again.read_bytes() == traj.read_bytes()


def test_generate_override(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["generate", "--n", "10", "--set", "deg=4", "--out", str(out)]) == 0
    assert json.loads(Path(str(out) + ".json").read_text())["spec"]["deg"] == 4


def test_train_and_eval(traj, tmp_path):
    model = tmp_path / "model.json"
    assert main(["train", "--config", str(CONFIGS / "bench_deg8.json"), *FAST, "--trajectory", str(traj),
                 "--q", "1000", "--loss", "spo_plus", "--out", str(model)]) == 0
    doc = json.loads(model.read_text())
    assert doc["config"]["q"] == 200 and doc["lag"] == 1
    assert doc["report"]["config"]["loss"] == "spo_plus"
    out = tmp_path / "eval.json"
    assert main(["eval", "--config", str(CONFIGS / "bench_deg8.json"), "--trajectory", str(traj),
                 "--model", str(model), "--q", "1000", "--p", "300", "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["normalized_regret"] >= 0 and res["p"] == 300 and "config" in res


def test_experiment_writes_reports(tmp_path):
    out = tmp_path / "exp"
    assert main(["experiment", "--config", str(CONFIGS / "bench_deg8.json"), *FAST, "--trials", "2",
                 "--jobs", "1", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["config"]["trials"] == 2 and rep["config"]["system"]["deg"] == 8
    assert (out / "trials.csv").read_text().startswith("trial,loss,normalized_regret")


def test_sweeps(tmp_path):
    assert main(["sweep-deg", *FAST, "--trials", "1", "--jobs", "1", "--degs", "2,4", "--out", str(tmp_path / "d")]) == 0
    assert (tmp_path / "d" / "deg_4" / "report.json").exists()
    assert main(["sweep-a12", *FAST, "--set", "system.deg=8", "--trials", "1", "--jobs", "1",
                 "--values", "0,0.6", "--out", str(tmp_path / "a")]) == 0
    points = json.loads((tmp_path / "a" / "sweep.json").read_text())["points"]
    assert points[0]["diagnostics"]["sigma_max"] == pytest.approx(0.8)


def test_bounds(tmp_path, capsys):
    assert main(["bounds", "--inputs", str(CONFIGS / "bounds.json")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["beta_source"] == "proxy" and doc["delta_prime"] < 0.1
    assert main(["bounds", "--inputs", str(CONFIGS / "bounds_infeasible.json")]) == 2
    assert "InfeasibleConfidenceError" in capsys.readouterr().err


def test_blocks(capsys):
    assert main(["blocks", "--n", "9", "--a", "2", "--m", "2", "--l", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["y0_blocks"] == [[2, 3], [6, 7]] and doc["y1_blocks"] == [[4, 5], [8, 9]]
    assert main(["blocks", "--n", "10", "--a", "2", "--m", "2", "--l", "1"]) == 1


def test_pacf(traj, capsys):
    assert main(["pacf", "--trajectory", str(traj), "--max-lag", "4"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["coordinates"]) == 2 and len(doc["coordinates"][0]["pacf"]) == 4
    assert 1 <= doc["selected_lag"] <= 4


def test_validation_errors(tmp_path):
    assert main(["frobnicate"]) == 1
    assert main(["blocks", "--n", "9", "--bogus"]) == 1
    assert main(["experiment", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["generate", "--config", str(bad), "--n", "5"]) == 1
    assert main(["experiment", "--set", "trials=0"]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "spoar", "blocks", "--n", "2", "--a", "1", "--m", "1", "--l", "0"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["y1_blocks"] == [[2, 2]]


def test_full_scale_flag():
    parse = build_parser().parse_args
    assert _experiment_config(parse(["experiment", "--full-scale"])).trials == 1000
    assert _experiment_config(parse(["experiment", "--full-scale", "--trials", "3"])).trials == 3
    assert _experiment_config(parse(["experiment"])).trials == 50
