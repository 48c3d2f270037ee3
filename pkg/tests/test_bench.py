import csv
import io
import json

import numpy as np
import pytest

from spoar.armodel import ArModel
from spoar.bench import (
    DegenerateDenominatorError,
    ExperimentConfig,
    LagPolicy,
    TrialError,
    default_losses,
    normalized_regret,
    benchmark_config,
    run_experiment,
    run_trial,
    sweep_a12,
    sweep_deg,
)
from spoar.dynsys import SystemSpec, simulate
from spoar.geometry import Ball, covering_polytope
from spoar.train import TrainConfig

FAST = {"spo_plus": TrainConfig(optimizer="adam", max_epochs=30), "l2": TrainConfig(loss="l2", closed_form=True)}


def small_cfg(**kw):
    base = dict(q=200, p=50, trials=3, losses=FAST, lag=LagPolicy("fixed", l=1))
    base.update(kw)
    return benchmark_config(deg=2, **base)


def rotating_system():
    """Noiseless deg-1 system: y_{k+1} - y_k = A (y_k - y_{k-1}), exactly an order-2 AR model."""
    th = 0.3
    A = 0.998 * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    return SystemSpec(A=A, Q=np.zeros((2, 2)), deg=1, xi_halfwidth=0.0, x0=[3.0, -2.0], burn_in=0), A


def test_oracle_predictor_zero_regret():
    spec, A = rotating_system()
    y = simulate(spec, 400, 0).data
    oracle = ArModel.from_mats([np.eye(2) + A, -A])
    assert normalized_regret(oracle, y, 300, 100, covering_polytope()) == pytest.approx(0.0, abs=1e-12)


def test_worst_ball_predictor_regret_two():
    # y_t = -lambda_t y_{t-1}: the lag-1 identity model predicts a positive multiple of -y_t
    rng = np.random.default_rng(0)
    y = np.empty((60, 2))
    y[0] = rng.normal(size=2)
    for t in range(1, 60):
        y[t] = -rng.uniform(0.5, 2.0) * y[t - 1]
    ball = Ball([0.0, 0.0], 1.5)
    assert normalized_regret(ArModel.from_mats([np.eye(2)]), y, 10, 50, ball) == pytest.approx(2.0)
    const = np.tile([1.0, -2.0], (20, 1))
    assert normalized_regret(ArModel.from_mats([-np.eye(2)]), const, 5, 15, ball) == pytest.approx(2.0)


def test_regret_guards():
    with pytest.raises(DegenerateDenominatorError):
        normalized_regret(ArModel.zeros(2, 1), np.zeros((20, 2)), 5, 10, Ball([0, 0], 1))
    with pytest.raises(ValueError):
        normalized_regret(ArModel.zeros(2, 1), np.ones((20, 2)), 15, 10, covering_polytope())


def test_trial_determinism_and_single_loss():
    cfg = small_cfg()
    a, b = run_trial(cfg, 1), run_trial(cfg, 1)
    assert a == b
    only = run_trial(small_cfg(losses={"l2": FAST["l2"]}), 0)
    assert list(only.regret) == ["l2"]


def test_noiseless_closed_form_regret():
    spec, _ = rotating_system()
    cfg = ExperimentConfig(system=spec, lag=LagPolicy("fixed", l=2), trials=1,
                           losses={"l2": TrainConfig(loss="l2", closed_form=True)})
    assert run_trial(cfg, 0).regret["l2"] <= 1e-6


def test_single_trial_report():
    cfg = small_cfg(trials=1)
    rep = run_experiment(cfg)
    rec = run_trial(cfg, 0)
    for name in FAST:
        q = rep.quantiles(name)
        assert q["min"] == q["median"] == q["max"] == rec.regret[name]


def test_report_quantiles_and_files(tmp_path):
    rep = run_experiment(small_cfg(trials=5), tmp_path)
    for name in FAST:
        q = rep.quantiles(name)
        assert q["min"] <= q["q25"] <= q["median"] <= q["q75"] <= q["max"]
        assert np.all(rep.regrets(name) >= 0)
        assert q["median"] == np.median(rep.regrets(name))
        shuffled = np.random.default_rng(0).permutation(rep.regrets(name))
        assert np.quantile(shuffled, 0.25) == q["q25"]
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["config"]["trials"] == 5 and set(doc["aggregate"]) == set(FAST)
    rows = list(csv.reader(io.StringIO((tmp_path / "trials.csv").read_text())))
    assert rows[0] == ["trial", "loss", "normalized_regret", "rho", "sigma_max", "deg", "a12"]
    assert len(rows) == 1 + 5 * len(FAST)


def test_experiment_csv_deterministic():
    assert run_experiment(small_cfg()).trials_csv() == run_experiment(small_cfg()).trials_csv()


def test_failed_trial_writes_partial(tmp_path):
    # a constant trajectory has no defined PACF, so lag selection fails
    bad = small_cfg().replace(system=SystemSpec(A=np.zeros((2, 2)), Q=np.zeros((2, 2)), xi_halfwidth=0.0),
                              lag=LagPolicy("pacf", max_lag=2))
    with pytest.raises(TrialError):
        run_experiment(bad, tmp_path)
    assert "error" in json.loads((tmp_path / "partial_report.json").read_text())


def test_sweeps(tmp_path):
    cfg = small_cfg(trials=2)
    reps = sweep_deg(cfg, [2], tmp_path / "deg")
    assert reps[0].trials_csv() == run_experiment(cfg).trials_csv()
    reps = sweep_a12(cfg.replace(system=cfg.system.replace(deg=4)), [0.0, 0.6], tmp_path / "a12")
    assert reps[0].diagnostics["sigma_max"] == pytest.approx(0.8)
    assert reps[1].diagnostics["sigma_max"] == pytest.approx(1.15440, abs=1e-5)
    assert all(r.diagnostics["rho"] == pytest.approx(0.8) for r in reps)
    assert "mixing_proxy" in reps[1].diagnostics
    sweep = json.loads((tmp_path / "a12" / "sweep.json").read_text())
    assert [p["label"] for p in sweep["points"]] == ["a12_0", "a12_0.6"]
    assert (tmp_path / "a12" / "a12_0.6" / "trials.csv").exists()


def test_config_round_trip():
    cfg = benchmark_config(deg=6, a12=0.2)
    back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back.to_dict() == cfg.to_dict()
    assert set(default_losses()) == {"spo_plus", "l2", "l1"}
    assert benchmark_config(full_scale=True).trials == 1000
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        benchmark_config(q=3)


@pytest.mark.slow
def test_benchmark_setting_sanity_envelope():
    cfg = benchmark_config(deg=2, losses={"spo_plus": default_losses()["spo_plus"]}, trials=50)
    regrets = run_experiment(cfg).regrets("spo_plus")
    assert np.all(np.isfinite(regrets))
    assert np.mean(regrets < 1) >= 0.9
