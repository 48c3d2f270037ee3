"""Experiment harness: simulate, train per loss, score normalized SPO regret.

A trial draws one trajectory of length ``q + p`` from the configured system,
picks the memory length on the first ``q`` steps, trains one predictor per
configured loss on those steps, and scores one-step-ahead decisions on the
following ``p`` steps (each prediction sees the true preceding observations).

Every trial's randomness derives from ``(master seed, trial index)``, so
results are independent of worker count and execution order.
"""
from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._io import atomic_write_json, atomic_write_text
from .armodel import ArModel, build_lagged, select_lag
from .dynsys import SystemSpec, derive_seed, mixing_proxy, benchmark_system, simulate, spectral_norm, spectral_radius
from .geometry import FeasibleRegion, covering_polytope, region_from_dict
from .losses import spo_loss_batch
from .train import TrainConfig, train

__all__ = [
    "LagPolicy",
    "ExperimentConfig",
    "TrialRecord",
    "RegretReport",
    "ExperimentError",
    "TrialError",
    "DegenerateDenominatorError",
    "normalized_regret",
    "run_trial",
    "run_experiment",
    "sweep_deg",
    "sweep_a12",
    "default_losses",
    "benchmark_config",
    "BENCH_DEGS",
    "BENCH_A12",
]

BENCH_DEGS = (2, 4, 6, 8)
BENCH_A12 = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
CSV_COLUMNS = ("trial", "loss", "normalized_regret", "rho", "sigma_max", "deg", "a12")


class ExperimentError(RuntimeError):
    pass


class TrialError(ExperimentError):
    def __init__(self, trial: int, cause: Exception):
        super().__init__(f"trial {trial} failed: {type(cause).__name__}: {cause}")
        self.trial = trial
        self.cause = cause


class DegenerateDenominatorError(ValueError):
    pass


@dataclass(frozen=True)
class LagPolicy:
    policy: str = "pacf"  # "pacf" or "fixed"
    l: int = 1
    max_lag: int = 5
    confidence: float = 1.96

    def __post_init__(self):
        if self.policy not in ("pacf", "fixed"):
            raise ValueError(f"unknown lag policy {self.policy!r}")
        if self.l < 1 or self.max_lag < 1:
            raise ValueError("lags must be positive")

    def choose(self, train_data: np.ndarray) -> int:
        if self.policy == "fixed":
            return self.l
        return select_lag(train_data, self.max_lag, self.confidence)

    @property
    def upper(self) -> int:
        return self.l if self.policy == "fixed" else self.max_lag


def default_losses() -> dict[str, TrainConfig]:
    """Adam-trained SPO+, least-squares and absolute-loss predictors."""
    common = dict(optimizer="adam", step_size=0.01, max_epochs=500, stop_tol=1e-6)
    return {
        "spo_plus": TrainConfig(loss="spo_plus", **common),
        "l2": TrainConfig(loss="l2", **common),
        "l1": TrainConfig(loss="l1", **common),
    }


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    system: SystemSpec = field(default_factory=benchmark_system)
    region: FeasibleRegion = field(default_factory=covering_polytope)
    q: int = 1000
    p: int = 300
    lag: LagPolicy = field(default_factory=LagPolicy)
    losses: dict = field(default_factory=default_losses)
    trials: int = 50
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.system.dim != self.region.dim:
            raise ValueError(f"system dim {self.system.dim} != region dim {self.region.dim}")
        if self.q <= self.lag.upper:
            raise ValueError("q must exceed the (maximal) lag")
        if self.p < 1 or self.trials < 1:
            raise ValueError("p and trials must be positive")
        if not self.losses:
            raise ValueError("configure at least one loss")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")

    def replace(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "system": self.system.to_dict(),
            "region": self.region.to_dict(),
            "q": self.q, "p": self.p,
            "lag": vars(self.lag).copy(),
            "losses": {k: v.to_dict() for k, v in self.losses.items()},
            "trials": self.trials, "seed": self.seed, "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"system", "region", "q", "p", "lag", "losses", "trials", "seed", "jobs"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown experiment fields: {sorted(extra)}")
        kw = {k: d[k] for k in ("q", "p", "trials", "seed", "jobs") if k in d}
        if "system" in d:
            kw["system"] = SystemSpec.from_dict(d["system"])
        if "region" in d:
            kw["region"] = region_from_dict(d["region"])
        if "lag" in d:
            kw["lag"] = LagPolicy(**d["lag"])
        if "losses" in d:
            kw["losses"] = {name: TrainConfig.from_dict(c) for name, c in d["losses"].items()}
        return cls(**kw)


FULL_SCALE_TRIALS = 1000


def benchmark_config(deg: int = 8, a12: float = 0.5, full_scale: bool = False, **kw) -> ExperimentConfig:
    """Benchmark setting; desk scale (50 trials) unless ``full_scale`` (1000 trials)."""
    kw.setdefault("trials", FULL_SCALE_TRIALS if full_scale else 50)
    return ExperimentConfig(system=benchmark_system(deg=deg, a12=a12), **kw)


def normalized_regret(model: ArModel, trajectory, q: int, p: int, region: FeasibleRegion) -> float:
    """Total test SPO loss over total absolute optimal cost, test steps ``q+1..q+p``."""
    y = np.asarray(getattr(trajectory, "data", trajectory), dtype=float)
    if len(y) < q + p:
        raise ValueError(f"trajectory has {len(y)} steps, need q + p = {q + p}")
    if q < model.lag:
        raise ValueError("q must be at least the model lag")
    ds = build_lagged(y[:q + p], model.lag)
    keep = ds.target_index >= q
    targets = ds.targets[keep]
    _, z = region.solve_batch(targets)
    den = float(np.abs(z).sum())
    if den < 1e-9:
        raise DegenerateDenominatorError("sum of |optimal cost| over the test horizon is ~0")
    num = float(spo_loss_batch(model.predict_stacked(ds.windows[keep]), targets, region, z_true=z).sum())
    return num / den


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    lag: int
    regret: dict  # loss name -> normalized regret
    epochs: dict
    stop_reason: dict

    def to_dict(self) -> dict:
        return vars(self).copy()


def run_trial(cfg: ExperimentConfig, trial_index: int) -> TrialRecord:
    seed = derive_seed(cfg.seed, trial_index)
    try:
        traj = simulate(cfg.system, cfg.q + cfg.p, seed).data
        train_part = traj[:cfg.q]
        l = cfg.lag.choose(train_part)
        ds = build_lagged(train_part, l)
        regret, epochs, stops = {}, {}, {}
        for k, (name, tc) in enumerate(cfg.losses.items()):
            rep = train(ds, tc.replace(seed=derive_seed(seed, k + 1)), cfg.region)
            regret[name] = normalized_regret(rep.model, traj, cfg.q, cfg.p, cfg.region)
            epochs[name] = rep.epochs
            stops[name] = rep.stop_reason
    except Exception as exc:
        raise TrialError(trial_index, exc) from exc
    return TrialRecord(trial=trial_index, seed=seed, lag=l, regret=regret, epochs=epochs, stop_reason=stops)


def _summary(values) -> dict:
    v = np.asarray(values, dtype=float)
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {"min": float(q[0]), "q25": float(q[1]), "median": float(q[2]), "q75": float(q[3]),
            "max": float(q[4]), "mean": float(v.mean())}


@dataclass(frozen=True, eq=False)
class RegretReport:
    config: ExperimentConfig
    records: tuple
    runtime: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def losses(self) -> list[str]:
        return list(self.config.losses)

    def regrets(self, loss: str) -> np.ndarray:
        return np.array([r.regret[loss] for r in self.records])

    def quantiles(self, loss: str) -> dict:
        return _summary(self.regrets(loss))

    def median(self, loss: str) -> float:
        return self.quantiles(loss)["median"]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "diagnostics": self.diagnostics,
            "aggregate": {name: self.quantiles(name) for name in self.losses},
            "trials": [r.to_dict() for r in self.records],
            "runtime_seconds": self.runtime,
        }

    def csv_rows(self):
        d = self.diagnostics
        for r in self.records:
            for name in self.losses:
                yield [r.trial, name, repr(float(r.regret[name])), repr(d["rho"]), repr(d["sigma_max"]),
                       d["deg"], repr(d["a12"])]

    def trials_csv(self) -> str:
        return _csv_text([self])

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        atomic_write_json(out / "report.json", self.to_dict())
        atomic_write_text(out / "trials.csv", self.trials_csv())


def _csv_text(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        w.writerows(rep.csv_rows())
    return buf.getvalue()


def _diagnostics(cfg: ExperimentConfig) -> dict:
    A = cfg.system.A
    rho = spectral_radius(A)
    diag = {
        "rho": rho,
        "sigma_max": spectral_norm(A),
        "deg": cfg.system.deg,
        "a12": float(A[0, 1]) if A.shape[0] > 1 else 0.0,
        "xi_halfwidth": cfg.system.xi_halfwidth,
    }
    if rho < 1:
        diag["mixing_proxy"] = {str(k): mixing_proxy(A, k) for k in (1, 5, 10, 20)}
        diag["mixing_proxy_note"] = "proxy rho(A)**k, c=1; not an estimate of beta(k)"
    return diag


def _run_one(args):
    cfg, i = args
    return run_trial(cfg, i)


def run_experiment(cfg: ExperimentConfig, out_dir=None, jobs: int | None = None) -> RegretReport:
    """Run all trials and aggregate; writes ``report.json``/``trials.csv`` when ``out_dir`` is given.

    If a trial fails, the completed trials are written to
    ``partial_report.json`` and :class:`ExperimentError` is raised.
    """
    jobs = cfg.jobs if jobs is None else jobs
    start = time.perf_counter()
    records = []
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for rec in pool.map(_run_one, [(cfg, i) for i in range(cfg.trials)]):
                    records.append(rec)
        else:
            for i in range(cfg.trials):
                records.append(run_trial(cfg, i))
    except TrialError as exc:
        if out_dir is not None:
            partial = {"config": cfg.to_dict(), "completed": [r.to_dict() for r in records], "error": str(exc)}
            atomic_write_json(Path(out_dir) / "partial_report.json", partial)
        raise
    report = RegretReport(config=cfg, records=tuple(records), runtime=time.perf_counter() - start,
                          diagnostics=_diagnostics(cfg))
    if out_dir is not None:
        report.write(out_dir)
    return report


def _sweep(cfgs, labels, out_dir, jobs):
    reports = []
    for cfg, label in zip(cfgs, labels):
        sub = None if out_dir is None else Path(out_dir) / label
        reports.append(run_experiment(cfg, sub, jobs))
    if out_dir is not None:
        atomic_write_text(Path(out_dir) / "trials.csv", _csv_text(reports))
        summary = [{"label": lab, "diagnostics": r.diagnostics,
                    "aggregate": {n: r.quantiles(n) for n in r.losses}} for lab, r in zip(labels, reports)]
        atomic_write_json(Path(out_dir) / "sweep.json", {"base_config": cfgs[0].to_dict(), "points": summary})
    return reports


def sweep_deg(cfg: ExperimentConfig, degs=BENCH_DEGS, out_dir=None, jobs: int | None = None) -> list[RegretReport]:
    """One report per observer degree."""
    cfgs = [cfg.replace(system=cfg.system.replace(deg=int(d))) for d in degs]
    return _sweep(cfgs, [f"deg_{int(d)}" for d in degs], out_dir, jobs)


def sweep_a12(cfg: ExperimentConfig, values=BENCH_A12, out_dir=None, jobs: int | None = None) -> list[RegretReport]:
    """One report per coupling ``A[0, 1]``; diagnostics carry rho, sigma_max and the mixing proxy."""
    cfgs = []
    for a in values:
        A = np.array(cfg.system.A)
        A[0, 1] = a
        cfgs.append(cfg.replace(system=cfg.system.replace(A=A.tolist())))
    return _sweep(cfgs, [f"a12_{a:g}" for a in values], out_dir, jobs)


def available_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1
