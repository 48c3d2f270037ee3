"""Fitting the autoregressive lag matrices.

The SPO+ trainer is full-batch matrix subgradient descent: at epoch ``t``

    w~_i = w*(2 M_t z_i - y_i)
    G_i  = 2 (w*(y_i) - w~_i) z_i^T
    M_{t+1} = M_t - alpha_t * mean_i G_i

stopping when ``||M_{t+1} - M_t||_F <= stop_tol``. Adam can replace the plain
step, and an optional minibatch mode splits each epoch into shuffled
batches. The same loop trains the L1 and L2 baselines; L2 also has an exact
least-squares solution (:func:`l2_closed_form`).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .armodel import ArModel, LaggedDataset
from .geometry import FeasibleRegion
from .losses import LossKind, pointwise_batch, spo_plus_batch

__all__ = [
    "TrainConfig",
    "TrainReport",
    "AdamState",
    "TrainingError",
    "DivergenceError",
    "RankDeficientError",
    "adam_step",
    "l2_closed_form",
    "train",
    "train_spo_plus",
    "train_pointwise",
    "empirical_risk",
]


class TrainingError(RuntimeError):
    pass


class DivergenceError(TrainingError):
    pass


class RankDeficientError(TrainingError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    loss: LossKind = LossKind.SPO_PLUS
    step_size: float = 0.01
    schedule: str = "constant"  # or "inv_sqrt_t"
    stop_tol: float = 1e-6
    max_epochs: int = 2000
    optimizer: str = "subgradient"  # or "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    factor_two: bool = True
    batch_size: int | None = None
    closed_form: bool = False
    init_scale: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind.parse(self.loss))
        if not (self.step_size >= 0 and math.isfinite(self.step_size)):
            raise ValueError("step_size must be a finite nonnegative number")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be positive")
        if int(self.max_epochs) != self.max_epochs or self.max_epochs < 1:
            raise ValueError("max_epochs must be a positive integer")
        if self.schedule not in ("constant", "inv_sqrt_t"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.optimizer not in ("subgradient", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss is LossKind.SPO:
            raise ValueError("SPO loss is evaluation-only; train with spo_plus, l1 or l2")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.closed_form and self.loss is not LossKind.L2:
            raise ValueError("closed_form is only available for the L2 loss")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss"] = self.loss.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)

    def replace(self, **kw) -> "TrainConfig":
        return replace(self, **kw)


@dataclass(frozen=True, eq=False)
class TrainReport:
    model: ArModel
    epochs: int
    risk_trace: np.ndarray
    stop_reason: str  # "tolerance" | "max_epochs" | "closed_form"
    last_step: float
    config: TrainConfig | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "epochs": self.epochs,
            "risk_trace": [float(r) for r in self.risk_trace],
            "stop_reason": self.stop_reason,
            "last_step": self.last_step,
            "config": self.config.to_dict() if self.config else None,
        }


@dataclass(frozen=True, eq=False)
class AdamState:
    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params, **kw) -> "AdamState":
        p = np.array(params, dtype=float)
        return cls(params=p, m=np.zeros_like(p), v=np.zeros_like(p), **kw)


def adam_step(state: AdamState, grad, t: int, lr: float | None = None) -> AdamState:
    """One bias-corrected Adam update; ``t`` counts steps from 1."""
    if t < 1:
        raise ValueError("Adam step counter starts at 1")
    g = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(g)):
        raise TrainingError("non-finite gradient passed to Adam")
    lr = state.lr if lr is None else lr
    m = state.beta1 * state.m + (1 - state.beta1) * g
    v = state.beta2 * state.v + (1 - state.beta2) * g * g
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    params = state.params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, params=params, m=m, v=v)


def _loss_fn(cfg: TrainConfig, region: FeasibleRegion | None, targets: np.ndarray):
    """Returns ``f(pred, idx) -> (per-sample loss, per-sample grad in pred)``."""
    if cfg.loss is LossKind.SPO_PLUS:
        if region is None:
            raise ValueError("SPO+ training needs a feasible region")
        if region.dim != targets.shape[1]:
            raise ValueError(f"region dim {region.dim} != data dim {targets.shape[1]}")
        w_true, z_true = region.solve_batch(targets)
        scale = 1.0 if cfg.factor_two else 0.5

        def f(pred, idx):
            loss, g = spo_plus_batch(pred, targets[idx], region, w_true[idx], z_true[idx])
            return loss, scale * g

        return f

    def f(pred, idx):
        return pointwise_batch(cfg.loss, pred, targets[idx])

    return f


def empirical_risk(model: ArModel, dataset: LaggedDataset, kind, region=None) -> float:
    """Mean loss of ``model`` over the dataset (any :class:`LossKind`)."""
    from .losses import spo_loss_batch

    kind = LossKind.parse(kind)
    pred = model.predict_stacked(dataset.windows)
    if kind is LossKind.SPO:
        return float(spo_loss_batch(pred, dataset.targets, region).mean())
    if kind is LossKind.SPO_PLUS:
        return float(spo_plus_batch(pred, dataset.targets, region, grad=False).mean())
    return float(pointwise_batch(kind, pred, dataset.targets)[0].mean())


def _initial_coef(cfg: TrainConfig, d: int, l: int, init: ArModel | None) -> np.ndarray:
    if init is not None:
        if init.dim != d or init.lag != l:
            raise ValueError("initial model shape does not match the dataset")
        return np.array(init.coef)
    rng = np.random.default_rng(cfg.seed)
    return rng.uniform(-cfg.init_scale, cfg.init_scale, size=(d, l * d))


def _fit(dataset: LaggedDataset, cfg: TrainConfig, region, init) -> TrainReport:
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    Z, Y = dataset.windows, dataset.targets
    n, d = Y.shape
    coef = _initial_coef(cfg, d, dataset.lag, init)
    loss_fn = _loss_fn(cfg, region, Y)
    everything = np.arange(n)
    rng = np.random.default_rng([cfg.seed, 1])

    adam = AdamState.init(coef, lr=cfg.step_size, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    step_count = 0
    trace = []
    initial = None
    stop = "max_epochs"
    last_step = math.nan

    for epoch in range(1, cfg.max_epochs + 1):
        risk = float(loss_fn(Z @ coef.T, everything)[0].mean())
        if initial is None:
            initial = risk
        if not math.isfinite(risk) or (initial > 0 and risk > 1e6 * initial):
            raise DivergenceError(f"empirical risk {risk:.3g} at epoch {epoch} (initial {initial:.3g})")
        trace.append(risk)

        alpha = cfg.step_size if cfg.schedule == "constant" else cfg.step_size / math.sqrt(epoch)
        if cfg.batch_size is None or cfg.batch_size >= n:
            batches = [everything]
        else:
            perm = rng.permutation(n)
            batches = [perm[i:i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]

        start = coef
        for idx in batches:
            _, g = loss_fn(Z[idx] @ coef.T, idx)
            # index-ordered reduction, deterministic
            grad = g.T @ Z[idx] / len(idx)
            if cfg.optimizer == "adam":
                step_count += 1
                adam = adam_step(replace(adam, params=coef), grad, step_count, lr=alpha)
                coef = adam.params
            else:
                coef = coef - alpha * grad
        last_step = float(np.linalg.norm(coef - start))
        if not np.all(np.isfinite(coef)):
            raise DivergenceError(f"non-finite coefficients at epoch {epoch}")
        # a zero step size never moves; only max_epochs ends such a run
        if cfg.step_size > 0 and last_step <= cfg.stop_tol:
            stop = "tolerance"
            break

    return TrainReport(model=ArModel(coef), epochs=len(trace), risk_trace=np.array(trace),
                       stop_reason=stop, last_step=last_step, config=cfg)


def train_spo_plus(dataset: LaggedDataset, region: FeasibleRegion, cfg: TrainConfig | None = None,
                   init: ArModel | None = None) -> TrainReport:
    cfg = TrainConfig() if cfg is None else cfg
    if cfg.loss is not LossKind.SPO_PLUS:
        cfg = cfg.replace(loss=LossKind.SPO_PLUS)
    return _fit(dataset, cfg, region, init)


def train_pointwise(dataset: LaggedDataset, cfg: TrainConfig, init: ArModel | None = None) -> TrainReport:
    if cfg.loss not in (LossKind.L1, LossKind.L2):
        raise ValueError(f"train_pointwise handles l1/l2, got {cfg.loss.value}")
    if cfg.closed_form:
        model = l2_closed_form(dataset)
        risk = float(pointwise_batch(LossKind.L2, model.predict_stacked(dataset.windows),
                                     dataset.targets)[0].mean())
        return TrainReport(model=model, epochs=1, risk_trace=np.array([risk]),
                           stop_reason="closed_form", last_step=0.0, config=cfg)
    return _fit(dataset, cfg, None, init)


def train(dataset: LaggedDataset, cfg: TrainConfig, region: FeasibleRegion | None = None,
          init: ArModel | None = None) -> TrainReport:
    """Dispatch on ``cfg.loss``."""
    if cfg.loss is LossKind.SPO_PLUS:
        return train_spo_plus(dataset, region, cfg, init)
    return train_pointwise(dataset, cfg, init)


def l2_closed_form(dataset: LaggedDataset, ridge_fallback: bool = True, ridge: float = 1e-8) -> ArModel:
    """Least-squares lag matrices ``argmin_M sum_k ||y_k - M z_k||^2``.

    A rank-deficient design falls back to ridge regression with penalty
    ``ridge`` unless ``ridge_fallback`` is off.
    """
    Z, Y = dataset.windows, dataset.targets
    p = Z.shape[1]
    if len(Z) >= p and np.linalg.matrix_rank(Z) == p:
        sol, *_ = np.linalg.lstsq(Z, Y, rcond=None)
        return ArModel(sol.T)
    if not ridge_fallback:
        raise RankDeficientError(f"lagged design has rank {np.linalg.matrix_rank(Z)} < {p}")
    sol = np.linalg.solve(Z.T @ Z + ridge * np.eye(p), Z.T @ Y)
    return ArModel(sol.T)
