"""Fixed-memory autoregressive predictor and lag selection.

The predictor is ``y_hat_k = sum_{i=1..l} M_i y_{k-i}``. Internally the lag
matrices are kept side by side as one ``d x (l*d)`` matrix acting on the
stacked window ``z_k = [y_{k-1}; y_{k-2}; ...; y_{k-l}]`` (newest first).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ArModel",
    "LaggedDataset",
    "InsufficientDataError",
    "DegenerateSeriesError",
    "predict",
    "build_lagged",
    "pacf",
    "pacf_cutoff",
    "select_lag",
]


class InsufficientDataError(ValueError):
    pass


class DegenerateSeriesError(ValueError):
    """Series variance (or a prediction-error variance) vanished."""


@dataclass(frozen=True, eq=False)
class ArModel:
    """Lag matrices ``M_1..M_l`` stored as a ``d x (l*d)`` block row."""

    coef: np.ndarray

    def __post_init__(self):
        c = np.array(self.coef, dtype=float)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] % c.shape[0]:
            raise ValueError(f"coef must be d x (l*d), got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("ArModel coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coef", c)

    @classmethod
    def from_mats(cls, mats) -> "ArModel":
        mats = [np.asarray(m, dtype=float) for m in mats]
        if not mats:
            raise ValueError("need at least one lag matrix")
        d = mats[0].shape[0]
        for m in mats:
            if m.shape != (d, d):
                raise ValueError(f"every lag matrix must be {d}x{d}, got {m.shape}")
        return cls(np.hstack(mats))

    @classmethod
    def zeros(cls, dim: int, lag: int) -> "ArModel":
        return cls(np.zeros((dim, dim * lag)))

    @property
    def dim(self) -> int:
        return int(self.coef.shape[0])

    @property
    def lag(self) -> int:
        return int(self.coef.shape[1] // self.coef.shape[0])

    @property
    def mats(self) -> list[np.ndarray]:
        d = self.dim
        return [self.coef[:, i * d:(i + 1) * d] for i in range(self.lag)]

    def predict_stacked(self, windows: np.ndarray) -> np.ndarray:
        """Predictions for a ``(k, l*d)`` array of stacked windows."""
        return windows @ self.coef.T

    def to_dict(self) -> dict:
        return {"lag": self.lag, "dim": self.dim, "mats": [m.tolist() for m in self.mats]}

    @classmethod
    def from_dict(cls, d: dict) -> "ArModel":
        model = cls.from_mats(d["mats"])
        if model.lag != int(d["lag"]) or model.dim != int(d["dim"]):
            raise ValueError("lag/dim fields disagree with the matrices")
        return model

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ArModel":
        return cls.from_dict(json.loads(text))


def predict(model: ArModel, window) -> np.ndarray:
    """One-step prediction from the ``l`` most recent observations.

    ``window`` is a sequence of ``l`` vectors, newest first.
    """
    w = np.asarray(window, dtype=float)
    if w.ndim != 2 or w.shape != (model.lag, model.dim):
        raise ValueError(f"window must be {model.lag} vectors of length {model.dim}, got {w.shape}")
    return model.coef @ w.reshape(-1)


@dataclass(frozen=True, eq=False)
class LaggedDataset:
    """Stacked windows and one-step-ahead targets.

    ``windows[i]`` stacks ``y[t-1], ..., y[t-l]`` for ``t = target_index[i]``
    (0-based indices into the source trajectory).
    """

    windows: np.ndarray
    targets: np.ndarray
    target_index: np.ndarray
    lag: int

    def __len__(self):
        return len(self.targets)

    @property
    def dim(self) -> int:
        return int(self.targets.shape[1])


def build_lagged(trajectory, l: int) -> LaggedDataset:
    y = np.asarray(getattr(trajectory, "data", trajectory), dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if l < 1:
        raise ValueError("lag must be a positive integer")
    n = len(y)
    if n <= l:
        raise InsufficientDataError(f"need more than {l} observations, got {n}")
    idx = np.arange(l, n)
    # column block j holds y[t-1-j]
    windows = np.concatenate([y[l - 1 - j:n - 1 - j] for j in range(l)], axis=1)
    return LaggedDataset(windows=windows, targets=y[l:].copy(), target_index=idx, lag=l)


def _autocov(x: np.ndarray, max_lag: int) -> np.ndarray:
    n = len(x)
    xc = x - x.mean()
    return np.array([xc[: n - k] @ xc[k:] / n for k in range(max_lag + 1)])


def pacf(series, max_lag: int, rtol: float = 1e-8) -> np.ndarray:
    """Partial autocorrelations at lags ``1..max_lag``.

    Durbin-Levinson recursion on the biased sample autocovariances. Raises
    :class:`DegenerateSeriesError` when the series is constant or when the
    one-step prediction-error variance collapses (relative to the series
    variance) before ``max_lag`` is reached, as it does for a noiseless
    linear recursion. Both the Toeplitz error variance and the in-sample
    residual variance of the fitted recursion are checked; the latter catches
    non-stationary deterministic sequences such as ``0.9**k``.
    """
    x = np.asarray(series, dtype=float).reshape(-1)
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if len(x) <= max_lag + 1:
        raise InsufficientDataError(f"series of length {len(x)} too short for max_lag={max_lag}")
    gamma = _autocov(x, max_lag)
    if gamma[0] <= 0 or not np.isfinite(gamma[0]):
        raise DegenerateSeriesError("series has zero variance")
    rho = gamma / gamma[0]
    xc = x - x.mean()

    out = np.empty(max_lag)
    phi = np.zeros(0)
    v = 1.0
    for k in range(1, max_lag + 1):
        a = (rho[k] - phi @ rho[k - 1:0:-1]) / v
        phi = np.concatenate([phi - a * phi[::-1], [a]])
        out[k - 1] = a
        v *= 1.0 - a * a
        if k < max_lag and (v <= rtol or _residual_var(xc, phi) <= rtol * gamma[0]):
            raise DegenerateSeriesError(
                f"prediction-error variance vanished after lag {k}; series is (nearly) deterministic"
            )
    return out


def _residual_var(xc: np.ndarray, phi: np.ndarray) -> float:
    k = len(phi)
    n = len(xc)
    pred = sum(phi[i] * xc[k - 1 - i:n - 1 - i] for i in range(k))
    return float(np.var(xc[k:] - pred))


def pacf_cutoff(values: np.ndarray, n: int, confidence: float = 1.96) -> int:
    """Lag after which the PACF drops inside the ``confidence/sqrt(n)`` band.

    Returns the number of leading significant lags (0 if lag 1 is already
    insignificant).
    """
    band = confidence / np.sqrt(n)
    inside = np.abs(values) <= band
    return int(np.argmax(inside)) if inside.any() else len(values)


def select_lag(trajectory, max_lag: int, confidence: float = 1.96) -> int:
    """Memory length from per-coordinate PACF cutoffs.

    The largest coordinate cutoff wins, floored at 1.
    """
    y = np.asarray(getattr(trajectory, "data", trajectory), dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    n = len(y)
    if n < 10 * max_lag:
        raise InsufficientDataError(f"need at least {10 * max_lag} observations for max_lag={max_lag}")
    cut = max(pacf_cutoff(pacf(y[:, j], max_lag), n, confidence) for j in range(y.shape[1]))
    return max(1, cut)
