"""Decision losses (SPO, SPO+) and pointwise regression losses (L1, L2).

All functions take a predicted cost ``y_hat`` and the realized cost ``y``.
Batched variants operate row-wise on ``(k, d)`` arrays and are what the
training loops use; the scalar functions are thin wrappers.

Note on the SPO+ subgradient: the true subgradient is
``2 (w*(y) - w*(2 y_hat - y))``. The literal batch update of the fixed-memory
training algorithm drops the factor 2; :mod:`spoar.train` exposes that
variant through ``TrainConfig.factor_two=False`` (the factor is absorbed by
the step size).
"""
from __future__ import annotations

import enum

import numpy as np

from .geometry import FeasibleRegion, GeometryError

__all__ = [
    "LossKind",
    "LossError",
    "spo_loss",
    "spo_plus_loss",
    "spo_plus_subgradient",
    "spo_loss_batch",
    "spo_plus_batch",
    "pointwise_loss_and_grad",
    "pointwise_batch",
]


class LossError(ValueError):
    pass


class LossKind(str, enum.Enum):
    SPO = "spo"
    SPO_PLUS = "spo_plus"
    L1 = "l1"
    L2 = "l2"

    @classmethod
    def parse(cls, value) -> "LossKind":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("+", "_plus").replace("-", "_")
        if key == "spoplus":
            key = "spo_plus"
        try:
            return cls(key)
        except ValueError:
            raise LossError(f"unknown loss {value!r}") from None


def _pair(y_hat, y, dim=None):
    y_hat = np.asarray(y_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    if y_hat.shape != y.shape:
        raise LossError(f"shape mismatch: {y_hat.shape} vs {y.shape}")
    if dim is not None and y.shape[-1] != dim:
        raise GeometryError(f"expected dimension {dim}, got {y.shape[-1]}")
    if not (np.all(np.isfinite(y_hat)) and np.all(np.isfinite(y))):
        raise LossError("NaN or Inf in loss inputs")
    return y_hat, y


def spo_loss_batch(y_hat, y, region: FeasibleRegion, z_true=None) -> np.ndarray:
    """Row-wise ``y^T w*(y_hat) - y^T w*(y)``."""
    y_hat, y = _pair(np.atleast_2d(y_hat), np.atleast_2d(y), region.dim)
    w_hat, _ = region.solve_batch(y_hat)
    if z_true is None:
        _, z_true = region.solve_batch(y)
    # clip tiny negative round-off; the loss is nonnegative by definition
    return np.maximum(np.einsum("ij,ij->i", y, w_hat) - z_true, 0.0)


def spo_plus_batch(y_hat, y, region: FeasibleRegion, w_true=None, z_true=None, grad=True):
    """Row-wise SPO+ loss and (optionally) its subgradient in ``y_hat``.

    ``max_S (y - 2 y_hat)^T w = -min_S (2 y_hat - y)^T w``, so a single oracle
    call at ``2 y_hat - y`` gives both the loss and the subgradient.
    """
    y_hat, y = _pair(np.atleast_2d(y_hat), np.atleast_2d(y), region.dim)
    if w_true is None or z_true is None:
        w_true, z_true = region.solve_batch(y)
    w_tilde, z_tilde = region.solve_batch(2.0 * y_hat - y)
    loss = -z_tilde + 2.0 * np.einsum("ij,ij->i", y_hat, w_true) - z_true
    if not grad:
        return loss
    return loss, 2.0 * (w_true - w_tilde)


def spo_loss(y_hat, y, region: FeasibleRegion) -> float:
    """Decision regret of acting on ``y_hat`` when the cost is ``y``."""
    y_hat, y = _pair(y_hat, y, region.dim)
    return float(spo_loss_batch(y_hat[None], y[None], region)[0])


def spo_plus_loss(y_hat, y, region: FeasibleRegion) -> float:
    """Convex surrogate ``max_S (y - 2 y_hat)^T w + 2 y_hat^T w*(y) - y^T w*(y)``."""
    y_hat, y = _pair(y_hat, y, region.dim)
    return float(spo_plus_batch(y_hat[None], y[None], region, grad=False)[0])


def spo_plus_subgradient(y_hat, y, region: FeasibleRegion) -> np.ndarray:
    """``2 (w*(y) - w*(2 y_hat - y))``; the gradient wherever that argmin is unique."""
    y_hat, y = _pair(y_hat, y, region.dim)
    return spo_plus_batch(y_hat[None], y[None], region)[1][0]


def pointwise_batch(kind: LossKind, y_hat, y):
    """Row-wise L1/L2 loss and subgradient. L2 carries no 1/2 factor."""
    kind = LossKind.parse(kind)
    y_hat, y = _pair(np.atleast_2d(y_hat), np.atleast_2d(y))
    r = y_hat - y
    if kind is LossKind.L2:
        return (r**2).sum(axis=1), 2.0 * r
    if kind is LossKind.L1:
        # np.sign(0) == 0: minimal-norm subgradient
        return np.abs(r).sum(axis=1), np.sign(r)
    raise LossError(f"{kind.value} is not a pointwise loss")


def pointwise_loss_and_grad(kind, y_hat, y, region: FeasibleRegion | None = None,
                            need_grad: bool = False):
    """Dispatch a loss by kind and return ``(loss, subgradient)``.

    SPO has no usable gradient; its gradient slot is a zero vector and
    ``need_grad=True`` raises instead.
    """
    kind = LossKind.parse(kind)
    y_hat, y = _pair(y_hat, y)
    if kind in (LossKind.SPO, LossKind.SPO_PLUS) and region is None:
        raise LossError(f"{kind.value} loss needs a feasible region")
    if kind is LossKind.SPO:
        if need_grad:
            raise LossError("SPO loss is evaluation-only and has no training gradient")
        return spo_loss(y_hat, y, region), np.zeros_like(y)
    if kind is LossKind.SPO_PLUS:
        loss, g = spo_plus_batch(y_hat[None], y[None], region)
        return float(loss[0]), g[0]
    loss, g = pointwise_batch(kind, y_hat[None], y[None])
    return float(loss[0]), g[0]
