"""Theory-side computations for dependent (beta-mixing) data.

* independent-block splitting of a trajectory,
* Monte Carlo estimation of the empirical Rademacher complexity of a finite
  set of predictors under the SPO loss,
* the Rademacher generalization bound with the blocking penalty
  ``delta' = delta - 2 m beta(a - l)``,
* calibration-function lower bounds and excess-risk rates for polyhedral and
  strongly convex feasible regions.

Constants that the bounds only assert to exist (``C``, ``alpha``) are inputs,
never defaults.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .armodel import ArModel, build_lagged
from .geometry import FeasibleRegion, Polytope, xi_constant
from .losses import spo_loss_batch

__all__ = [
    "BlockSplit",
    "BoundInputs",
    "BoundResult",
    "RademacherEstimate",
    "InfeasibleConfidenceError",
    "block_split",
    "spo_losses",
    "empirical_spo_risk",
    "empirical_rademacher",
    "delta_prime",
    "generalization_bound",
    "calibration_bound_polyhedral",
    "calibration_bound_strongly_convex",
    "excess_risk_rate",
]


class InfeasibleConfidenceError(ValueError):
    """``delta - 2 m beta(a - l) <= 0``: dependence too strong for the requested confidence."""


@dataclass(frozen=True)
class BlockSplit:
    """Interleaved blocks, 1-based inclusive ``(start, end)`` index pairs.

    The first ``l`` observations are skipped, then consecutive blocks of
    length ``a`` alternate between ``y0_blocks`` and ``y1_blocks``.
    """

    n: int
    a: int
    m: int
    l: int
    y0_blocks: tuple[tuple[int, int], ...]
    y1_blocks: tuple[tuple[int, int], ...]

    def indices(self, which: int = 0) -> np.ndarray:
        """0-based array indices covered by ``Y_0`` (or ``Y_1``)."""
        blocks = self.y0_blocks if which == 0 else self.y1_blocks
        return np.concatenate([np.arange(s - 1, e) for s, e in blocks])


def block_split(n: int, a: int, m: int, l: int) -> BlockSplit:
    if min(a, m) < 1 or l < 0:
        raise ValueError("need a >= 1, m >= 1, l >= 0")
    if 2 * a * m + l != n:
        raise ValueError(f"2*a*m + l = {2 * a * m + l} != n = {n}")
    if a <= l:
        raise ValueError(f"block length a={a} must exceed the lag l={l} so the gap a-l is positive")
    blocks = [(l + j * a + 1, l + (j + 1) * a) for j in range(2 * m)]
    return BlockSplit(n=n, a=a, m=m, l=l, y0_blocks=tuple(blocks[0::2]), y1_blocks=tuple(blocks[1::2]))


def _data(trajectory) -> np.ndarray:
    y = np.asarray(getattr(trajectory, "data", trajectory), dtype=float)
    return y[:, None] if y.ndim == 1 else y


def spo_losses(model: ArModel, trajectory, region: FeasibleRegion, l: int | None = None) -> np.ndarray:
    """SPO losses of one-step predictions for targets ``y_{l+1}..y_n``.

    ``l`` defaults to the model's lag; a larger ``l`` drops the first few
    targets so that models of different memory are scored on the same steps.
    """
    y = _data(trajectory)
    l = model.lag if l is None else l
    if l < model.lag:
        raise ValueError(f"offset l={l} smaller than model lag {model.lag}")
    ds = build_lagged(y, model.lag)
    keep = ds.target_index >= l
    pred = model.predict_stacked(ds.windows[keep])
    return spo_loss_batch(pred, ds.targets[keep], region)


def empirical_spo_risk(model: ArModel, trajectory, region: FeasibleRegion, l: int | None = None) -> float:
    """``(1/(n-l)) sum_{i=l+1..n} loss_SPO(f(y_{i-l..i-1}), y_i)``."""
    return float(spo_losses(model, trajectory, region, l).mean())


@dataclass(frozen=True)
class RademacherEstimate:
    mean: float
    stderr: float
    n_draws: int


def empirical_rademacher(models, trajectory, l: int, region: FeasibleRegion,
                         n_draws: int = 1000, seed: int = 0) -> RademacherEstimate:
    """Monte Carlo estimate of ``E_sigma sup_f (1/(n-l)) sum_i sigma_i loss_SPO(f, i)``.

    The supremum runs over the supplied finite model list. Draws come from a
    seeded generator, so two calls with the same seed and trajectory share
    the same sign vectors.
    """
    models = list(models)
    if not models:
        raise ValueError("need at least one model")
    if n_draws < 100:
        raise ValueError("n_draws must be at least 100")
    losses = np.stack([spo_losses(f, trajectory, region, l) for f in models])
    k = losses.shape[1]
    rng = np.random.default_rng(seed)
    sigma = rng.integers(0, 2, size=(n_draws, k)) * 2.0 - 1.0
    sups = (sigma @ losses.T).max(axis=1) / k
    return RademacherEstimate(mean=float(sups.mean()),
                              stderr=float(sups.std(ddof=1) / math.sqrt(n_draws)),
                              n_draws=n_draws)


@dataclass(frozen=True)
class BoundInputs:
    empirical_risk: float
    rademacher: float
    omega: float
    m: int
    delta: float
    beta_al: float = 0.0
    beta_source: str = "user"  # "user" or "proxy"

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.beta_al < 0:
            raise ValueError("beta(a-l) must be nonnegative")
        if self.m < 1:
            raise ValueError("m must be a positive integer")
        if self.omega < 0:
            raise ValueError("omega must be nonnegative")


@dataclass(frozen=True)
class BoundResult:
    inputs: BoundInputs
    delta_prime: float
    bound: float
    variant: str

    def to_dict(self) -> dict:
        return {"inputs": asdict(self.inputs), "delta_prime": self.delta_prime, "bound": self.bound,
                "variant": self.variant, "beta_source": self.inputs.beta_source}


def delta_prime(delta: float, m: int, beta_al: float) -> float:
    dp = delta - 2 * m * beta_al
    if dp <= 0:
        raise InfeasibleConfidenceError(
            f"delta' = {delta} - 2*{m}*{beta_al:.6g} = {dp:.6g} <= 0; mixing too slow for this confidence"
        )
    return dp


def generalization_bound(inputs: BoundInputs, variant: str = "expected") -> BoundResult:
    """Upper bound on the SPO generalization risk.

    ``expected``:  R_hat + 2 Rad + omega * sqrt(log(2/delta') / (2m))
    ``empirical``: R_hat + 2 Rad_hat + 3 omega * sqrt(log(4/delta') / (2m))
    """
    dp = delta_prime(inputs.delta, inputs.m, inputs.beta_al)
    base = inputs.empirical_risk + 2.0 * inputs.rademacher
    if variant == "expected":
        bound = base + inputs.omega * math.sqrt(math.log(2.0 / dp) / (2 * inputs.m))
    elif variant == "empirical":
        bound = base + 3.0 * inputs.omega * math.sqrt(math.log(4.0 / dp) / (2 * inputs.m))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return BoundResult(inputs=inputs, delta_prime=dp, bound=float(bound), variant=variant)


def calibration_bound_polyhedral(eps: float, region: Polytope, alpha: float) -> float:
    """Lower bound ``alpha Xi_S / (4 sqrt(2 pi) e^3) * min(eps^2 / D_S, eps)``."""
    if eps <= 0 or alpha <= 0:
        raise ValueError("eps and alpha must be positive")
    xi = xi_constant(region)
    D = region.diameter()
    return float(alpha * xi / (4.0 * math.sqrt(2.0 * math.pi) * math.e**3) * min(eps * eps / D, eps))


def calibration_bound_strongly_convex(eps: float, mu: float, L: float, alpha: float) -> float:
    """Lower bound ``alpha mu^(9/2) / (4 L^(9/2)) * eps``."""
    if eps <= 0 or alpha <= 0:
        raise ValueError("eps and alpha must be positive")
    if not 0 < mu <= L:
        raise ValueError("need 0 < mu <= L")
    return float(alpha * (mu / L) ** 4.5 / 4.0 * eps)


def excess_risk_rate(m: int, delta: float, beta_al: float, C: float, region_kind: str) -> float:
    """Excess SPO risk rate, up to the unknown constant ``C``.

    ``C sqrt(log(1/delta')) / m^(1/4)`` for polytopes and ``/ m^(1/2)`` for
    strongly convex level sets (``"ball"``).
    """
    if m < 1:
        raise ValueError("m must be positive")
    dp = delta_prime(delta, m, beta_al)
    power = {"polytope": 0.25, "ball": 0.5, "strongly_convex": 0.5}.get(region_kind)
    if power is None:
        raise ValueError(f"unknown region kind {region_kind!r}")
    return float(C * math.sqrt(math.log(1.0 / dp)) / m**power)
