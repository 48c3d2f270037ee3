"""Decision-focused autoregressive forecasting of cost vectors.

Train fixed-memory autoregressive predictors against downstream linear
optimization regret (SPO+), simulate dependent cost trajectories, and
evaluate generalization and calibration bounds for beta-mixing data.
"""
from .analysis import (
    BoundInputs,
    block_split,
    calibration_bound_polyhedral,
    calibration_bound_strongly_convex,
    empirical_rademacher,
    empirical_spo_risk,
    excess_risk_rate,
    generalization_bound,
)
from .armodel import ArModel, LaggedDataset, build_lagged, pacf, predict, select_lag
from .bench import ExperimentConfig, normalized_regret, run_experiment, run_trial, sweep_a12, sweep_deg
from .dynsys import SystemSpec, mixing_proxy, benchmark_system, simulate, spectral_norm, spectral_radius
from .geometry import (
    Ball,
    Polytope,
    covering_polytope,
    lin_opt_gap,
    sample_lin_opt_gap,
    solve_linear,
    unit_square,
)
from .losses import LossKind, spo_loss, spo_plus_loss, spo_plus_subgradient
from .train import TrainConfig, l2_closed_form, train, train_pointwise, train_spo_plus

__version__ = "0.1.0"
