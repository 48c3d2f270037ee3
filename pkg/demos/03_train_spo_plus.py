"""
Training against decision regret
================================

Fit lag matrices with SPO+ and with least squares, then compare the
normalized regret on the 300 steps after the training window.
"""
from spoar import (TrainConfig, build_lagged, covering_polytope, l2_closed_form, normalized_regret,
                   benchmark_system, select_lag, simulate, train)

region = covering_polytope()
traj = simulate(benchmark_system(deg=8), 1300, seed=11)
q, p = 1000, 300

l = select_lag(traj.data[:q], max_lag=5)
ds = build_lagged(traj.data[:q], l)
print("lag", l, "training pairs", len(ds))

cfg = TrainConfig(optimizer="adam", step_size=0.01, max_epochs=500)
spo = train(ds, cfg, region)
print("SPO+ epochs", spo.epochs, spo.stop_reason, "risk", spo.risk_trace[0].round(4), "->", spo.risk_trace[-1].round(4))

ls = l2_closed_form(ds)

print("normalized regret  SPO+:", round(normalized_regret(spo.model, traj, q, p, region), 4))
print("normalized regret  L2  :", round(normalized_regret(ls, traj, q, p, region), 4))
