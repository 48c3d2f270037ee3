"""
Evaluating the generalization bound
===================================

Split a trajectory into interleaved blocks, estimate the empirical
Rademacher complexity over a small model set, and plug everything into
the bound. The mixing coefficient is replaced by the rho(A)**k proxy.
"""
import numpy as np

from spoar import (ArModel, BoundInputs, TrainConfig, block_split, build_lagged, covering_polytope,
                   empirical_rademacher, empirical_spo_risk, generalization_bound, mixing_proxy, benchmark_system,
                   sample_lin_opt_gap, simulate, train)

a, m, l = 50, 10, 1
n = 2 * a * m + l
split = block_split(n, a, m, l)
print("first Y0 blocks", split.y0_blocks[:2], "first Y1 blocks", split.y1_blocks[:2])

spec = benchmark_system(deg=2)
y = simulate(spec, n, seed=3).data
region = covering_polytope()
model = train(build_lagged(y, l), TrainConfig(optimizer="adam", max_epochs=500), region).model

rng = np.random.default_rng(0)
family = [model] + [ArModel(model.coef + rng.normal(scale=0.1, size=model.coef.shape)) for _ in range(20)]
rad = empirical_rademacher(family, y, l, region, n_draws=500)
print(f"Rademacher estimate {rad.mean:.4f} +- {rad.stderr:.4f}")

beta = mixing_proxy(spec.A, a - l)
inputs = BoundInputs(empirical_spo_risk(model, y, region, l), rad.mean, sample_lin_opt_gap(region, y),
                     m, 0.1, beta, "proxy")
for variant in ("expected", "empirical"):
    res = generalization_bound(inputs, variant)
    print(variant, "bound", round(res.bound, 4), "delta'", round(res.delta_prime, 6))

# long-run risk of the same model on a fresh run
long_run = empirical_spo_risk(model, simulate(spec, 50_000, seed=99).data, region)
print("long-run SPO risk", round(long_run, 4))
