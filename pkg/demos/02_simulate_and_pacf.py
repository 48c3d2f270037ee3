"""
Simulating costs and picking a lag
==================================

Costs come from a stable two-state linear system observed through an
elementwise power, with one multiplicative noise factor per step.
"""
import numpy as np

from spoar import benchmark_system, pacf, select_lag, simulate, spectral_norm, spectral_radius

spec = benchmark_system(deg=2)
print("A =", spec.A.tolist())
print("rho(A) =", spectral_radius(spec.A), " sigma_max(A) =", round(spectral_norm(spec.A), 5))

traj = simulate(spec, 1300, seed=7)
y = traj.data
print(y.shape, "mean", y.mean(axis=0).round(3))

# even powers keep every cost above 0.5 * (1 - xi_halfwidth)
print("min entry", y.min().round(4), ">=", 0.5 * (1 - spec.xi_halfwidth))

# partial autocorrelations per coordinate, with the 95% white-noise band
band = 1.96 / np.sqrt(len(y))
for j in range(2):
    print(f"y{j + 1} pacf", pacf(y[:, j], 6).round(3), "band", round(band, 3))

print("selected lag:", select_lag(y[:1000], max_lag=5))

# the coupling a12 changes sigma_max but never the spectral radius
for a12 in (0.0, 0.3, 0.6):
    A = benchmark_system(a12=a12).A
    print(f"a12={a12}: rho={spectral_radius(A):.3f} sigma_max={spectral_norm(A):.5f}")
