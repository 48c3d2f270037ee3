"""
Linear oracles and decision losses
==================================

A decision w is picked by minimizing a linear cost over a feasible set S.
Here S is either a vertex-listed polytope or a Euclidean ball.
"""
import numpy as np

from spoar import Ball, covering_polytope, lin_opt_gap, solve_linear, spo_loss, spo_plus_loss, unit_square

square = unit_square()
print(square.vertices)

# the oracle scans vertices; ties go to the lexicographically smallest one
res = solve_linear(square, [0.0, 1.0])
print("argmin", res.minimizer, "value", res.value)

# for a ball the minimizer is on the boundary, opposite the cost
ball = Ball([0.0, 0.0], 1.0)
print(solve_linear(ball, [0.0, 2.0]))

# SPO loss: how much worse the decision from a prediction is under the true cost
y_hat, y = np.array([-1.0, 1.0]), np.array([1.0, 1.0])
print("SPO  ", spo_loss(y_hat, y, square))
print("SPO+ ", spo_plus_loss(y_hat, y, square))

# SPO never exceeds the spread of the objective over S
region = covering_polytope()
rng = np.random.default_rng(0)
pairs = rng.normal(size=(1000, 2, 2))
worst = max(spo_loss(a, b, region) / max(lin_opt_gap(region, b), 1e-12) for a, b in pairs)
print("max SPO / gap over 1000 random pairs:", round(worst, 6))
