import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from spoar.geometry import Ball, Polytope, covering_polytope, lin_opt_gap, unit_square
from spoar.losses import (
    LossError,
    LossKind,
    pointwise_loss_and_grad,
    spo_loss,
    spo_plus_loss,
    spo_plus_subgradient,
)

vec = st.tuples(st.floats(-20, 20), st.floats(-20, 20))
REGIONS = [unit_square(), covering_polytope(), Ball([0.0, 0.0], 1.0), Ball([1.0, -2.0], 0.5)]


def spo_plus_reference(y_hat, y, vertices):
    """Direct evaluation over an explicit vertex list."""
    V = np.asarray(vertices, float)
    vals = V @ y
    w_star = V[np.argmin(vals)]
    return (V @ (y - 2 * y_hat)).max() + 2 * y_hat @ w_star - y @ w_star


@pytest.mark.parametrize("region", REGIONS, ids=lambda r: repr(r))
def test_identity_prediction_zero(region):
    rng = np.random.default_rng(0)
    for _ in range(50):
        y = rng.normal(size=2) * 3
        assert spo_loss(y, y, region) == pytest.approx(0.0, abs=1e-12)
        assert spo_plus_loss(y, y, region) == pytest.approx(0.0, abs=1e-12)


def test_spo_examples():
    assert spo_loss([-1, 1], [1, 1], unit_square()) == 1.0
    # w*(yhat) = (-1,0) costs 0 under y; w*(y) = (0,-1) costs -2
    assert spo_loss([2, 0], [0, 2], Ball([0, 0], 1)) == pytest.approx(2.0)


def test_spo_plus_examples():
    assert spo_plus_loss([-1, 1], [1, 1], unit_square()) == pytest.approx(3.0)
    assert spo_plus_reference(np.array([-1.0, 1]), np.array([1.0, 1]), unit_square().vertices) == 3.0
    assert spo_plus_loss([0, 2], [0, 2], Ball([0, 0], 1)) == pytest.approx(0.0, abs=1e-12)


def test_spo_plus_matches_vertex_reference():
    rng = np.random.default_rng(1)
    sq = unit_square()
    for _ in range(500):
        y_hat, y = rng.normal(size=(2, 2)) * 4
        assert spo_plus_loss(y_hat, y, sq) == pytest.approx(spo_plus_reference(y_hat, y, sq.vertices), abs=1e-9)


def test_subgradient_examples():
    np.testing.assert_array_equal(spo_plus_subgradient([1, 2], [1, 2], covering_polytope()), [0, 0])
    np.testing.assert_array_equal(spo_plus_subgradient([-1, 1], [1, 1], unit_square()), [-2, 0])


def _unique_margin(region, c):
    vals = np.sort(region.vertices @ c)
    return vals[1] - vals[0] if len(vals) > 1 else np.inf


def test_subgradient_finite_differences():
    rng = np.random.default_rng(2)
    h = 1e-6
    checked = 0
    for region in REGIONS:
        while checked < 100 * (REGIONS.index(region) + 1):
            y_hat, y = rng.normal(size=(2, 2)) * 2
            c = 2 * y_hat - y
            if isinstance(region, Polytope):
                if min(_unique_margin(region, c), _unique_margin(region, y)) < 1e-3:
                    continue
            elif np.linalg.norm(c) < 1e-2:
                continue
            g = spo_plus_subgradient(y_hat, y, region)
            fd = np.array([
                (spo_plus_loss(y_hat + h * e, y, region) - spo_plus_loss(y_hat - h * e, y, region)) / (2 * h)
                for e in np.eye(2)
            ])
            np.testing.assert_allclose(g, fd, atol=1e-5)
            checked += 1


@settings(max_examples=300, deadline=None)
@given(vec, vec)
def test_loss_sandwich(y_hat, y):
    for region in REGIONS:
        spo = spo_loss(y_hat, y, region)
        plus = spo_plus_loss(y_hat, y, region)
        assert 0.0 <= spo <= plus + 1e-9 * (1 + abs(plus))
        assert spo <= lin_opt_gap(region, y) + 1e-9


@settings(max_examples=200, deadline=None)
@given(vec, vec, st.floats(0.01, 100))
def test_spo_scale_invariance(y_hat, y, lam):
    # a subnormal prediction can underflow to the zero vector when scaled
    assume(np.any(np.multiply(lam, y_hat) != 0) or not np.any(y_hat))
    for region in (Ball([0, 0], 1.0), Ball([0.3, 0.1], 2.0)):
        a = spo_loss(y_hat, y, region)
        b = spo_loss(np.multiply(lam, y_hat), y, region)
        assert b == pytest.approx(a, rel=1e-7, abs=1e-7)
    # polytopes: skip near-ties, where the tie-break tolerance is not scale invariant
    sq = unit_square()
    if _unique_margin(sq, np.asarray(y_hat, float)) > 1e-6:
        assert spo_loss(np.multiply(lam, y_hat), y, sq) == spo_loss(y_hat, y, sq)


def test_pointwise_examples():
    loss, g = pointwise_loss_and_grad("l2", [1, 2], [0, 0])
    assert loss == 5.0
    np.testing.assert_array_equal(g, [2, 4])
    loss, g = pointwise_loss_and_grad(LossKind.L1, [3, -1], [3, -1])
    assert loss == 0.0
    np.testing.assert_array_equal(g, [0, 0])
    loss, g = pointwise_loss_and_grad("l1", [2, -1], [0, 0])
    assert loss == 3.0
    np.testing.assert_array_equal(g, [1, -1])


def test_dispatch_matches_spo_plus():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        region = REGIONS[rng.integers(len(REGIONS))]
        y_hat, y = rng.normal(size=(2, 2)) * 3
        loss, g = pointwise_loss_and_grad("spo+", y_hat, y, region)
        assert loss == spo_plus_loss(y_hat, y, region)
        np.testing.assert_array_equal(g, spo_plus_subgradient(y_hat, y, region))


def test_spo_dispatch_is_evaluation_only():
    loss, g = pointwise_loss_and_grad("spo", [-1, 1], [1, 1], unit_square())
    assert loss == 1.0 and not g.any()
    with pytest.raises(LossError):
        pointwise_loss_and_grad("spo", [-1, 1], [1, 1], unit_square(), need_grad=True)
    with pytest.raises(LossError):
        pointwise_loss_and_grad("spo_plus", [1, 1], [1, 1])


def test_rejects_nonfinite():
    with pytest.raises(LossError):
        spo_loss([np.nan, 0], [1, 1], unit_square())
    with pytest.raises(LossError):
        spo_plus_loss([0, 0], [np.inf, 1], unit_square())
    with pytest.raises(LossError):
        LossKind.parse("hinge")
