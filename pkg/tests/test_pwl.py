import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DESK, desk_tau, random_fifo_points
from tdroute.pwl import FifoError, PwlFunction, StepFunction, cost_breakpoints, cost_function, travel_cost

UNIT6 = StepFunction([0, 1, 2, 3, 4, 5], [2, 1, 2, 1, 2, 1])


@pytest.mark.parametrize("t, v", [(4.5, 2.5), (7.0, 3.0), (2.0, 2.0), (-3.0, 2.0)])
def test_eval(t, v):
    assert desk_tau()(t) == pytest.approx(v)


@pytest.mark.parametrize("t, a", [(0.0, 2.0), (4.5, 7.0), (3.0, 5.0)])
def test_arrival(t, a):
    assert desk_tau().arrival(t) == pytest.approx(a)


@pytest.mark.parametrize("a, t", [(2.0, 0.0), (4.0, 2.0), (1.0, -1.0), (9.0, 6.0)])
def test_arrival_inverse(a, t):
    assert desk_tau().arrival_inverse(a) == pytest.approx(t)


def test_arrival_rejects_non_fifo():
    f = PwlFunction([0, 1], [3, 1])  # slope -2
    assert not f.is_fifo()
    with pytest.raises(FifoError):
        f.arrival(0.5)
    with pytest.raises(FifoError):
        f.arrival_inverse(2.0)


def test_constructor_validation():
    with pytest.raises(ValueError):
        PwlFunction([], [])
    with pytest.raises(ValueError):
        PwlFunction([0, 0], [1, 2])
    with pytest.raises(ValueError):
        PwlFunction([0, 1], [1])
    with pytest.raises(ValueError):
        StepFunction([0, 1], [1, 0])
    with pytest.raises(ValueError):
        StepFunction([1, 0], [1, 1])


def test_simplified_and_from_points():
    f = PwlFunction([0, 1, 2, 3], [1, 2, 3, 3])
    # the trailing flat piece is implied by clamping
    assert f.simplified() == PwlFunction([0, 2], [1, 3])
    assert PwlFunction([0, 1], [2, 2]).simplified() == PwlFunction.constant(2.0)
    g = PwlFunction.from_points([(2, 3), (0, 1), (1, 2), (1 + 1e-12, 5)])
    assert g == PwlFunction([0, 2], [1, 3])


def test_minimum_maximum():
    f = desk_tau()
    assert f.minimum() == 2.0
    assert f.maximum() == 3.0
    assert f.minimum(4.5, 10) == pytest.approx(2.5)
    assert f.maximum(0, 4.5) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        f.minimum(2, 1)


def test_step_function_evaluation():
    b = StepFunction([0, 2], [1, 2])
    assert b(-5) == 1 and b(1.999) == 1 and b(2) == 2 and b(100) == 2
    assert b.cumulative(3) == pytest.approx(4.0)
    assert b.cumulative(-1) == pytest.approx(-1.0)
    for c in (-2.0, 0.5, 2.0, 7.0):
        assert b.cumulative(b.cumulative_inverse(c)) == pytest.approx(c)
    assert StepFunction.on_grid([0, 1, 2], [1, 1, 3]) == StepFunction([0, 2], [1, 3])


@pytest.mark.parametrize(
    "b, t, cost",
    [
        (StepFunction.constant(1.0), 1.7, 2.0),
        (UNIT6, 0.0, 3.0),
        (UNIT6, 4.5, 3.0),
    ],
)
def test_travel_cost(b, t, cost):
    assert travel_cost(desk_tau(), b, t) == pytest.approx(cost)


def test_desk_cost_is_constant_on_horizon():
    t = np.linspace(0, 5, 1001)
    assert np.allclose(travel_cost(desk_tau(), UNIT6, t), 3.0, atol=1e-12)


def test_cost_breakpoints_examples():
    bp = cost_breakpoints(desk_tau(), UNIT6)
    assert bp[(bp > 0) & (bp < 5)].size == 0
    bp = cost_breakpoints(desk_tau(), StepFunction.constant(1.0))
    assert np.allclose(bp[(bp > 0) & (bp < 5)], [4.0])
    tau = PwlFunction(*zip(*DESK))
    bp_c = cost_breakpoints(tau, StepFunction.constant(2.5))
    assert np.allclose(bp_c, bp)


def _quadrature_cost(points, rates_t, rates_v, t, m=20000):
    """Midpoint-rule integral of the step rate over the traversal."""
    ts, vs = zip(*points)
    a = t + np.interp(t, ts, vs)
    u = t + (np.arange(m) + 0.5) * (a - t) / m
    idx = np.clip(np.searchsorted(rates_t, u, side="right") - 1, 0, len(rates_t) - 1)
    return float(np.sum(np.asarray(rates_v)[idx]) * (a - t) / m)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_cost_function_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    pts = random_fifo_points(rng, 6.0)
    tau = PwlFunction(*zip(*pts))
    bt = np.unique(np.round(np.concatenate(([0.0], rng.uniform(0, 6, 4))), 3))
    bv = rng.uniform(0.5, 3.0, bt.size)
    b = StepFunction(bt, bv)
    f = cost_function(tau, b)
    for t in rng.uniform(-1, 8, 8):
        exact = travel_cost(tau, b, t)
        assert f(t) == pytest.approx(exact, rel=1e-9, abs=1e-9)
        assert exact == pytest.approx(_quadrature_cost(pts, bt, bv, t), rel=1e-3)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_arrival_is_increasing_and_invertible(seed):
    rng = np.random.default_rng(seed)
    tau = PwlFunction(*zip(*random_fifo_points(rng, 6.0)))
    t = np.sort(rng.uniform(-3, 9, 50))
    a = tau.arrival(t)
    assert np.all(np.diff(a) > 0)
    assert np.allclose(tau.arrival_inverse(a), t, atol=1e-9)
