import csv

import numpy as np
import pytest

from conftest import desk_tau, oracle_tdtsp, raw_arcs, random_graph
from tdroute import ctcp
from tdroute.bounds import (
    bound_pair,
    generate_invariant,
    igp_function,
    igp_travel_time,
    igp_travel_times,
    lower_graph,
    tour_lower,
    write_plot_csv,
)
from tdroute.instgen import GenSpec, generate
from tdroute.pwl import PwlFunction, StepFunction, travel_cost
from tdroute.tdgraph import TdGraph

UNIT6 = StepFunction([0, 1, 2, 3, 4, 5], [2, 1, 2, 1, 2, 1])


@pytest.mark.parametrize(
    "b, c, t, want",
    [
        (StepFunction.constant(1.0), 3.0, 0.0, 3.0),
        (UNIT6, 3.0, 4.0, 2.0),
        (StepFunction([0, 2], [1, 2]), 3.0, 0.0, 2.5),
    ],
)
def test_igp_examples(b, c, t, want):
    assert igp_travel_time(b, c, t) == pytest.approx(want)
    assert igp_travel_times(b, c, t) == pytest.approx(want)


def test_igp_rejects_nonpositive_cost():
    with pytest.raises(ValueError):
        igp_travel_time(UNIT6, 0.0, 1.0)


def test_igp_spends_exactly_c(rng):
    for _ in range(30):
        bt = np.unique(np.round(np.concatenate(([0.0], rng.uniform(0, 8, 5))), 3))
        b = StepFunction(bt, rng.uniform(0.3, 3, bt.size))
        c = float(rng.uniform(0.1, 6))
        t = rng.uniform(-2, 10, 40)
        d = igp_travel_times(b, c, t)
        assert np.allclose(b.integral(t, t + d), c)
        assert np.allclose(d, [igp_travel_time(b, c, x) for x in t])
        f = igp_function(b, c)
        assert f.is_fifo()
        assert np.allclose(f(t), d, atol=1e-9)


def test_generate_invariant_examples():
    g = generate_invariant(3, StepFunction.constant(1.0), 1.0, T=5.0)
    t = np.linspace(-2, 8, 50)
    assert all(np.allclose(tau(t), 1.0) for tau in g.arcs.values())
    g = generate_invariant(3, StepFunction([0, 5], [1, 2]), 4.0)
    tau = g.tau(0, 1)
    assert tau(0) == pytest.approx(4.0) and tau(4) == pytest.approx(2.5)
    assert g.T == 5.0
    with pytest.raises(ValueError):
        generate_invariant(2, UNIT6, 0.0)
    costs = {(0, 1): 1.0, (1, 0): 2.0}
    g = generate_invariant(2, UNIT6, costs)
    assert travel_cost(g.tau(1, 0), UNIT6, 2.3) == pytest.approx(2.0)


def test_desk_lower_graph_is_exact(desk_graph):
    r = ctcp.check(desk_graph, policy="exact")
    la = lower_graph(desk_graph, r)
    y = r.y_star
    assert la.c_underbar[(0, 1)] == pytest.approx(3.0 * y(1.0), rel=1e-9)
    # the approximation is only meant for departures at or after time 0
    t = np.linspace(0, 7, 400)
    assert np.allclose(la.tau_lower(0, 1, t), desk_tau()(t), atol=1e-9)


def test_constant_graph_lower_is_exact():
    arcs = {(0, 1): PwlFunction.constant(2.0), (1, 0): PwlFunction.constant(3.0)}
    g = TdGraph(2, arcs, 10.0)
    la = lower_graph(g, ctcp.check(g))
    for a, tau in g.arcs.items():
        assert la.tau_lower(*a, np.array([0.0, 4.0, 9.0])) == pytest.approx([tau(0)] * 3)


def test_non_invariant_lower_is_strict_somewhere():
    g = TdGraph(2, {(0, 1): PwlFunction.constant(1.0), (1, 0): PwlFunction([0, 2], [1, 3])}, 5.0)
    la = lower_graph(g, ctcp.check(g, policy="exact"))
    t = np.linspace(0, 5, 501)
    gaps = [g.tau(*a)(t) - la.tau_lower(*a, t) for a in g.arcs]
    assert all(np.all(d >= -1e-9) for d in gaps)
    assert max(float(d.max()) for d in gaps) > 1e-3


def test_domination_on_random_graphs(rng):
    for _ in range(10):
        g, _ = random_graph(rng, 3, T=5.0)
        la = lower_graph(g, ctcp.check(g))
        t = np.linspace(0, 8, 300)
        for a, tau in g.arcs.items():
            assert np.all(la.tau_lower(*a, t) <= tau(t) + 1e-9)
            assert la.materialize(*a).is_fifo()


def test_bound_pair_on_invariant_instance():
    b = StepFunction([0, 1, 2.5], [1.0, 2.0, 0.8])
    rng = np.random.default_rng(4)
    g = generate_invariant(5, b, rng.uniform(0.5, 2, (5, 5)).round(2), T=4.0)
    bp = bound_pair(g, lower_graph(g, ctcp.check(g, policy="exact")))
    opt, _ = oracle_tdtsp(raw_arcs(g), 5)
    assert bp.lower == pytest.approx(opt, rel=1e-7)
    assert bp.upper == pytest.approx(opt, rel=1e-9)
    assert bp.gap == pytest.approx(0.0, abs=1e-7)


def test_bound_pair_on_constant_instance():
    rng = np.random.default_rng(5)
    c = rng.uniform(1, 5, (5, 5)).round(2)
    g = TdGraph(5, {(i, j): PwlFunction.constant(c[i, j]) for i in range(5) for j in range(5) if i != j}, 20.0)
    bp = bound_pair(g, lower_graph(g, ctcp.check(g)))
    opt, _ = oracle_tdtsp(raw_arcs(g), 5)
    assert bp.lower == pytest.approx(opt) and bp.upper == pytest.approx(opt)


def test_bound_pair_brackets_optimum():
    for seed in (1, 2):
        g = generate(GenSpec(n=6, pattern="B", delta=0.7, seed=seed))
        la = lower_graph(g, ctcp.check(g))
        bp = bound_pair(g, la)
        opt, _ = oracle_tdtsp(raw_arcs(g), 6)
        assert bp.lower <= opt * (1 + 1e-9) <= bp.upper * (1 + 1e-9)
        assert tour_lower(la, bp.tour, g.t0) == pytest.approx(bp.lower)


def test_plot_csv(tmp_path, desk_graph):
    la = lower_graph(desk_graph, ctcp.check(desk_graph))
    path = tmp_path / "plot.csv"
    write_plot_csv(path, desk_graph, la, samples=11)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["i", "j", "t", "tau", "tau_lower", "cost"]
    assert len(rows) == 12
    assert all(float(r[4]) <= float(r[3]) + 1e-9 for r in rows[1:])
