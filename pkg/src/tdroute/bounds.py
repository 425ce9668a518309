"""Lower-approximation graph built from a unit-cost step function, and the bound pair.

Every arc gets the constant cost ``c_min``, the smallest cost of traversing it
under ``b`` for departures at or after time 0 (earlier ones never occur).  The travel time that spends exactly ``c_min`` from any start is
never longer than the real one, and because all arcs of the resulting graph
have constant cost its quickest tour is a plain ATSP on ``c_min``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .assignment import solve_atsp
from .ctcp import CtcpResult
from .pwl import EPS_TIME, PwlFunction, StepFunction, cost_function, travel_cost
from .tdgraph import Arc, TdGraph, tour_duration

# c_min is shaved by this relative amount so round-off can never push the
# approximation above the true travel time
SAFETY = 1e-12


def igp_travel_time(b: StepFunction, c: float, t: float) -> float:
    """Time needed to accumulate cost ``c`` under rate ``b`` when starting at ``t``."""
    if c <= 0:
        raise ValueError("cost must be positive")
    times, rates = b.times, b.values
    start = float(t)
    k = int(b._index(start))
    d = float(c)
    arrive = start + d / rates[k]
    cur = start
    nxt = times[k + 1] if k + 1 < times.size else np.inf
    while arrive > nxt:
        d -= rates[k] * (nxt - cur)
        cur = nxt
        k += 1
        arrive = cur + d / rates[k]
        nxt = times[k + 1] if k + 1 < times.size else np.inf
    return arrive - start


def igp_travel_times(b: StepFunction, c, t):
    """Vectorised ``igp_travel_time`` through the cumulative integral of ``b``."""
    t = np.asarray(t, dtype=float)
    out = np.asarray(b.cumulative_inverse(np.asarray(b.cumulative(t)) + c)) - t
    return float(out) if out.ndim == 0 else out


def igp_function(b: StepFunction, c: float) -> PwlFunction:
    """Exact piecewise-linear form of ``t -> igp_travel_time(b, c, t)``.

    Kinks occur where the start or the arrival crosses a rate change; outside
    them the function is constant, which matches the clamped evaluation.
    """
    starts = np.asarray(b.times, dtype=float)
    back = np.atleast_1d(b.cumulative_inverse(np.asarray(b.cumulative(starts)) - c))
    t = np.unique(np.concatenate((starts, back)))
    t = t[np.concatenate(([True], np.diff(t) > EPS_TIME))]
    return PwlFunction(t, np.atleast_1d(igp_travel_times(b, c, t))).simplified()


@dataclass(frozen=True, eq=False)
class LowerApproxGraph:
    base: TdGraph
    b: StepFunction
    c_underbar: Mapping[Arc, float]

    def tau_lower(self, i: int, j: int, t):
        return igp_travel_times(self.b, self.c_underbar[(i, j)], t)

    def materialize(self, i: int, j: int) -> PwlFunction:
        return igp_function(self.b, self.c_underbar[(i, j)])

    def as_graph(self) -> TdGraph:
        g = self.base
        arcs = {a: self.materialize(*a) for a in g.arcs}
        return TdGraph(g.n, arcs, g.T, g.t0, g.required_vertices, g.required_arcs)

    def cost_matrix(self) -> np.ndarray:
        n = self.base.n
        c = np.full((n, n), np.inf)
        for (i, j), v in self.c_underbar.items():
            c[i, j] = v
        return c

    def path_lower(self, path: Sequence[int], t: float) -> float:
        """Duration of ``path`` on the approximation, arc by arc."""
        z = 0.0
        for i, j in zip(path[:-1], path[1:]):
            z += self.tau_lower(i, j, t + z)
        return z


def min_cost(tau: PwlFunction, b: StepFunction, lo: float = 0.0) -> float:
    """Smallest travel cost for departures at or after ``lo``."""
    return cost_function(tau, b).minimum(lo, np.inf)


def lower_graph(g: TdGraph, ctcp: CtcpResult) -> LowerApproxGraph:
    b = ctcp.y_star
    c = {a: min_cost(tau, b) * (1.0 - SAFETY) for a, tau in g.arcs.items()}
    return LowerApproxGraph(g, b, c)


@dataclass(frozen=True)
class BoundPair:
    lower: float
    upper: float
    tour: list[int]

    @property
    def gap(self) -> float:
        """Relative gap ``(upper - lower) / upper``."""
        return (self.upper - self.lower) / self.upper if self.upper > 0 else 0.0


def bound_pair(
    g: TdGraph,
    la: LowerApproxGraph,
    atsp_solve: Callable = solve_atsp,
    t0: float | None = None,
) -> BoundPair:
    start = g.t0 if t0 is None else t0
    tour, _ = atsp_solve(la.cost_matrix())
    lower = la.path_lower(list(tour) + [tour[0]], start)
    upper = tour_duration(g, tour, start)
    return BoundPair(lower=float(min(lower, upper)), upper=float(upper), tour=list(tour))


def generate_invariant(n: int, b: StepFunction, costs, T: float | None = None, t0: float = 0.0) -> TdGraph:
    """Complete graph whose arcs all have constant cost under ``b`` (a yes-instance).

    ``costs`` is a scalar, an ``n x n`` array or a mapping ``(i, j) -> cost``.
    """
    if T is None:
        T = float(b.times[-1]) if b.times[-1] > 0 else 1.0
    if isinstance(costs, Mapping):
        get = lambda i, j: costs[(i, j)]  # noqa: E731
    else:
        arr = np.asarray(costs, dtype=float)
        get = (lambda i, j: float(arr)) if arr.ndim == 0 else (lambda i, j: float(arr[i, j]))
    arcs = {}
    for i in range(n):
        for j in range(n):
            if i != j:
                c = get(i, j)
                if not c > 0:
                    raise ValueError(f"cost of arc ({i},{j}) must be positive")
                arcs[(i, j)] = igp_function(b, c)
    return TdGraph(n, arcs, T, t0)


def plot_rows(g: TdGraph, la: LowerApproxGraph, samples: int = 200):
    """Per-arc samples ``(i, j, t, tau, tau_lower, cost)`` over the horizon."""
    t = np.linspace(0.0, g.T, samples)
    for (i, j), tau in g.arcs.items():
        tl = np.atleast_1d(la.tau_lower(i, j, t))
        tv = np.atleast_1d(tau(t))
        cv = np.atleast_1d(travel_cost(tau, la.b, t))
        for k in range(t.size):
            yield i, j, float(t[k]), float(tv[k]), float(tl[k]), float(cv[k])


def write_plot_csv(path, g: TdGraph, la: LowerApproxGraph, samples: int = 200) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "t", "tau", "tau_lower", "cost"])
        for i, j, *vals in plot_rows(g, la, samples):
            w.writerow([i, j] + [f"{v:.12g}" for v in vals])


def tour_lower(la: LowerApproxGraph, tour: Sequence[int], t0: float) -> float:
    return la.path_lower(list(tour) + [tour[0]], t0)


__all__ = [
    "BoundPair",
    "LowerApproxGraph",
    "bound_pair",
    "generate_invariant",
    "igp_function",
    "igp_travel_time",
    "igp_travel_times",
    "lower_graph",
    "min_cost",
    "plot_rows",
    "tour_lower",
    "write_plot_csv",
]
