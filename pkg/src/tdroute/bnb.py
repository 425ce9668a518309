"""Exact branch-and-bound for the time-dependent travelling salesman problem.

A node fixes a path from the depot plus a set of forbidden arcs.  Its bound
comes from an ATSP on per-arc minimum costs under the LP step function, where
the minimum only ranges over the departure window still open to the node.
"""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import ctcp as ctcp_mod
from .assignment import Infeasible, solve_atsp
from .bounds import SAFETY, bound_pair, igp_travel_times, lower_graph
from .ctcp import CtcpResult
from .pwl import EPS_TIME, PwlFunction
from .tdgraph import Arc, TdGraph, path_duration, tour_duration

REL_TOL = 1e-9


@dataclass(frozen=True)
class BnbNode:
    prefix: tuple[int, ...]
    forbidden: frozenset[Arc]
    lb: float = 0.0

    @property
    def depth(self) -> int:
        return len(self.prefix) - 1


@dataclass
class _Eval:
    lb: float
    tour: list[int]
    ub: float
    lower_prefix: np.ndarray  # lower duration of each tour prefix p_0 .. p_n
    window_hi: float


@dataclass
class SolveReport:
    status: str  # "optimal" or "gap"
    upper: float
    lower: float
    tour: list[int]
    nodes: int
    seconds: float
    ub_initial: float
    lb_initial: float
    grid: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def gap_initial(self) -> float:
        return _gap(self.ub_initial, self.lb_initial)

    @property
    def gap_final(self) -> float:
        return _gap(self.upper, self.lower)

    @property
    def ratio(self) -> float:
        """Initial upper bound over final lower bound."""
        return self.ub_initial / self.lower if self.lower > 0 else float("inf")

    def to_kv(self, timing: bool = True) -> str:
        lines = [
            f"status={self.status}",
            f"opt={self.upper:.12g}" if self.optimal else f"ub={self.upper:.12g}",
            f"lb={self.lower:.12g}",
            f"tour={' '.join(map(str, self.tour))}",
            f"ub_initial={self.ub_initial:.12g}",
            f"lb_initial={self.lb_initial:.12g}",
            f"gap_initial={100 * self.gap_initial:.6f}",
            f"gap_final={100 * self.gap_final:.6f}",
            f"nodes={self.nodes}",
            f"grid={self.grid}",
        ]
        if timing:
            lines.append(f"time={self.seconds:.3f}")
        return "\n".join(lines)

    def csv_row(self, name: str, timing: bool = True) -> list[str]:
        return [
            name,
            "1" if self.optimal else "0",
            f"{self.ratio:.6f}",
            f"{100 * self.gap_initial:.6f}",
            f"{100 * self.gap_final:.6f}",
            str(self.nodes),
            f"{self.seconds:.3f}" if timing else "",
            f"{self.upper:.12g}",
            f"{self.lower:.12g}",
        ]


CSV_HEADER = ["instance", "OPT", "UB_I/LB_F", "GAP_I", "GAP_F", "NODES", "TIME", "UB", "LB"]


def _gap(ub: float, lb: float) -> float:
    """(UB - LB) / LB, clipped at zero."""
    if lb <= 0:
        return float("inf") if ub > lb else 0.0
    return max(0.0, (ub - lb) / lb)


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= REL_TOL * max(1.0, abs(a), abs(b))


class NodeCosts:
    """Per-arc minimum travel cost over a departure window.

    Uses the exact cost functions under ``y*``, which stay valid on reduced grids
    where the LP's own piecewise-linear ``x*`` is only a surrogate.
    """

    def __init__(self, g: TdGraph, res: CtcpResult):
        self.n = g.n
        self.funcs: dict[Arc, PwlFunction] = res.cost_functions(g)
        arcs = list(self.funcs)
        self._rows = np.array([a[0] for a in arcs], dtype=int)
        self._cols = np.array([a[1] for a in arcs], dtype=int)
        self._len = np.array([f.times.size for f in self.funcs.values()])
        k = int(self._len.max()) if arcs else 1
        # breakpoints padded with +inf times and the last value
        self._t = np.full((len(arcs), k), np.inf)
        self._v = np.empty((len(arcs), k))
        for r, f in enumerate(self.funcs.values()):
            m = f.times.size
            self._t[r, :m] = f.times
            self._v[r, :m] = f.values
            self._v[r, m:] = f.values[-1]

    def _eval(self, x: float) -> np.ndarray:
        """Every cost function at ``x``."""
        rows = np.arange(self._t.shape[0])
        j = np.count_nonzero(self._t <= x, axis=1) - 1
        j1 = np.minimum(j + 1, self._len - 1)
        j0 = np.maximum(j, 0)
        t0, t1 = self._t[rows, j0], self._t[rows, j1]
        v0, v1 = self._v[rows, j0], self._v[rows, j1]
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(t1 > t0, (x - t0) / (t1 - t0), 0.0)
        out = v0 + np.clip(w, 0.0, 1.0) * (v1 - v0)
        return np.where(j < 0, self._v[:, 0], out)

    def matrix(self, lo: float, hi: float = np.inf) -> np.ndarray:
        inside = np.where((self._t >= lo) & (self._t <= hi), self._v, np.inf).min(axis=1)
        best = np.minimum(inside, self._eval(lo))
        if np.isfinite(hi):
            best = np.minimum(best, self._eval(hi))
        else:
            # no breakpoint after lo: constant beyond the last one
            best = np.minimum(best, np.where(self._t[np.arange(self._t.shape[0]), self._len - 1] <= lo,
                                             self._v[:, -1], np.inf))
        c = np.full((self.n, self.n), np.inf)
        c[self._rows, self._cols] = best
        return c * (1.0 - SAFETY)


def node_costs(g: TdGraph, res: CtcpResult, window: tuple[float, float]) -> np.ndarray:
    lo, hi = window
    if lo > hi:
        raise ValueError("window must satisfy lo <= hi")
    return NodeCosts(g, res).matrix(lo, hi)


def choose_k_prime(tour: Sequence[int], k: int, lower: np.ndarray, true: np.ndarray) -> int:
    """Largest index whose prefix duration is exact under the approximation, at least ``k + 1``."""
    n = len(tour)
    best = k + 1
    for j in range(k + 1, n):
        if abs(lower[j] - true[j]) <= EPS_TIME * max(1.0, abs(true[j])):
            best = j
    return min(best, n - 1)


def branch(node: BnbNode, tour: Sequence[int], k_prime: int) -> list[BnbNode]:
    """Children partitioning the node's completions other than ``tour`` itself.

    Child ``c`` follows ``tour`` for ``c`` more arcs and forbids the next one;
    a final child follows it through ``v_{k'+1}`` without forbidding anything.
    """
    tour = list(tour)
    n = len(tour)
    k = node.depth
    if tuple(tour[: k + 1]) != node.prefix:
        raise ValueError("relaxation tour does not extend the node prefix")
    closed = tour + [tour[0]]
    out = []
    for m in range(k, k_prime + 1):
        arc = (closed[m], closed[m + 1])
        # with at most one vertex left the next arc is forced; forbidding it empties the child
        if m >= n - 2:
            continue
        out.append(BnbNode(tuple(tour[: m + 1]), node.forbidden | {arc}, node.lb))
    if k_prime + 1 < n - 2:
        out.append(BnbNode(tuple(tour[: k_prime + 2]), node.forbidden, node.lb))
    return out


class _Search:
    def __init__(self, g: TdGraph, res: CtcpResult):
        self.g = g
        self.res = res
        self.b = res.y_star
        self.costs = NodeCosts(g, res)
        self.nodes = 0

    def evaluate(self, node: BnbNode, ub: float) -> _Eval | None:
        g = self.g
        prefix = list(node.prefix)
        z_pre = path_duration(g, prefix, g.t0) if len(prefix) > 1 else 0.0
        lo = g.t0 + z_pre
        hi = g.t0 + ub
        c = self.costs.matrix(lo, max(lo, hi))
        forced = list(zip(prefix[:-1], prefix[1:]))
        self.nodes += 1
        try:
            tour, _ = solve_atsp(c, forced=forced, forbidden=node.forbidden, lexicographic=False)
        except Infeasible:
            return None
        closed = tour + [tour[0]]
        k = len(prefix) - 1
        # lower duration of p_j: exact prefix, then the constant-cost approximation
        rest = np.array([c[a, b] for a, b in zip(closed[k:-1], closed[k + 1 :])])
        cum = np.concatenate(([0.0], np.cumsum(rest)))
        lower = np.empty(len(closed))
        lower[: k + 1] = [path_duration(g, closed[: j + 1], g.t0) if j else 0.0 for j in range(k + 1)]
        if cum.size > 1:
            lower[k + 1 :] = z_pre + np.asarray(igp_travel_times(self.b, cum[1:], lo))
        ub1 = tour_duration(g, tour, g.t0)
        lb1 = max(node.lb, min(float(lower[-1]), ub1))
        return _Eval(lb=lb1, tour=tour, ub=ub1, lower_prefix=lower, window_hi=hi)


def solve_tdtsp(
    g: TdGraph,
    policy: "ctcp_mod.GridPolicy | str" = "auto",
    engine: str = "auto",
    rho: float | None = None,
    time_limit: float | None = None,
    res: CtcpResult | None = None,
) -> SolveReport:
    """Solve a complete TDTSP instance leaving the depot (vertex 0) at ``g.t0``."""
    if not g.is_complete:
        raise ValueError("the TDTSP solver needs a complete graph")
    started = time.perf_counter()
    if res is None:
        res = ctcp_mod.check(g, rho=rho, policy=policy, engine=engine)
    grid = f"{'exact' if res.exact else 'reduced'}:{res.grid.size}"
    if g.n == 1:
        return SolveReport("optimal", 0.0, 0.0, [0], 0, time.perf_counter() - started, 0.0, 0.0, grid)
    root = bound_pair(g, lower_graph(g, res), lambda c: solve_atsp(c, lexicographic=False))
    lb_i, ub_i = root.lower, root.upper
    best_ub, best_tour = ub_i, list(root.tour)
    search = _Search(g, res)
    search.nodes = 1

    def report(status: str, lower: float) -> SolveReport:
        return SolveReport(
            status, best_ub, min(lower, best_ub), best_tour, search.nodes,
            time.perf_counter() - started, ub_i, lb_i, grid,
        )

    if _close(lb_i, best_ub) or lb_i >= best_ub:
        return report("optimal", best_ub)

    counter = itertools.count()
    heap: list = []

    def push(node: BnbNode) -> None:
        nonlocal best_ub, best_tour
        ev = search.evaluate(node, best_ub)
        if ev is None:
            return
        if ev.ub < best_ub and not _close(ev.ub, best_ub):
            best_ub, best_tour = ev.ub, list(ev.tour)
        node = BnbNode(node.prefix, node.forbidden, ev.lb)
        if _close(ev.lb, ev.ub) or ev.lb >= best_ub or _close(ev.lb, best_ub):
            return
        heapq.heappush(heap, (ev.lb, next(counter), node, ev))

    push(BnbNode((0,), frozenset(), lb_i))
    while heap:
        lb, _, node, ev = heap[0]
        if lb >= best_ub or _close(lb, best_ub):
            heap.clear()
            break
        if time_limit is not None and time.perf_counter() - started > time_limit:
            return report("gap", lb)
        heapq.heappop(heap)
        if ev.window_hi > g.t0 + best_ub + EPS_TIME:
            # incumbent improved since the evaluation: tighten the window first
            push(node)
            continue
        k = node.depth
        closed = ev.tour + [ev.tour[0]]
        true = np.array([path_duration(g, closed[: j + 1], g.t0) if j else 0.0 for j in range(len(closed))])
        kp = choose_k_prime(ev.tour, k, ev.lower_prefix, true)
        for child in branch(node, ev.tour, kp):
            push(child)
    return report("optimal", best_ub)
