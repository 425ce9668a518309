"""Shared fixtures and independent oracles.

The oracles avoid the package's own arithmetic: travel times are evaluated
with ``np.interp`` on raw breakpoint lists and optima come from enumerating
permutations.
"""
from __future__ import annotations

import itertools

import numpy as np
import pytest

from tdroute.pwl import PwlFunction
from tdroute.simplex import LpProblem
from tdroute.tdgraph import TdGraph

DESK = [(0.0, 2.0), (4.0, 2.0), (5.0, 3.0)]


def desk_tau() -> PwlFunction:
    return PwlFunction(*zip(*DESK))


@pytest.fixture
def desk_graph() -> TdGraph:
    """Single arc, the worked example: horizon 5."""
    return TdGraph(2, {(0, 1): desk_tau()}, 5.0, 0.0)


def oracle_tau(points, t: float) -> float:
    ts, vs = zip(*points)
    return float(np.interp(t, ts, vs))


def oracle_path(arcs: dict, path, t: float) -> float:
    """Duration of ``path`` leaving at ``t``; ``arcs`` maps (i, j) to breakpoint lists."""
    cur = t
    for i, j in zip(path[:-1], path[1:]):
        cur += oracle_tau(arcs[(i, j)], cur)
    return cur - t


def oracle_tdtsp(arcs: dict, n: int, t0: float = 0.0) -> tuple[float, list[int]]:
    """Quickest closed tour from vertex 0, by enumerating all ``(n-1)!`` orders."""
    best, arg = np.inf, None
    for perm in itertools.permutations(range(1, n)):
        tour = [0, *perm, 0]
        z = oracle_path(arcs, tour, t0)
        if z < best:
            best, arg = z, [0, *perm]
    return best, arg


def random_fifo_points(rng: np.random.Generator, T: float, k: int | None = None) -> list[tuple[float, float]]:
    """Random FIFO breakpoints: slopes kept in (-0.8, 2)."""
    k = int(rng.integers(1, 6)) if k is None else k
    ts = np.sort(rng.uniform(0.0, T, k))
    ts = ts[np.concatenate(([True], np.diff(ts) > 1e-3))]
    v = [float(rng.uniform(0.3, 2.0))]
    for a, b in zip(ts[:-1], ts[1:]):
        slope = float(rng.uniform(-0.8, 2.0))
        v.append(max(0.05, v[-1] + slope * (b - a)))
    return list(zip(ts.tolist(), v))


def random_graph(rng: np.random.Generator, n: int, T: float = 6.0) -> tuple[TdGraph, dict]:
    """Complete random FIFO graph plus its raw breakpoints for the oracles."""
    raw = {}
    for i in range(n):
        for j in range(n):
            if i != j:
                raw[(i, j)] = random_fifo_points(rng, T)
    g = TdGraph(n, {a: PwlFunction(*zip(*p)) for a, p in raw.items()}, T, 0.0)
    return g, raw


def raw_arcs(g: TdGraph) -> dict:
    return {a: list(zip(tau.times.tolist(), tau.values.tolist())) for a, tau in g.arcs.items()}


def random_lp(rng, n, m, box=5.0):
    """Feasible, bounded LP: mixed senses around a random interior point, boxed variables."""
    A = rng.uniform(-1, 1, (m, n)).round(3)
    x0 = rng.uniform(0, 2, n)
    senses = rng.choice(["<", ">", "="], size=m, p=[0.45, 0.35, 0.2])
    act = A @ x0
    slack = rng.uniform(0, 1, m)
    rhs = np.where(senses == "<", act + slack, np.where(senses == ">", act - slack, act))
    c = rng.uniform(-1, 1, n).round(3)
    lb = np.zeros(n)
    ub = np.full(n, box)
    return LpProblem(c, A, senses, rhs, lb, ub)


def vertex_oracle(p: LpProblem) -> float:
    """Minimum of ``c @ x`` over all basic feasible points."""
    A = p.dense()
    n = A.shape[1]
    rows = [(A[i], p.rhs[i], p.senses[i]) for i in range(A.shape[0])]
    eye = np.eye(n)
    rows += [(eye[j], p.lb[j], ">") for j in range(n) if np.isfinite(p.lb[j])]
    rows += [(eye[j], p.ub[j], "<") for j in range(n) if np.isfinite(p.ub[j])]
    eq = [k for k, r in enumerate(rows) if r[2] == "="]
    ineq = [k for k, r in enumerate(rows) if r[2] != "="]
    best = np.inf
    for extra in itertools.combinations(ineq, n - len(eq)):
        idx = eq + list(extra)
        M = np.array([rows[k][0] for k in idx])
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, np.array([rows[k][1] for k in idx]))
        ok = True
        for a, b, s in rows:
            v = a @ x
            if (s == "<" and v > b + 1e-8) or (s == ">" and v < b - 1e-8) or (s == "=" and abs(v - b) > 1e-8):
                ok = False
                break
        if ok:
            best = min(best, float(p.c @ x))
    return best


def brute_assignment(c):
    n = c.shape[0]
    return min(sum(c[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def brute_atsp(c, forced=(), forbidden=()):
    n = c.shape[0]
    best = np.inf
    for perm in itertools.permutations(range(1, n)):
        tour = [0, *perm]
        arcs = set(zip(tour, tour[1:] + [0]))
        if not set(forced) <= arcs or arcs & set(forbidden):
            continue
        best = min(best, sum(c[a, b] for a, b in arcs))
    return best


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
