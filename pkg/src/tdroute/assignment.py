"""Linear assignment (Hungarian, O(n^3)) and an assignment-relaxation ATSP solver."""
from __future__ import annotations

import heapq
import itertools
from typing import Iterable, Sequence

import numpy as np

Arc = tuple[int, int]


class Infeasible(ValueError):
    """No assignment or tour avoids every forbidden entry."""


def _sentinel(c: np.ndarray) -> float:
    finite = np.abs(c[np.isfinite(c)])
    top = float(finite.max()) if finite.size else 1.0
    return (c.shape[0] + 1) * (top + 1.0)


def cost_matrix(costs, forbidden: Iterable[Arc] = ()) -> np.ndarray:
    """Square float matrix with the diagonal and ``forbidden`` entries set to inf."""
    c = np.array(costs, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("cost matrix must be square")
    np.fill_diagonal(c, np.inf)
    for i, j in forbidden:
        c[i, j] = np.inf
    return c


def _hungarian(c: np.ndarray) -> np.ndarray:
    """Row -> column assignment minimising ``c`` (finite square matrix)."""
    n = c.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)  # p[j]: row matched to column j (1-based, 0 = free)
    way = np.zeros(n + 1, dtype=int)
    cost = np.zeros((n + 1, n + 1))
    cost[1:, 1:] = c
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = cost[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, np.inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    perm = np.empty(n, dtype=int)
    perm[p[1:] - 1] = np.arange(n)
    return perm


def solve_assignment(c) -> tuple[list[int], float]:
    """Optimal assignment ``perm[i] = column of row i`` and its cost.

    Infinite entries are forbidden; they are priced with a sentinel larger than
    any feasible completion, so a solution touching one means none exists.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("cost matrix must be square")
    n = c.shape[0]
    if n == 0:
        return [], 0.0
    bad = ~np.isfinite(c)
    work = np.where(bad, _sentinel(c), c)
    perm = _hungarian(work)
    rows = np.arange(n)
    if bad[rows, perm].any():
        raise Infeasible("every assignment uses a forbidden entry")
    return perm.tolist(), float(c[rows, perm].sum())


def cycles(perm: Sequence[int]) -> list[list[int]]:
    """Cycles of a successor map, each starting at its smallest vertex, ordered by that vertex."""
    seen = [False] * len(perm)
    out = []
    for s in range(len(perm)):
        if seen[s]:
            continue
        cyc = []
        v = s
        while not seen[v]:
            seen[v] = True
            cyc.append(v)
            v = perm[v]
        out.append(cyc)
    return out


def _check_constraints(n: int, forced: set[Arc], forbidden: set[Arc]) -> None:
    if forced & forbidden:
        raise Infeasible(f"arcs both forced and forbidden: {sorted(forced & forbidden)}")
    succ, pred = {}, {}
    for i, j in forced:
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise Infeasible(f"bad forced arc ({i},{j})")
        if i in succ or j in pred:
            raise Infeasible("forced arcs must form vertex-disjoint paths")
        succ[i], pred[j] = j, i
    for start in succ:
        v, steps = start, 0
        while v in succ:
            v = succ[v]
            steps += 1
            if v == start and steps < n:
                raise Infeasible("forced arcs close a subtour")
            if steps > n:
                break


def _constrained(base: np.ndarray, forced: Iterable[Arc], forbidden: Iterable[Arc]) -> np.ndarray:
    c = base.copy()
    n = c.shape[0]
    for i, j in forbidden:
        c[i, j] = np.inf
    succ = {}
    pred = {}
    for i, j in forced:
        keep = c[i, j]
        c[i, :] = np.inf
        c[:, j] = np.inf
        c[i, j] = keep
        succ[i], pred[j] = j, i
    # closing arc of a forced path would make a subtour
    for s in succ:
        if s in pred:
            continue
        e, length = s, 0
        while e in succ:
            e = succ[e]
            length += 1
        if length < n - 1:
            c[e, s] = np.inf
    return c


def tour_from_successors(perm: Sequence[int], start: int = 0) -> list[int]:
    tour = [start]
    v = perm[start]
    while v != start:
        tour.append(v)
        v = perm[v]
    return tour


def tour_cost(c: np.ndarray, tour: Sequence[int]) -> float:
    return float(sum(c[a, b] for a, b in zip(tour, list(tour[1:]) + [tour[0]])))


def tour_arcs(tour: Sequence[int]) -> list[Arc]:
    return list(zip(tour, list(tour[1:]) + [tour[0]]))


def _search(base, forced, forbidden, cutoff=None, first=False, max_nodes=None):
    """Best-first subtour branching; returns (cost, tour) or None.

    With ``cutoff`` nodes whose bound exceeds it are dropped; ``first`` stops at
    the first tour within the cutoff.
    """
    try:
        perm, lb = solve_assignment(_constrained(base, forced, forbidden))
    except Infeasible:
        return None
    counter = itertools.count()
    heap = [(lb, next(counter), frozenset(forced), frozenset(forbidden), perm)]
    best: tuple[float, list[int]] | None = None
    nodes = 0

    def bound():
        if best is not None:
            return best[0] + 1e-9 * max(1.0, abs(best[0]))
        return cutoff if cutoff is not None else np.inf

    while heap:
        lb, _, fz, fb, perm = heapq.heappop(heap)
        if lb > bound():
            break
        nodes += 1
        if max_nodes is not None and nodes > max_nodes:
            raise RuntimeError("ATSP node limit reached")
        cyc = cycles(perm)
        if len(cyc) == 1:
            tour = tour_from_successors(perm)
            cost = tour_cost(base, tour)
            if best is None or cost < best[0]:
                best = (cost, tour)
                if first and cost <= bound():
                    return best
            continue
        sub = min(cyc, key=len)
        scanned: list[Arc] = []
        for a in zip(sub, sub[1:] + sub[:1]):
            if a in fz:
                scanned.append(a)
                continue
            child_fz = fz | frozenset(scanned)
            child_fb = fb | {a}
            scanned.append(a)
            try:
                cperm, clb = solve_assignment(_constrained(base, child_fz, child_fb))
            except Infeasible:
                continue
            if clb <= bound():
                heapq.heappush(heap, (clb, next(counter), child_fz, child_fb, cperm))
    if best is not None and cutoff is not None and best[0] > cutoff:
        return None
    return best


def solve_atsp(
    c,
    forced: Iterable[Arc] = (),
    forbidden: Iterable[Arc] = (),
    lexicographic: bool = True,
    max_nodes: int | None = None,
) -> tuple[list[int], float]:
    """Least-cost Hamiltonian circuit (from vertex 0) honouring forced/forbidden arcs.

    Branch-and-bound on the assignment relaxation: the shortest subtour of a
    relaxed solution spawns one child per arc, forbidding that arc and forcing
    the arcs scanned before it.  With ``lexicographic`` the smallest optimal
    tour is then picked vertex by vertex.
    """
    base = cost_matrix(c)
    n = base.shape[0]
    forced = {(int(i), int(j)) for i, j in forced}
    forbidden = {(int(i), int(j)) for i, j in forbidden}
    _check_constraints(n, forced, forbidden)
    if n == 1:
        return [0], 0.0
    found = _search(base, forced, forbidden, max_nodes=max_nodes)
    if found is None:
        raise Infeasible("no Hamiltonian circuit satisfies the constraints")
    opt, tour = found
    if not lexicographic:
        return tour, opt
    cutoff = opt + 1e-9 * max(1.0, abs(opt))
    fixed = set(forced)
    for pos in range(1, n):
        tail = tour[pos - 1]
        for v in range(tour[pos]):
            arc = (tail, v)
            if v in tour[:pos] or arc in forbidden or not np.isfinite(base[tail, v]):
                continue
            if any(a[0] == tail or a[1] == v for a in fixed):
                continue
            alt = _search(base, fixed | {arc}, forbidden, cutoff=cutoff, first=True, max_nodes=max_nodes)
            if alt is not None:
                tour = alt[1]
                break
        fixed.add((tail, tour[pos]))
    return tour, tour_cost(base, tour)
