"""Time-dependent graphs, path durations and path dominance."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .pwl import EPS_TIME, PwlFunction

Arc = tuple[int, int]


class PathError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TdGraph:
    """Directed graph with one FIFO travel-time function per arc.

    Vertices are ``0 .. n-1``; vertex 0 is the depot for tour problems.
    """

    n: int
    arcs: Mapping[Arc, PwlFunction]
    T: float
    t0: float = 0.0
    required_vertices: frozenset[int] | None = None
    required_arcs: frozenset[Arc] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one vertex")
        if not 0.0 <= self.t0 <= self.T:
            raise ValueError(f"need 0 <= t0 <= T, got t0={self.t0}, T={self.T}")
        arcs = dict(sorted(self.arcs.items()))
        for (i, j), tau in arcs.items():
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"arc ({i},{j}) out of range")
            if i == j:
                raise ValueError(f"self-loop ({i},{i}) not allowed")
            tau.require_fifo()
        object.__setattr__(self, "arcs", arcs)
        if self.required_vertices is None:
            object.__setattr__(self, "required_vertices", frozenset(range(self.n)))
        for a in self.required_arcs:
            if a not in arcs:
                raise ValueError(f"required arc {a} is not an arc")
        if self.n > 1 and not self._weakly_connected():
            raise ValueError("graph is not connected")

    def _weakly_connected(self) -> bool:
        adj: dict[int, set[int]] = {v: set() for v in range(self.n)}
        for i, j in self.arcs:
            adj[i].add(j)
            adj[j].add(i)
        seen, stack = {0}, [0]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n

    @property
    def is_complete(self) -> bool:
        return len(self.arcs) == self.n * (self.n - 1)

    def tau(self, i: int, j: int) -> PwlFunction:
        try:
            return self.arcs[(i, j)]
        except KeyError:
            raise PathError(f"no arc ({i},{j})") from None

    def breakpoints(self) -> np.ndarray:
        """Union of all travel-time breakpoints."""
        if not self.arcs:
            return np.empty(0)
        return np.unique(np.concatenate([f.times for f in self.arcs.values()]))

    def min_travel_time(self) -> float:
        return min(float(f.values.min()) for f in self.arcs.values())

    def mean_travel_time(self) -> float:
        return float(np.mean([f.values.mean() for f in self.arcs.values()]))


def path_duration(g: TdGraph, path: Sequence[int], t):
    """Duration of ``path`` when leaving its first vertex at time ``t``."""
    t = np.asarray(t, dtype=float)
    z = np.zeros_like(t)
    for i, j in zip(path[:-1], path[1:]):
        z = z + g.tau(i, j)(t + z)
    return float(z) if z.ndim == 0 else z


def duration_function(g: TdGraph, path: Sequence[int]) -> PwlFunction:
    """Exact piecewise-linear duration of ``path`` as a function of departure."""
    if len(path) < 2:
        return PwlFunction.constant(0.0)
    # pull every arc breakpoint back to a departure time at the path start
    cands = [np.atleast_1d(g.tau(path[0], path[1]).times)]
    for m in range(1, len(path) - 1):
        pts = g.tau(path[m], path[m + 1]).times
        for i, j in reversed(list(zip(path[: m], path[1 : m + 1]))):
            pts = np.atleast_1d(g.tau(i, j).arrival_inverse(pts))
        cands.append(pts)
    t = np.unique(np.concatenate(cands))
    t = t[np.concatenate(([True], np.diff(t) > EPS_TIME))]
    return PwlFunction(t, np.atleast_1d(path_duration(g, path, t))).simplified()


def dominates(g: TdGraph, p1: Sequence[int], p2: Sequence[int], grid: Iterable[float]) -> bool:
    """True iff ``z(p1, t) >= z(p2, t)`` on ``grid`` and its interval midpoints."""
    pts = np.unique(np.asarray(list(grid), dtype=float))
    if pts.size > 1:
        pts = np.concatenate((pts, 0.5 * (pts[1:] + pts[:-1])))
    z1 = np.atleast_1d(path_duration(g, p1, pts))
    z2 = np.atleast_1d(path_duration(g, p2, pts))
    return bool(np.all(z1 >= z2 - EPS_TIME))


def dominance_grid(g: TdGraph, p1: Sequence[int], p2: Sequence[int]) -> np.ndarray:
    """Merged breakpoint grid of both duration functions, clipped to ``[0, T]``."""
    t = np.concatenate(([0.0, g.T], duration_function(g, p1).times, duration_function(g, p2).times))
    return np.unique(t[(t >= 0.0) & (t <= g.T)])


def check_tour(g: TdGraph, perm: Sequence[int], depot: int = 0) -> list[int]:
    perm = [int(v) for v in perm]
    if sorted(perm) != list(range(g.n)):
        raise PathError(f"not a permutation of the {g.n} vertices: {perm}")
    if perm[0] != depot:
        raise PathError(f"tour must start at the depot {depot}")
    return perm


def tour_duration(g: TdGraph, perm: Sequence[int], t0: float | None = None) -> float:
    """Duration of the closed tour ``perm`` (back to its first vertex), leaving at ``t0``."""
    perm = check_tour(g, perm)
    start = g.t0 if t0 is None else t0
    return path_duration(g, perm + [perm[0]], start)
