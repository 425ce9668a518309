"""Candidate breakpoint sets for constant-cost step functions.

A time sequence on an arc is the chain of departure times linked by the
arrival map: every element is the arrival time of the previous one.  The
per-arc set collects the sequences through every travel-time breakpoint of
the graph; the global set is their intersection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pwl import EPS_TIME, PwlFunction
from .tdgraph import Arc, TdGraph

DEFAULT_CAP = 512


@dataclass(frozen=True)
class TimeSequence:
    arc: Arc | None
    times: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.times)

    def __contains__(self, t) -> bool:
        return any(abs(t - w) <= EPS_TIME for w in self.times)


def _snap(t: float, T: float) -> float:
    if abs(t) <= EPS_TIME:
        return 0.0
    if abs(t - T) <= EPS_TIME:
        return float(T)
    return t


def time_sequence(tau: PwlFunction, T: float, t: float, arc: Arc | None = None) -> TimeSequence:
    """Walk the arrival map forward, then backward, from ``t`` inside ``[0, T]``."""
    if not -EPS_TIME <= t <= T + EPS_TIME:
        raise ValueError(f"seed {t} outside [0, {T}]")
    tau.require_fifo()
    t = _snap(float(t), T)
    seq = [t]
    cur = t
    while True:
        nxt = _snap(float(tau.arrival(cur)), T)
        if nxt > T or any(abs(nxt - w) <= EPS_TIME for w in seq):
            break
        seq.append(nxt)
        cur = nxt
    cur = t
    while True:
        prv = _snap(float(tau.arrival_inverse(cur)), T)
        if prv < 0.0 or any(abs(prv - w) <= EPS_TIME for w in seq):
            break
        seq.append(prv)
        cur = prv
    return TimeSequence(arc, tuple(sorted(seq)))


def _dedup(t: np.ndarray) -> np.ndarray:
    t = np.sort(np.asarray(t, dtype=float))
    if t.size == 0:
        return t
    return t[np.concatenate(([True], np.diff(t) > EPS_TIME))]


def _intersect(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elements of ``a`` matched by some element of ``b`` within EPS_TIME."""
    if a.size == 0 or b.size == 0:
        return a[:0]
    k = np.searchsorted(b, a)
    lo = np.abs(a - b[np.clip(k - 1, 0, b.size - 1)])
    hi = np.abs(a - b[np.clip(k, 0, b.size - 1)])
    return a[np.minimum(lo, hi) <= EPS_TIME]


@dataclass(frozen=True)
class OmegaSets:
    per_arc: dict[Arc, np.ndarray]
    global_: np.ndarray
    seeds: np.ndarray

    def __len__(self) -> int:
        return int(self.global_.size)

    def exceeds(self, cap: int = DEFAULT_CAP) -> bool:
        return self.global_.size > cap


def horizon_seeds(g: TdGraph) -> np.ndarray:
    """Travel-time breakpoints of all arcs that fall inside ``[0, T]``."""
    t = g.breakpoints()
    t = np.array([_snap(float(x), g.T) for x in t])
    return _dedup(t[(t >= 0.0) & (t <= g.T)])


def arc_omega(tau: PwlFunction, T: float, seeds: np.ndarray, arc: Arc | None = None) -> np.ndarray:
    """Union of the time sequences through every seed, walked for all seeds at once."""
    tau.require_fifo()
    seeds = np.asarray(seeds, dtype=float)
    found = [seeds]
    cur = seeds
    while cur.size:
        cur = _snap_all(np.asarray(tau.arrival(cur), dtype=float), T)
        cur = cur[cur <= T]
        found.append(cur)
    cur = seeds
    while cur.size:
        cur = _snap_all(np.asarray(tau.arrival_inverse(cur), dtype=float), T)
        cur = cur[cur >= 0.0]
        found.append(cur)
    return _dedup(np.concatenate(found))


def _snap_all(t: np.ndarray, T: float) -> np.ndarray:
    t = np.where(np.abs(t) <= EPS_TIME, 0.0, t)
    return np.where(np.abs(t - T) <= EPS_TIME, float(T), t)


def build_omega(g: TdGraph) -> OmegaSets:
    seeds = horizon_seeds(g)
    per_arc = {arc: arc_omega(tau, g.T, seeds, arc) for arc, tau in g.arcs.items()}
    arcs = sorted(per_arc)
    glob = per_arc[arcs[0]] if arcs else seeds
    for arc in arcs[1:]:
        glob = _intersect(glob, per_arc[arc])
    return OmegaSets(per_arc=per_arc, global_=glob, seeds=seeds)


def size_bound(g: TdGraph, omega: OmegaSets) -> float:
    """Per-arc cardinality bound |A| * |seeds| * (T / tau_min + 1)."""
    return len(g.arcs) * omega.seeds.size * (g.T / g.min_travel_time() + 1.0)


def size_bound_check(g: TdGraph, omega: OmegaSets) -> bool:
    bound = size_bound(g, omega)
    if omega.global_.size > bound:
        return False
    return all(s.size <= bound for s in omega.per_arc.values())


def max_sequence_steps(tau: PwlFunction, T: float) -> int:
    """Loop-iteration bound for one direction of the sequence walk."""
    return math.ceil(T / float(tau.values.min())) + 2
