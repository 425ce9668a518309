"""Continuous piecewise-linear and right-continuous step functions of time.

Both kinds are immutable and clamp outside their breakpoint span: a
``PwlFunction`` keeps its first/last value, a ``StepFunction`` keeps its
first/last rate.  Every evaluator accepts scalars or numpy arrays.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

EPS_TIME = 1e-9
EPS_COST = 1e-9
EPS_SLOPE = 1e-9


class FifoError(ValueError):
    """A travel-time function lets a later departure arrive earlier."""


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


def _ret(x):
    return float(x) if np.ndim(x) == 0 else x


class PwlFunction:
    """Linear interpolation through ``(times[k], values[k])``."""

    __slots__ = ("times", "values", "_fifo")

    def __init__(self, times: Sequence[float], values: Sequence[float]):
        t = _frozen(times)
        v = _frozen(values)
        if t.size == 0:
            raise ValueError("a piecewise-linear function needs at least one breakpoint")
        if t.shape != v.shape:
            raise ValueError("times and values differ in length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("breakpoints must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        self.times = t
        self.values = v
        self._fifo = None

    @classmethod
    def from_points(cls, points: Iterable[tuple[float, float]], eps: float = EPS_TIME) -> "PwlFunction":
        """Build from unsorted points, merging near-equal times and collinear middles."""
        pts = sorted((float(t), float(v)) for t, v in points)
        if not pts:
            raise ValueError("no points")
        ts, vs = [pts[0][0]], [pts[0][1]]
        for t, v in pts[1:]:
            if t - ts[-1] <= eps:
                continue
            ts.append(t)
            vs.append(v)
        return cls(ts, vs).simplified()

    @classmethod
    def constant(cls, value: float, at: float = 0.0) -> "PwlFunction":
        return cls([at], [value])

    def simplified(self, eps: float = EPS_SLOPE) -> "PwlFunction":
        """Drop breakpoints where the slope does not change."""
        t, v = self.times, self.values
        if t.size <= 2:
            if t.size == 2 and abs(v[1] - v[0]) <= eps * max(1.0, abs(v[0])):
                return PwlFunction(t[:1], v[:1])
            return self
        slopes = np.diff(v) / np.diff(t)
        ext = np.concatenate(([0.0], slopes, [0.0]))
        scale = max(1.0, float(np.max(np.abs(ext))))
        keep = np.abs(np.diff(ext)) > eps * scale
        if not keep.any():
            keep[0] = True
        if keep.all():
            return self
        return PwlFunction(t[keep], v[keep])

    def __call__(self, t):
        return _ret(np.interp(t, self.times, self.values))

    def __repr__(self) -> str:
        pts = ", ".join(f"({a:g}, {b:g})" for a, b in zip(self.times, self.values))
        return f"PwlFunction([{pts}])"

    def __eq__(self, other) -> bool:
        if not isinstance(other, PwlFunction):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.times.tobytes(), self.values.tobytes()))

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.times)

    def is_fifo(self) -> bool:
        if self._fifo is None:
            ok = bool(np.all(self.values > 0))
            if self.times.size > 1:
                ok = ok and bool(np.all(self.slopes > -1.0))
            self._fifo = ok
        return self._fifo

    def require_fifo(self) -> None:
        if not self.is_fifo():
            raise FifoError(f"not a FIFO travel-time function: {self!r}")

    def minimum(self, lo: float = -np.inf, hi: float = np.inf) -> float:
        """Minimum over ``[lo, hi]``; attained at a breakpoint or an endpoint."""
        if lo > hi:
            raise ValueError("empty window")
        t = self.times
        inside = self.values[(t >= lo) & (t <= hi)]
        ends = [self(x) for x in (lo, hi) if np.isfinite(x)]
        cands = np.concatenate((inside, ends))
        if cands.size == 0:
            # unbounded window holding no breakpoint: the function is constant there
            return float(self.values[0] if hi < t[0] else self.values[-1])
        return float(cands.min())

    def maximum(self, lo: float = -np.inf, hi: float = np.inf) -> float:
        return -PwlFunction(self.times, -self.values).minimum(lo, hi)

    # arrival map t -> t + f(t)

    def arrival(self, t):
        self.require_fifo()
        t = np.asarray(t, dtype=float)
        return _ret(t + np.interp(t, self.times, self.values))

    def arrival_inverse(self, a):
        """Departure time whose arrival is ``a`` (the arrival map is a bijection)."""
        self.require_fifo()
        a = np.asarray(a, dtype=float)
        g = self.times + self.values
        out = np.interp(a, g, self.times)
        out = np.where(a < g[0], a - self.values[0], out)
        out = np.where(a > g[-1], a - self.values[-1], out)
        return _ret(out)


class StepFunction:
    """Rate ``values[h]`` on ``[times[h], times[h+1])``; first rate also applies before ``times[0]``."""

    __slots__ = ("times", "values", "_cum")

    def __init__(self, times: Sequence[float], values: Sequence[float]):
        t = _frozen(times)
        v = _frozen(values)
        if t.size == 0 or t.shape != v.shape:
            raise ValueError("a step function needs matching, non-empty times and values")
        if np.any(np.diff(t) <= 0):
            raise ValueError("step times must be strictly increasing")
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ValueError("unit costs must be finite and strictly positive")
        self.times = t
        self.values = v
        cum = np.concatenate(([0.0], np.cumsum(np.diff(t) * v[:-1])))
        cum.setflags(write=False)
        self._cum = cum

    @classmethod
    def constant(cls, value: float, at: float = 0.0) -> "StepFunction":
        return cls([at], [value])

    @classmethod
    def on_grid(cls, times: Sequence[float], values: Sequence[float]) -> "StepFunction":
        """Like the constructor but merges equal neighbouring rates."""
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=float)
        keep = np.concatenate(([True], v[1:] != v[:-1]))
        return cls(t[keep], v[keep])

    def __repr__(self) -> str:
        pts = ", ".join(f"({a:g}, {b:g})" for a, b in zip(self.times, self.values))
        return f"StepFunction([{pts}])"

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepFunction):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.times.tobytes(), self.values.tobytes()))

    def scaled(self, alpha: float) -> "StepFunction":
        return StepFunction(self.times, self.values * alpha)

    def _index(self, t):
        idx = np.searchsorted(self.times, t, side="right") - 1
        return np.clip(idx, 0, self.times.size - 1)

    def __call__(self, t):
        return _ret(self.values[self._index(np.asarray(t, dtype=float))])

    def cumulative(self, t):
        """Antiderivative anchored at ``times[0]`` (negative before it)."""
        t = np.asarray(t, dtype=float)
        idx = self._index(t)
        return _ret(self._cum[idx] + (t - self.times[idx]) * self.values[idx])

    def cumulative_inverse(self, c):
        c = np.asarray(c, dtype=float)
        cum, t, v = self._cum, self.times, self.values
        out = np.interp(c, cum, t)
        out = np.where(c < 0.0, t[0] + c / v[0], out)
        out = np.where(c > cum[-1], t[-1] + (c - cum[-1]) / v[-1], out)
        return _ret(out)

    def integral(self, a, b):
        return _ret(np.asarray(self.cumulative(b)) - np.asarray(self.cumulative(a)))


def travel_cost(tau: PwlFunction, b: StepFunction, t):
    """Cost of leaving at ``t``: the integral of ``b`` over the traversal."""
    return b.integral(t, tau.arrival(t))


def _cost_candidates(tau: PwlFunction, b: StepFunction) -> np.ndarray:
    cand = np.concatenate((b.times, tau.times, np.atleast_1d(tau.arrival_inverse(b.times))))
    cand = np.unique(cand)
    keep = np.concatenate(([True], np.diff(cand) > EPS_TIME))
    return cand[keep]


def cost_function(tau: PwlFunction, b: StepFunction) -> PwlFunction:
    """Exact piecewise-linear form of ``t -> travel_cost(tau, b, t)``.

    The cost is linear between consecutive candidates and constant outside
    them, so interpolating the candidate values is exact.
    """
    cand = _cost_candidates(tau, b)
    return PwlFunction(cand, np.atleast_1d(travel_cost(tau, b, cand)))


def cost_breakpoints(tau: PwlFunction, b: StepFunction) -> np.ndarray:
    """Times where the travel cost changes slope."""
    cand = _cost_candidates(tau, b)
    vals = np.atleast_1d(travel_cost(tau, b, cand))
    if cand.size == 1:
        return np.empty(0)
    slopes = np.concatenate(([0.0], np.diff(vals) / np.diff(cand), [0.0]))
    jump = np.abs(np.diff(slopes))
    tol = EPS_SLOPE * max(1.0, float(np.max(b.values)))
    return cand[jump > tol]
