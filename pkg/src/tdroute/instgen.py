"""Deterministic TDTSP instance generator and the instance text format.

Geometry: vertices uniform in the unit square; the default horizon is
``sqrt(n)``, close to the duration of a good tour, so tours meet the peak.
An arc whose segment crosses the central square (middle third on both axes)
is a zone arc and gets a period-dependent degradation of its speed; all
other arcs keep the best congestion factor of each period.  Pattern A congests the zone mildly,
pattern B heavily, both peaking in the middle of the day.

Speeds follow the decomposition ``v_ijh = delta_ijh * f_h * u_ij`` and travel
times integrate the step speed over the distance.  Random numbers come from
SplitMix64 (seed advanced by 0x9E3779B97F4A7C15, outputs mixed with the usual
30/27/31 xor-shift multiply rounds, doubles from the top 53 bits), drawn in a
fixed order that does not depend on delta, so one seed gives the same layout
for every delta.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .bounds import igp_function
from .pwl import EPS_TIME, PwlFunction, StepFunction
from .tdgraph import Arc, TdGraph

MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()


@dataclass(frozen=True)
class GenSpec:
    n: int
    pattern: str = "A"
    delta: float = 0.9
    periods: int = 5
    T: float | None = None
    seed: int = 1
    zone_lo: float = 1.0 / 3.0
    zone_hi: float = 2.0 / 3.0
    speed_lo: float = 0.8
    rush: float = 0.25

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two vertices")
        if self.pattern not in ("A", "B"):
            raise ValueError("pattern must be A or B")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")
        if self.periods < 2:
            raise ValueError("need at least two periods")
        if self.T is None:
            # about one tour duration: a random tour in the unit square runs ~0.7 sqrt(n)
            object.__setattr__(self, "T", _round12(math.sqrt(self.n)))
        if not self.T > 0:
            raise ValueError("horizon must be positive")
        if not 0.0 <= self.zone_lo < self.zone_hi <= 1.0:
            raise ValueError("zone bounds must satisfy 0 <= lo < hi <= 1")
        if not 0.0 < self.speed_lo <= 1.0:
            raise ValueError("speed_lo must lie in (0, 1]")
        if not 0.0 <= self.rush < 1.0:
            raise ValueError("rush must lie in [0, 1)")


@dataclass(frozen=True)
class SpeedDecomposition:
    u: dict[Arc, float]
    f: np.ndarray
    delta: dict[Arc, np.ndarray]

    def speed(self, arc: Arc) -> np.ndarray:
        return self.delta[arc] * self.f * self.u[arc]


def crosses_box(p, q, lo: float, hi: float) -> bool:
    """Does segment ``pq`` meet the square ``[lo, hi]^2``?  (Liang-Barsky clip.)"""
    t0, t1 = 0.0, 1.0
    for a, d in ((p[0], q[0] - p[0]), (p[1], q[1] - p[1])):
        if d == 0.0:
            if not lo <= a <= hi:
                return False
            continue
        ta, tb = (lo - a) / d, (hi - a) / d
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return False
    return True


def _peak(periods: int) -> np.ndarray:
    h = np.arange(periods)
    return np.sin(math.pi * (h + 0.5) / periods)


def _round12(x: float) -> float:
    return float(f"{x:.12g}")


def decompose(spec: GenSpec, rng: SplitMix64, pts: np.ndarray) -> SpeedDecomposition:
    n, H = spec.n, spec.periods
    peak = _peak(H)
    # best congestion factor of each period: lighter at the edges of the day
    f = 1.0 - spec.rush * peak
    intensity = peak * (0.5 if spec.pattern == "A" else 1.0)
    u, draws, zone = {}, {}, {}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            u[(i, j)] = rng.uniform(spec.speed_lo, 1.0)
            draws[(i, j)] = np.array([rng.uniform(0.5, 1.0) for _ in range(H)])
            zone[(i, j)] = crosses_box(pts[i], pts[j], spec.zone_lo, spec.zone_hi)
    arcs = sorted(u)
    zone_arcs = [a for a in arcs if zone[a]] or arcs[:1]
    delta = {}
    for a in arcs:
        if a in zone_arcs:
            delta[a] = 1.0 - (1.0 - spec.delta) * intensity * draws[a]
        else:
            delta[a] = np.ones(H)
    # pin the worst degradation to delta exactly
    h_star = int(np.argmax(intensity))
    pin = max(zone_arcs, key=lambda a: (draws[a][h_star], [-x for x in a]))
    delta[pin] = delta[pin].copy()
    delta[pin][h_star] = spec.delta
    # every period needs an undegraded arc so f_h is the best factor
    for h in range(H):
        if max(delta[a][h] for a in arcs) < 1.0:
            free = [a for a in arcs if not (a == pin and h == h_star)]
            if free:
                top = max(free, key=lambda a: (delta[a][h], [-x for x in a]))
                delta[top] = delta[top].copy()
                delta[top][h] = 1.0
    return SpeedDecomposition(u=u, f=f, delta=delta)


def _rounded(tau: PwlFunction) -> PwlFunction:
    t = np.array([_round12(x) for x in tau.times])
    v = np.array([_round12(x) for x in tau.values])
    keep = np.concatenate(([True], np.diff(t) > EPS_TIME))
    return PwlFunction(t[keep], v[keep])


def generate(spec: GenSpec) -> TdGraph:
    rng = SplitMix64(spec.seed)
    pts = np.array([[rng.random(), rng.random()] for _ in range(spec.n)])
    sd = decompose(spec, rng, pts)
    grid = np.linspace(0.0, spec.T, spec.periods + 1)[:-1]
    arcs = {}
    for (i, j) in sorted(sd.u):
        length = max(float(np.hypot(*(pts[i] - pts[j]))), 1e-3)
        speed = StepFunction(grid, sd.speed((i, j)))
        arcs[(i, j)] = _rounded(igp_function(speed, length))
    return TdGraph(spec.n, arcs, spec.T, 0.0)


class ParseError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


def format_instance(g: TdGraph, comments: tuple[str, ...] = ()) -> str:
    lines = [f"# {c}" for c in comments]
    lines.append(f"TDTSP {g.n} {g.T:.12g} {g.t0:.12g}")
    for (i, j), tau in g.arcs.items():
        body = " ".join(f"{t:.12g} {v:.12g}" for t, v in zip(tau.times, tau.values))
        lines.append(f"arc {i} {j} {tau.times.size} {body}")
    return "\n".join(lines) + "\n"


def write_instance(path, g: TdGraph, comments: tuple[str, ...] = ()) -> None:
    Path(path).write_text(format_instance(g, comments))


def parse_instance(text: str, path="<string>") -> TdGraph:
    header = None
    arcs: dict[Arc, PwlFunction] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if header is None:
                if tok[0] != "TDTSP" or len(tok) != 4:
                    raise ValueError("expected header 'TDTSP n T t0'")
                header = (int(tok[1]), float(tok[2]), float(tok[3]))
                continue
            if tok[0] != "arc" or len(tok) < 4:
                raise ValueError("expected 'arc i j K t1 v1 ... tK vK'")
            i, j, k = int(tok[1]), int(tok[2]), int(tok[3])
            if k < 1 or len(tok) != 4 + 2 * k:
                raise ValueError(f"arc declares {k} breakpoints but has {len(tok) - 4} numbers")
            vals = [float(x) for x in tok[4:]]
            if (i, j) in arcs:
                raise ValueError(f"duplicate arc ({i},{j})")
            arcs[(i, j)] = PwlFunction(vals[0::2], vals[1::2])
        except (ValueError, IndexError) as exc:
            raise ParseError(path, lineno, str(exc)) from None
    if header is None:
        raise ParseError(path, 0, "missing header")
    n, T, t0 = header
    return TdGraph(n, arcs, T, t0)


def read_instance(path) -> TdGraph:
    return parse_instance(Path(path).read_text(), path)


MANIFEST_FIELDS = ["file", "n", "pattern", "delta", "periods", "T", "seed"]


def manifest_row(path, spec: GenSpec) -> dict:
    d = asdict(spec)
    return {"file": str(path), **{k: d[k] for k in MANIFEST_FIELDS[1:]}}


def write_manifest(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
