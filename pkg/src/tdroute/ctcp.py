"""Constant traversal cost check as a linear program.

Variables: the min-max range ``zeta``, one unit-cost rate ``y[h]`` per grid
interval, and per arc one sampled cost ``x[k]`` per start time plus its
lower/upper envelope.  ``zeta = 0`` means some step profile ``y`` makes every
arc cost constant in the departure time, which certifies path ranking
invariance when the exact candidate grid is used.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import simplex
from .omega import DEFAULT_CAP, OmegaSets, build_omega, horizon_seeds
from .pwl import EPS_TIME, PwlFunction, StepFunction, cost_function
from .tdgraph import Arc, TdGraph

log = logging.getLogger(__name__)

DEFAULT_K = 75
ZERO_REL = 1e-6
START_CAP = 6000
IPM_ROWS = 2000


@dataclass(frozen=True)
class GridPolicy:
    kind: str = "auto"  # exact | reduced | auto
    k: int = DEFAULT_K
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.kind not in ("exact", "reduced", "auto"):
            raise ValueError(f"unknown grid policy {self.kind!r}")
        if self.k < 2:
            raise ValueError("reduced grid needs K >= 2")

    @classmethod
    def parse(cls, text: "str | GridPolicy") -> "GridPolicy":
        if isinstance(text, GridPolicy):
            return text
        m = re.fullmatch(r"\s*(exact|auto|reduced)\s*(?:[:(=]\s*(\d+)\s*\)?)?\s*", text)
        if not m:
            raise ValueError(f"bad grid policy {text!r}; use exact, auto or reduced:K")
        return cls(m.group(1), int(m.group(2)) if m.group(2) else DEFAULT_K)

    def __str__(self) -> str:
        return self.kind if self.kind == "exact" else f"{self.kind}:{self.k}"


def reduced_grid(T: float, k: int = DEFAULT_K) -> np.ndarray:
    """``k`` equally spaced instants spanning ``[0, T]``."""
    if k < 2:
        raise ValueError("K >= 2")
    return np.linspace(0.0, T, k)


def _interval_bounds(grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = grid.astype(float).copy()
    lo[0] = -np.inf
    hi = np.append(grid[1:], np.inf)
    return lo, hi


def coefficient(tau: PwlFunction, grid, s: float, h: int) -> float:
    """Time spent in grid interval ``h`` when leaving at ``s``.

    Interval ``h`` is ``[grid[h], grid[h+1])``; the first extends to -inf and
    the last to +inf.
    """
    grid = np.asarray(grid, dtype=float)
    lo, hi = _interval_bounds(grid)
    arr = float(tau.arrival(s))
    return max(0.0, min(arr, hi[h]) - max(s, lo[h]))


def coefficient_matrix(tau: PwlFunction, grid: np.ndarray, starts: np.ndarray) -> np.ndarray:
    lo, hi = _interval_bounds(grid)
    s = np.asarray(starts, dtype=float)[:, None]
    arr = np.atleast_1d(tau.arrival(starts))[:, None]
    return np.clip(np.minimum(arr, hi) - np.maximum(s, lo), 0.0, None)


@dataclass
class CtcpModel:
    grid: np.ndarray
    starts: dict[Arc, np.ndarray]
    arrivals: dict[Arc, np.ndarray]
    rho: float
    exact: bool
    arcs: list[Arc] = field(init=False)
    x_index: dict[Arc, np.ndarray] = field(init=False)
    lo_index: dict[Arc, int] = field(init=False)
    hi_index: dict[Arc, int] = field(init=False)

    ZETA = 0

    def __post_init__(self):
        if self.grid.size == 0:
            raise ValueError("empty grid")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        self.arcs = sorted(self.starts)
        col = 1 + self.grid.size
        self.x_index, self.lo_index, self.hi_index = {}, {}, {}
        for arc in self.arcs:
            k = self.starts[arc].size
            self.x_index[arc] = np.arange(col, col + k)
            self.lo_index[arc] = col + k
            self.hi_index[arc] = col + k + 1
            col += k + 2
        self._n_vars = col

    @property
    def y_index(self) -> np.ndarray:
        return np.arange(1, 1 + self.grid.size)

    @property
    def n_vars(self) -> int:
        return self._n_vars

    def row_counts(self) -> dict[str, int]:
        """Constraint counts; the rate floor and sign conditions are variable bounds."""
        nx = sum(s.size for s in self.starts.values())
        return {"c1": nx, "c2": len(self.arcs), "c3": nx, "c4": nx, "c5": int(self.grid.size)}

    def coefficients(self, arc: Arc, tau: PwlFunction) -> np.ndarray:
        return coefficient_matrix(tau, self.grid, self.starts[arc])

    def sampled_costs(self, arc: Arc, y: np.ndarray) -> np.ndarray:
        """Travel cost of ``arc`` at its sampled departures under rates ``y``."""
        lo_b, hi_b = _interval_bounds(self.grid)
        s, a_end = self.starts[arc], self.arrivals[arc]
        A = np.clip(np.minimum(a_end[:, None], hi_b) - np.maximum(s[:, None], lo_b), 0.0, None)
        return A @ y

    def to_compact_lp(self, normalized: bool = True, cumulative: bool = True) -> simplex.LpProblem:
        """Same optimum with the sampled costs substituted out.

        Columns: ``zeta``, the rates ``y``, ``lo``/``hi`` per arc and, with
        ``cumulative``, the running integral ``F`` of ``y`` at each grid instant.
        Rows: every sampled cost lies in ``[lo, hi]`` and ``hi - lo <= zeta``.
        A cost is ``F(arrival) - F(start)`` in cumulative form (five nonzeros a
        row) and a direct sum over the grid intervals otherwise.
        """
        H = self.grid.size
        na = len(self.arcs)
        f0 = 1 + H + 2 * na
        n = f0 + (H if cumulative else 0)
        lo_b, hi_b = _interval_bounds(self.grid)
        R, C, V = [], [], []
        r = 0
        if cumulative:
            # F[h+1] - F[h] - (t[h+1] - t[h]) y[h] = 0
            h = np.arange(H - 1)
            rr = np.repeat(np.arange(H - 1), 3)
            R.append(rr)
            C.append(np.column_stack((f0 + h + 1, f0 + h, 1 + h)).ravel())
            V.append(np.column_stack((np.ones(H - 1), -np.ones(H - 1), -np.diff(self.grid))).ravel())
            r = H - 1
        n_eq = r
        for ai, arc in enumerate(self.arcs):
            s, a_end = self.starts[arc], self.arrivals[arc]
            k = s.size
            lo_c, hi_c = 1 + H + 2 * ai, 2 + H + 2 * ai
            if cumulative:
                hs = np.clip(np.searchsorted(self.grid, s, side="right") - 1, 0, H - 1)
                ha = np.clip(np.searchsorted(self.grid, a_end, side="right") - 1, 0, H - 1)
                cols = np.column_stack((f0 + ha, 1 + ha, f0 + hs, 1 + hs))
                vals = np.column_stack((np.ones(k), a_end - self.grid[ha], -np.ones(k), -(s - self.grid[hs])))
            else:
                A = np.clip(np.minimum(a_end[:, None], hi_b) - np.maximum(s[:, None], lo_b), 0.0, None)
                ri, hi_idx = np.nonzero(A)
                cols, vals = None, (ri, 1 + hi_idx, A[ri, hi_idx])
            for sign, env, env_sign in ((1.0, lo_c, -1.0), (-1.0, hi_c, 1.0)):
                rows = r + np.arange(k)
                if cumulative:
                    R.append(np.repeat(rows, 4))
                    C.append(cols.ravel())
                    V.append(sign * vals.ravel())
                else:
                    R.append(r + vals[0])
                    C.append(vals[1])
                    V.append(sign * vals[2])
                R.append(rows)
                C.append(np.full(k, env))
                V.append(np.full(k, env_sign))
                r += k
        # zeta - hi + lo >= 0
        rows = r + np.arange(na)
        lo_cols = 1 + H + 2 * np.arange(na)
        R += [rows, rows, rows]
        C += [np.zeros(na, dtype=int), lo_cols + 1, lo_cols]
        V += [np.ones(na), -np.ones(na), np.ones(na)]
        r += na
        A = sp.csr_matrix((np.concatenate(V), (np.concatenate(R), np.concatenate(C))), shape=(r, n))
        senses = np.array(["="] * n_eq + [">"] * (r - n_eq))
        c = np.zeros(n)
        c[self.ZETA] = 1.0
        lb = np.full(n, -np.inf)
        ub = np.full(n, np.inf)
        lb[0] = 0.0
        lb[1 : 1 + H] = 1.0 if normalized else self.rho
        if cumulative:
            lb[f0] = ub[f0] = 0.0
        return simplex.LpProblem(c, A, senses, np.zeros(r), lb, ub)

    def to_lp(self, form: str = "direct", normalized: bool = True) -> simplex.LpProblem:
        """LP for this model.

        ``normalized`` divides every variable by ``rho`` (the LP is homogeneous
        apart from the rate floor), so the floor becomes 1.  ``form="cumulative"``
        writes each sampled cost as a difference of the running integral of ``y``,
        which keeps rows at a handful of nonzeros on fine grids.
        """
        floor = 1.0 if normalized else self.rho
        H = self.grid.size
        n = self.n_vars + (H if form == "cumulative" else 0)
        f0 = self.n_vars
        blocks: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        senses: list[str] = []
        r = 0

        def add_rows(cols: np.ndarray, vals: np.ndarray, sense: str) -> None:
            """One row per line of the 2-D ``cols`` / ``vals`` arrays; NaN columns are skipped."""
            nonlocal r
            m = cols.shape[0]
            keep = ~np.isnan(cols)
            rr = np.broadcast_to(np.arange(r, r + m)[:, None], cols.shape)
            blocks.append((rr[keep], cols[keep].astype(int), vals[keep]))
            senses.extend(sense * m)
            r += m

        if form == "cumulative":
            h = np.arange(H - 1, dtype=float)
            cols = np.column_stack((f0 + h + 1, f0 + h, 1 + h))
            vals = np.column_stack((np.ones(H - 1), -np.ones(H - 1), -np.diff(self.grid)))
            add_rows(cols, vals, "=")
        lo_b, hi_b = _interval_bounds(self.grid)
        for arc in self.arcs:
            s = self.starts[arc]
            a_end = self.arrivals[arc]
            xi = self.x_index[arc].astype(float)
            if form == "direct":
                A = np.clip(np.minimum(a_end[:, None], hi_b) - np.maximum(s[:, None], lo_b), 0.0, None)
                ycols = np.where(A > 0, np.arange(1, H + 1, dtype=float), np.nan)
                add_rows(np.column_stack((xi, ycols)), np.column_stack((np.ones(s.size), -A)), "=")
            elif form == "cumulative":
                hs = np.clip(np.searchsorted(self.grid, s, side="right") - 1, 0, H - 1)
                ha = np.clip(np.searchsorted(self.grid, a_end, side="right") - 1, 0, H - 1)
                # x = F(arrival) - F(start), F(u) = F_h + (u - t_h) y_h
                cols = np.column_stack((xi, f0 + ha, 1 + ha, f0 + hs, 1 + hs)).astype(float)
                vals = np.column_stack(
                    (np.ones(s.size), -np.ones(s.size), -(a_end - self.grid[ha]), np.ones(s.size), s - self.grid[hs])
                )
                add_rows(cols, vals, "=")
            else:
                raise ValueError(f"unknown LP form {form!r}")
        zeta_cols = np.array([[self.ZETA, self.hi_index[a], self.lo_index[a]] for a in self.arcs], dtype=float)
        add_rows(zeta_cols, np.tile([1.0, -1.0, 1.0], (len(self.arcs), 1)), ">")
        xs = np.concatenate([self.x_index[a] for a in self.arcs]).astype(float)
        los = np.concatenate([np.full(self.x_index[a].size, self.lo_index[a]) for a in self.arcs]).astype(float)
        his = np.concatenate([np.full(self.x_index[a].size, self.hi_index[a]) for a in self.arcs]).astype(float)
        pm = np.tile([1.0, -1.0], (xs.size, 1))
        add_rows(np.column_stack((xs, los)), pm, ">")
        add_rows(np.column_stack((his, xs)), pm, ">")
        rows = np.concatenate([b[0] for b in blocks])
        cols = np.concatenate([b[1] for b in blocks])
        vals = np.concatenate([b[2] for b in blocks])
        rhs = np.zeros(r)

        A = sp.csr_matrix((vals, (rows, cols)), shape=(r, n))
        c = np.zeros(n)
        c[self.ZETA] = 1.0
        lb = np.zeros(n)
        ub = np.full(n, np.inf)
        lb[self.y_index] = floor
        for arc in self.arcs:
            lb[self.lo_index[arc]] = -np.inf
            lb[self.hi_index[arc]] = -np.inf
        if form == "cumulative":
            lb[f0:] = -np.inf
            lb[f0] = ub[f0] = 0.0
        return simplex.LpProblem(c, A, senses, rhs, lb, ub)


def default_rho(grid: np.ndarray) -> float:
    """Reciprocal of the narrowest grid interval."""
    if grid.size < 2:
        return 1.0
    return 1.0 / float(np.min(np.diff(grid)))


def compact_starts(tau: PwlFunction, grid: np.ndarray, T: float) -> np.ndarray:
    """Departures in ``[0, T]`` where the cost under any step function on ``grid`` can bend.

    The cost is linear between the grid, the arc's own breakpoints and the
    departures arriving on a grid instant, so these plus both horizon ends fix
    its range over the horizon.
    """
    t = np.concatenate((grid, tau.times, np.atleast_1d(tau.arrival_inverse(grid)), [0.0, T]))
    t = np.where(np.abs(t - T) <= EPS_TIME, T, np.where(np.abs(t) <= EPS_TIME, 0.0, t))
    t = np.unique(t[(t >= 0.0) & (t <= T)])
    return t[np.concatenate(([True], np.diff(t) > EPS_TIME))]


def build_model(g: TdGraph, grid_source: "OmegaSets | np.ndarray", rho: float | None = None) -> CtcpModel:
    """Model over an exact candidate set (``OmegaSets``) or a shared reduced grid."""
    if isinstance(grid_source, OmegaSets):
        # the first rate also covers everything before grid[0], so 0 must be a
        # grid instant for a change at the first candidate to be expressible
        grid = np.asarray(grid_source.global_, dtype=float)
        if grid.size == 0 or grid[0] > EPS_TIME:
            grid = np.concatenate(([0.0], grid))
        starts = {a: compact_starts(g.arcs[a], grid, g.T) for a in g.arcs}
        exact = True
    else:
        grid = np.asarray(grid_source, dtype=float)
        starts = {a: grid for a in g.arcs}
        exact = False
    if grid.size == 0:
        raise ValueError("empty grid")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    arrivals = {a: np.atleast_1d(g.arcs[a].arrival(starts[a])) for a in g.arcs}
    return CtcpModel(grid, starts, arrivals, default_rho(grid) if rho is None else float(rho), exact)


@dataclass
class CtcpResult:
    zeta_star: float
    y_star: StepFunction
    x_min: dict[Arc, float]
    x_funcs: dict[Arc, PwlFunction]
    is_invariant: bool
    grid: np.ndarray
    exact: bool
    rho: float
    eps_zero: float
    engine: str = ""
    lp_shape: tuple[int, int] = (0, 0)

    def cost_functions(self, g: TdGraph) -> dict[Arc, PwlFunction]:
        """Exact travel cost of every arc under ``y_star``."""
        return {a: cost_function(tau, self.y_star) for a, tau in g.arcs.items()}

    def to_text(self) -> str:
        lines = [
            f"zeta_star={self.zeta_star:.12g}",
            f"invariant={'yes' if self.is_invariant else 'no'}",
            f"grid={'exact' if self.exact else 'reduced'}",
            f"grid_size={self.grid.size}",
            f"rho={self.rho:.12g}",
            f"eps_zero={self.eps_zero:.6g}",
        ]
        lines += [f"c_min[{i},{j}]={v:.12g}" for (i, j), v in sorted(self.x_min.items())]
        return "\n".join(lines)


def eps_zero(g: TdGraph, rho: float) -> float:
    """Zero threshold for ``zeta``: 1e-6 of the mean arc duration, in floor-rate units."""
    return ZERO_REL * rho * g.mean_travel_time()


def _checked(sol: simplex.LpSolution) -> simplex.LpSolution:
    if not sol.optimal:
        # uniform y at the floor is always feasible and zeta >= 0 bounds the objective
        raise simplex.LpError(f"constant traversal cost LP reported {sol.status}")
    return sol


def solve_model(g: TdGraph, model: CtcpModel, engine: str = "auto", form: str = "auto") -> CtcpResult:
    if form == "auto":
        form = "compact"
    lp = model.to_compact_lp(normalized=True) if form == "compact" else model.to_lp(form=form, normalized=True)
    # dual simplex handles the degenerate exact-grid programs best, interior
    # point the large reduced-grid ones (measured; see the notes)
    method = "highs-ds" if model.exact or lp.shape[0] <= IPM_ROWS else "highs-ipm"
    sol = _checked(simplex.solve(lp, engine, method=method))
    x = sol.x * model.rho
    y = np.maximum(x[model.y_index], model.rho)
    zeta = max(0.0, float(x[model.ZETA]))
    x_min, x_funcs = {}, {}
    for arc in model.arcs:
        xs = model.sampled_costs(arc, y) if form == "compact" else x[model.x_index[arc]]
        x_min[arc] = float(xs.min())
        x_funcs[arc] = PwlFunction(model.starts[arc], xs)
    ez = eps_zero(g, model.rho)
    return CtcpResult(
        zeta_star=zeta,
        y_star=StepFunction(model.grid, y),
        x_min=x_min,
        x_funcs=x_funcs,
        is_invariant=zeta <= ez,
        grid=model.grid,
        exact=model.exact,
        rho=model.rho,
        eps_zero=ez,
        engine=sol.engine,
        lp_shape=lp.shape,
    )


def choose_grid(g: TdGraph, policy: "GridPolicy | str" = "auto") -> "OmegaSets | np.ndarray":
    """Exact candidate set, or the reduced grid when the policy says so.

    ``auto`` keeps the exact set only while both the shared grid (``cap``) and
    the total number of sampled departures (``START_CAP``) stay small.
    """
    policy = GridPolicy.parse(policy)
    if policy.kind == "reduced":
        return reduced_grid(g.T, policy.k)
    if policy.kind == "auto" and horizon_seeds(g).size > policy.cap:
        # the candidate set contains every seed, so it is already too large
        return reduced_grid(g.T, policy.k)
    omega = build_omega(g)
    if policy.kind == "auto":
        total = sum(compact_starts(tau, omega.global_, g.T).size for tau in g.arcs.values())
        if omega.exceeds(policy.cap) or total > START_CAP:
            log.info(
                "candidate grid has %d instants (%d departures); using %d-point reduced grid",
                len(omega), total, policy.k,
            )
            return reduced_grid(g.T, policy.k)
    return omega


def check(
    g: TdGraph,
    rho: float | None = None,
    policy: "GridPolicy | str" = "auto",
    engine: str = "auto",
    form: str = "auto",
) -> CtcpResult:
    """Build the candidate grid, solve the LP and decide constant traversal cost."""
    model = build_model(g, choose_grid(g, policy), rho)
    return solve_model(g, model, engine=engine, form=form)
