"""Linear programs: a dense two-phase simplex, a HiGHS adapter and a certificate check.

Problem form::

    min  c @ x
    s.t. A[i] @ x  (<= | = | >=)  rhs[i]
         lb <= x <= ub

Dual sign convention (minimisation): ``duals[i] >= 0`` on ``>=`` rows,
``<= 0`` on ``<=`` rows, free on ``=`` rows; ``reduced_costs = c - A.T @ duals``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

EPS_FEAS = 1e-8
EPS_DUAL = 1e-7
PIVOT_TOL = 1e-10
REFACTOR_EVERY = 50
# simplex tableau cells above which "auto" hands the problem to HiGHS
BUILTIN_MAX_CELLS = 20_000
IPM_NNZ = 50_000

SENSES = ("<", "=", ">")


class LpError(RuntimeError):
    pass


@dataclass
class LpProblem:
    c: np.ndarray
    A: np.ndarray | sp.spmatrix
    senses: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    col_names: list[str] | None = None
    row_names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        if sp.issparse(self.A):
            self.A = sp.csr_matrix(self.A, dtype=float)
        else:
            self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.senses = np.asarray(self.senses, dtype="<U1").reshape(-1)
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        m = self.rhs.size
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(-1)
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(-1)
        if self.A.shape != (m, n) or self.senses.size != m or self.lb.size != n or self.ub.size != n:
            raise ValueError("inconsistent LP dimensions")
        if not set(self.senses) <= set(SENSES):
            raise ValueError(f"unknown row sense in {set(self.senses)}")
        data = self.A.data if sp.issparse(self.A) else self.A
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(data)) and np.all(np.isfinite(self.rhs))):
            raise ValueError("LP coefficients must be finite")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound above upper bound")

    @classmethod
    def from_rows(
        cls,
        c: Sequence[float],
        rows: Iterable[tuple[Sequence[float], str, float]],
        lb: Sequence[float] | None = None,
        ub: Sequence[float] | None = None,
    ) -> "LpProblem":
        rows = list(rows)
        n = len(c)
        A = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), n)
        return cls(c, A, [r[1] for r in rows], [r[2] for r in rows], lb, ub)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def dense(self) -> np.ndarray:
        return self.A.toarray() if sp.issparse(self.A) else self.A

    def activity(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.A @ x).reshape(-1)

    def scaled_objective(self, alpha: float) -> "LpProblem":
        return LpProblem(self.c * alpha, self.A, self.senses, self.rhs, self.lb, self.ub,
                         self.col_names, self.row_names)


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray = field(default_factory=lambda: np.empty(0))
    duals: np.ndarray = field(default_factory=lambda: np.empty(0))
    reduced_costs: np.ndarray = field(default_factory=lambda: np.empty(0))
    objective: float = float("nan")
    iterations: int = 0
    engine: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# --- dense two-phase simplex -------------------------------------------------


class _Tableau:
    """Standard-form tableau ``M @ z = rhs, z >= 0`` with an artificial per row."""

    def __init__(self, M: np.ndarray, rhs: np.ndarray, n_real: int, dantzig_limit: int):
        m = M.shape[0]
        self.m = m
        self.n_real = n_real
        self.M0 = np.hstack((M, np.eye(m)))
        self.rhs0 = rhs.astype(float).copy()
        self.M = self.M0.copy()
        self.rhs = self.rhs0.copy()
        self.basis = list(range(n_real, n_real + m))
        self.dantzig_limit = dantzig_limit
        self.iterations = 0

    def refactor(self) -> None:
        """Rebuild the tableau from the original matrix to shed accumulated round-off."""
        if not self.m:
            return
        B = self.M0[:, self.basis]
        try:
            self.M = np.linalg.solve(B, self.M0)
            self.rhs = np.linalg.solve(B, self.rhs0)
        except np.linalg.LinAlgError:
            return
        tiny = 1e-9 * max(1.0, float(np.max(np.abs(self.rhs0))))
        self.rhs[(self.rhs < 0.0) & (self.rhs > -tiny)] = 0.0

    def pivot(self, r: int, j: int) -> None:
        M = self.M
        piv = M[r, j]
        M[r] /= piv
        self.rhs[r] /= piv
        col = M[:, j].copy()
        col[r] = 0.0
        nz = np.nonzero(np.abs(col) > 0.0)[0]
        if nz.size:
            M[nz] -= np.outer(col[nz], M[r])
            self.rhs[nz] -= col[nz] * self.rhs[r]
        M[r, j] = 1.0
        M[nz, j] = 0.0
        self.basis[r] = j
        self.iterations += 1

    def run(self, cost: np.ndarray, allowed: np.ndarray, max_iter: int) -> str:
        """Minimise ``cost @ z`` from the current basis; returns optimal | unbounded."""
        steps = 0
        while True:
            cb = cost[self.basis]
            d = cost - cb @ self.M
            d[~allowed] = 0.0
            d[self.basis] = 0.0
            scale = max(1.0, float(np.max(np.abs(cost))))
            cand = np.nonzero(d < -EPS_FEAS * scale)[0]
            if cand.size == 0:
                return "optimal"
            if steps < self.dantzig_limit:
                j = int(cand[np.argmin(d[cand])])
            else:
                j = int(cand[0])  # Bland
            col = self.M[:, j]
            pos = np.nonzero(col > max(PIVOT_TOL, 1e-9 * float(np.max(np.abs(col)))))[0]
            if pos.size == 0:
                return "unbounded"
            ratios = self.rhs[pos] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
            if steps < self.dantzig_limit:
                r = int(ties[np.argmax(col[ties])])  # largest pivot: steadier numerics
            else:
                r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, j)
            steps += 1
            if steps % REFACTOR_EVERY == 0:
                self.refactor()
            if steps > max_iter:
                raise LpError("simplex iteration limit reached")

    def primal(self) -> np.ndarray:
        z = np.zeros(self.M.shape[1])
        z[self.basis] = self.rhs
        return z


def _to_standard(p: LpProblem):
    """Substitute bounds away: ``x = shift + X @ z`` with ``z >= 0``."""
    n = p.c.size
    cols = []
    shift = np.zeros(n)
    extra_rows = []  # (column of z, upper bound on it)
    for j in range(n):
        lo, hi = p.lb[j], p.ub[j]
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    X = np.zeros((n, len(cols)))
    for k, (j, s) in enumerate(cols):
        X[j, k] = s
    return X, shift, extra_rows


def _solve_builtin(p: LpProblem, max_iter: int | None = None) -> LpSolution:
    A = p.dense()
    m0, n = A.shape
    X, shift, extra = _to_standard(p)
    nz = X.shape[1]
    rows = A @ X
    rhs = p.rhs - A @ shift
    senses = list(p.senses)
    if extra:
        U = np.zeros((len(extra), nz))
        for r, (k, cap) in enumerate(extra):
            U[r, k] = 1.0
        rows = np.vstack((rows, U))
        rhs = np.concatenate((rhs, [cap for _, cap in extra]))
        senses += ["<"] * len(extra)
    m = rows.shape[0]
    sign = np.where(rhs < 0, -1.0, 1.0)
    rows = rows * sign[:, None]
    rhs = rhs * sign
    senses = [s if sg > 0 else {"<": ">", ">": "<", "=": "="}[s] for s, sg in zip(senses, sign)]
    slack_rows = [i for i, s in enumerate(senses) if s != "="]
    S = np.zeros((m, len(slack_rows)))
    for k, i in enumerate(slack_rows):
        S[i, k] = 1.0 if senses[i] == "<" else -1.0
    body = np.hstack((rows, S))
    n_real = body.shape[1]
    limit = max_iter or 50 * (m + n_real + 10)
    tab = _Tableau(body, rhs, n_real, dantzig_limit=10 * (m + n_real))
    n_all = n_real + m

    # phase 1
    cost1 = np.zeros(n_all)
    cost1[n_real:] = 1.0
    allowed = np.ones(n_all, dtype=bool)
    tab.run(cost1, allowed, limit)
    tab.refactor()
    infeas = float(tab.rhs[[i for i, b in enumerate(tab.basis) if b >= n_real]].sum()) if m else 0.0
    if infeas > EPS_FEAS * max(1.0, float(np.abs(rhs).max(initial=0.0))):
        return LpSolution("infeasible", iterations=tab.iterations, engine="simplex")
    for r, b in enumerate(list(tab.basis)):
        if b >= n_real:
            row = tab.M[r, :n_real]
            js = np.nonzero(np.abs(row) > PIVOT_TOL)[0]
            if js.size:
                tab.pivot(r, int(js[np.argmax(np.abs(row[js]))]))
            # otherwise the row is redundant and its artificial stays basic at zero

    # phase 2
    cost2 = np.zeros(n_all)
    cost2[:nz] = X.T @ p.c
    allowed = np.zeros(n_all, dtype=bool)
    allowed[:n_real] = True
    status = tab.run(cost2, allowed, limit)
    if status == "unbounded":
        return LpSolution("unbounded", iterations=tab.iterations, engine="simplex")
    tab.refactor()
    if tab.run(cost2, allowed, limit) == "unbounded":
        return LpSolution("unbounded", iterations=tab.iterations, engine="simplex")
    z = tab.primal()
    x = shift + X @ z[:nz]
    binv = tab.M[:, n_real:]
    y = cost2[tab.basis] @ binv
    duals = (y * sign)[:m0]
    red = p.c - A.T @ duals
    return LpSolution("optimal", x, duals, red, float(p.c @ x), tab.iterations, "simplex")


# --- HiGHS adapter -----------------------------------------------------------


def _solve_highs(p: LpProblem, method: str | None = None) -> LpSolution:
    from scipy.optimize import linprog

    A = sp.csr_matrix(p.A)
    ub_rows = np.nonzero(p.senses != "=")[0]
    eq_rows = np.nonzero(p.senses == "=")[0]
    flip = np.where(p.senses[ub_rows] == ">", -1.0, 1.0)
    A_ub = sp.diags(flip) @ A[ub_rows] if ub_rows.size else None
    b_ub = flip * p.rhs[ub_rows] if ub_rows.size else None
    A_eq = A[eq_rows] if eq_rows.size else None
    b_eq = p.rhs[eq_rows] if eq_rows.size else None
    bounds = np.column_stack((np.where(np.isfinite(p.lb), p.lb, -np.inf), np.where(np.isfinite(p.ub), p.ub, np.inf)))
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi) for lo, hi in bounds]
    if method is None:
        # interior point (with crossover) wins clearly on the larger LPs
        method = "highs-ipm" if A.nnz > IPM_NNZ else "highs-ds"
    res = linprog(p.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method=method)
    if res.status == 2:
        # presolve may report "infeasible" for infeasible-or-unbounded
        if np.any(p.c != 0):
            probe = _solve_highs(LpProblem(np.zeros_like(p.c), p.A, p.senses, p.rhs, p.lb, p.ub))
            if probe.optimal:
                return LpSolution("unbounded", engine="highs")
        return LpSolution("infeasible", engine="highs")
    if res.status == 3:
        return LpSolution("unbounded", engine="highs")
    if res.status != 0:
        raise LpError(f"HiGHS failed: {res.message}")
    duals = np.zeros(p.rhs.size)
    if ub_rows.size:
        duals[ub_rows] = flip * res.ineqlin.marginals
    if eq_rows.size:
        duals[eq_rows] = res.eqlin.marginals
    red = p.c - np.asarray(A.T @ duals).reshape(-1)
    return LpSolution("optimal", np.asarray(res.x), duals, red, float(res.fun), int(res.nit), "highs")


def builtin_cells(p: LpProblem) -> int:
    m, n = p.shape
    extra = int(np.sum(np.isfinite(p.ub) & np.isfinite(p.lb)))
    return (m + extra) * (n + 2 * (m + extra))


def solve(p: LpProblem, engine: str = "auto", method: str | None = None) -> LpSolution:
    """Solve ``p``; infeasibility and unboundedness are reported in ``status``.

    ``method`` picks the scipy HiGHS algorithm when HiGHS is used.
    """
    if engine == "auto":
        engine = "simplex" if builtin_cells(p) <= BUILTIN_MAX_CELLS else "highs"
    if engine == "simplex":
        return _solve_builtin(p)
    if engine == "highs":
        return _solve_highs(p, method)
    raise ValueError(f"unknown LP engine {engine!r}")


def certify(p: LpProblem, s: LpSolution, eps: float = EPS_DUAL) -> bool:
    """Check primal feasibility, dual feasibility, complementary slackness and the duality gap."""
    if not s.optimal:
        return False
    x, pi = s.x, s.duals
    act = p.activity(x)
    absA = abs(p.A) if sp.issparse(p.A) else np.abs(p.A)
    mag = np.asarray(absA @ np.abs(x)).reshape(-1)
    tol = eps * np.maximum(1.0, np.maximum(np.abs(p.rhs), mag))
    slack = act - p.rhs
    le, eq, ge = p.senses == "<", p.senses == "=", p.senses == ">"
    if np.any(slack[le] > tol[le]) or np.any(np.abs(slack[eq]) > tol[eq]) or np.any(slack[ge] < -tol[ge]):
        return False
    xtol = eps * np.maximum(1.0, np.abs(x))
    if np.any(x < p.lb - xtol) or np.any(x > p.ub + xtol):
        return False
    dscale = eps * max(1.0, float(np.max(np.abs(p.c), initial=0.0)), float(np.max(np.abs(pi), initial=0.0)))
    if np.any(pi[le] > dscale) or np.any(pi[ge] < -dscale):
        return False
    if np.any(np.abs(pi) * np.abs(slack) > tol * max(1.0, float(np.max(np.abs(pi), initial=0.0)))):
        return False
    d = np.asarray(p.c - np.asarray(p.A.T @ pi).reshape(-1))
    at_lb = np.isfinite(p.lb) & (np.abs(x - p.lb) <= xtol)
    at_ub = np.isfinite(p.ub) & (np.abs(x - p.ub) <= xtol)
    if np.any((d > dscale) & ~at_lb) or np.any((d < -dscale) & ~at_ub):
        return False
    dual_obj = float(pi @ p.rhs)
    dual_obj += float(np.sum(np.where(d > 0, d, 0.0) * np.where(np.isfinite(p.lb), p.lb, 0.0)))
    dual_obj += float(np.sum(np.where(d < 0, d, 0.0) * np.where(np.isfinite(p.ub), p.ub, 0.0)))
    primal_obj = float(p.c @ x)
    return abs(primal_obj - dual_obj) <= eps * max(1.0, abs(primal_obj), float(np.sum(np.abs(p.c * x))))


# --- fixed-column MPS ----------------------------------------------------------


def _fmt(v: float) -> str:
    s = f"{v:.12g}"
    return s if len(s) <= 12 else f"{v:.6e}"


def write_mps(p: LpProblem, path, name: str = "TDROUTE") -> None:
    """Dump ``p`` in fixed-column MPS for cross-checking with external solvers."""
    m, n = p.shape
    rn = p.row_names or [f"R{i}" for i in range(m)]
    cn = p.col_names or [f"C{j}" for j in range(n)]
    if max(map(len, rn + cn), default=0) > 8:
        rn = [f"R{i}" for i in range(m)]
        cn = [f"C{j}" for j in range(n)]
    kind = {"<": "L", "=": "E", ">": "G"}
    A = sp.csc_matrix(p.A)
    out = [f"NAME          {name}", "ROWS", " N  COST"]
    out += [f" {kind[s]}  {r}" for s, r in zip(p.senses, rn)]
    out.append("COLUMNS")
    for j in range(n):
        entries = [("COST", p.c[j])] if p.c[j] != 0 else []
        lo, hi = A.indptr[j], A.indptr[j + 1]
        entries += [(rn[i], v) for i, v in zip(A.indices[lo:hi], A.data[lo:hi])]
        if not entries:
            entries = [("COST", 0.0)]
        for r, v in entries:
            out.append(f"    {cn[j]:<8}  {r:<8}  {_fmt(v):>12}")
    out.append("RHS")
    for i in range(m):
        if p.rhs[i] != 0:
            out.append(f"    {'RHS':<8}  {rn[i]:<8}  {_fmt(p.rhs[i]):>12}")
    out.append("BOUNDS")
    for j in range(n):
        lo, hi = p.lb[j], p.ub[j]
        if not np.isfinite(lo) and not np.isfinite(hi):
            out.append(f" FR {'BND':<8}  {cn[j]:<8}")
            continue
        if not np.isfinite(lo):
            out.append(f" MI {'BND':<8}  {cn[j]:<8}")
        elif lo != 0:
            out.append(f" LO {'BND':<8}  {cn[j]:<8}  {_fmt(lo):>12}")
        if np.isfinite(hi):
            out.append(f" UP {'BND':<8}  {cn[j]:<8}  {_fmt(hi):>12}")
    out.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def read_mps(path) -> LpProblem:
    """Parse the subset of fixed-column MPS written by :func:`write_mps`."""
    section = None
    rows: dict[str, str] = {}
    row_order: list[str] = []
    cols: dict[str, dict[str, float]] = {}
    rhs: dict[str, float] = {}
    bounds: dict[str, list[float]] = {}
    obj = None
    inv = {"L": "<", "E": "=", "G": ">"}
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            if not line.startswith(" "):
                section = line.split()[0]
                continue
            f = line.split()
            if section == "ROWS":
                if f[0] == "N":
                    obj = f[1]
                else:
                    rows[f[1]] = inv[f[0]]
                    row_order.append(f[1])
            elif section == "COLUMNS":
                cols.setdefault(f[0], {})[f[1]] = float(f[2])
            elif section == "RHS":
                rhs[f[1]] = float(f[2])
            elif section == "BOUNDS":
                b = bounds.setdefault(f[2], [0.0, np.inf])
                if f[0] == "FR":
                    b[0], b[1] = -np.inf, np.inf
                elif f[0] == "MI":
                    b[0] = -np.inf
                elif f[0] == "LO":
                    b[0] = float(f[3])
                elif f[0] == "UP":
                    b[1] = float(f[3])
    names = list(cols)
    ridx = {r: i for i, r in enumerate(row_order)}
    A = np.zeros((len(row_order), len(names)))
    c = np.zeros(len(names))
    for j, cname in enumerate(names):
        for r, v in cols[cname].items():
            if r == obj:
                c[j] = v
            else:
                A[ridx[r], j] = v
    lb = np.array([bounds.get(cname, [0.0, np.inf])[0] for cname in names])
    ub = np.array([bounds.get(cname, [0.0, np.inf])[1] for cname in names])
    return LpProblem(c, A, [rows[r] for r in row_order], [rhs.get(r, 0.0) for r in row_order], lb, ub,
                     col_names=names, row_names=row_order)
