"""Dense revised primal simplex for standard-form LPs.

Phase 1 starts from a crash basis of unit columns, padded with artificial
columns (index ``n + i`` stands for the artificial of row ``i``).  Artificials
that cannot be pivoted out after phase 1 belong to redundant rows; they stay
basic at zero and never re-enter.  Pricing is Dantzig with a permanent switch
to Bland's rule after ``3(m+n)`` iterations without objective progress.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import NumericalError

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
DRIFT_TOL = 1e-9
COND_CAP = 1e13

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class Basis:
    columns: tuple
    art_sign: tuple  # sign of each row's artificial column
    lu: tuple = field(repr=False, compare=False)

    @property
    def m(self) -> int:
        return len(self.columns)

    def key(self) -> str:
        """Order-independent hash used to detect revisited bases."""
        text = ",".join(str(c) for c in sorted(self.columns))
        return hashlib.blake2b(text.encode(), digest_size=8).hexdigest()


@dataclass
class LpResult:
    status: str
    x: Optional[np.ndarray] = None
    obj: float = float("nan")
    duals: Optional[np.ndarray] = None
    basis: Optional[Basis] = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class TableauRow:
    lam: np.ndarray        # dense row of B^-1, entries below 1e-11 zeroed
    alpha: np.ndarray
    beta: float
    basic_var: int
    row_index: int

    def sparse_lambda(self) -> tuple:
        nz = np.flatnonzero(self.lam)
        return tuple((int(i), float(self.lam[i])) for i in nz)


def _basis_matrix(A, columns, art_sign):
    m, n = A.shape
    B = np.zeros((m, m))
    for pos, j in enumerate(columns):
        if j < n:
            B[:, pos] = A[:, j]
        else:
            B[j - n, pos] = art_sign[j - n]
    return B


class _Solver:
    def __init__(self, A, b, art_sign):
        self.A = A
        self.b = b
        self.m, self.n = A.shape
        self.art_sign = art_sign
        self.iterations = 0
        self.max_iter = 50 * (self.m + self.n)

    def column(self, j):
        if j < self.n:
            return self.A[:, j]
        e = np.zeros(self.m)
        e[j - self.n] = self.art_sign[j - self.n]
        return e

    def factor(self, columns):
        B = _basis_matrix(self.A, columns, self.art_sign)
        try:
            lu = lu_factor(B, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:  # pragma: no cover
            raise NumericalError(f"basis factorization failed: {exc}") from exc
        if np.min(np.abs(np.diag(lu[0]))) <= 1e-13 * max(1.0, np.max(np.abs(B))):
            raise NumericalError("singular basis")
        self.Binv = lu_solve(lu, np.eye(self.m))
        self.B = B
        self.pivots_since_refactor = 0
        return lu

    def run(self, columns, cost, allowed, bland=False):
        """Primal simplex from a feasible basis. Returns (status, columns)."""
        m = self.m
        columns = list(columns)
        self.factor(columns)
        is_basic = np.zeros(self.n + m, dtype=bool)
        is_basic[columns] = True
        stall = 0
        last_obj = None
        stall_cap = 3 * (m + self.n)
        Aall_cost = cost
        while True:
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT, columns
            xB = self.Binv @ self.b
            if self.pivots_since_refactor >= REFACTOR_EVERY or \
                    np.max(np.abs(self.B @ xB - self.b), initial=0.0) > DRIFT_TOL * (1 + np.max(np.abs(self.b))):
                self.factor(columns)
                xB = self.Binv @ self.b
            xB = np.maximum(xB, 0.0)
            cB = Aall_cost[columns]
            y = cB @ self.Binv
            obj = float(cB @ xB)
            if last_obj is not None and obj >= last_obj - 1e-12 * (1 + abs(last_obj)):
                stall += 1
                if stall >= stall_cap:
                    bland = True
            else:
                stall = 0
            last_obj = obj
            d = Aall_cost[: self.n] - y @ self.A
            cand = allowed & ~is_basic[: self.n] & (d < -OPT_TOL)
            if not cand.any():
                return OPTIMAL, columns
            if bland:
                q = int(np.flatnonzero(cand)[0])
            else:
                dd = np.where(cand, d, np.inf)
                q = int(np.argmin(dd))
            w = self.Binv @ self.A[:, q]
            pos = np.flatnonzero(w > PIVOT_TOL)
            if pos.size == 0:
                return UNBOUNDED, columns
            ratios = xB[pos] / w[pos]
            tmin = ratios.min()
            ties = pos[ratios <= tmin + 1e-12 * (1 + abs(tmin))]
            r = int(min(ties, key=lambda i: columns[i]))
            self._pivot(columns, is_basic, r, q, w)
            self.iterations += 1

    def _pivot(self, columns, is_basic, r, q, w):
        is_basic[columns[r]] = False
        columns[r] = q
        is_basic[q] = True
        piv = w[r]
        row = self.Binv[r] / piv
        self.Binv -= np.outer(w, row)
        self.Binv[r] = row
        self.B[:, r] = self.column(q)
        self.pivots_since_refactor += 1


def _crash(A, b):
    """Unit columns usable as an initial basis; artificials elsewhere."""
    m, n = A.shape
    columns = [n + i for i in range(m)]
    taken = set()
    nz_count = np.count_nonzero(A, axis=0)
    for j in np.flatnonzero(nz_count == 1):
        i = int(np.flatnonzero(A[:, j])[0])
        if i in taken or A[i, j] <= 0:
            continue
        if b[i] < 0:
            continue
        # scale is fine: x_j = b_i / a_ij >= 0
        columns[i] = int(j)
        taken.add(i)
    return columns


def _finish(solver, columns, status, cost):
    A, b = solver.A, solver.b
    m, n = A.shape
    if status != OPTIMAL:
        return LpResult(status, iterations=solver.iterations)
    lu = solver.factor(columns)
    if np.linalg.cond(solver.B, 1) > COND_CAP:
        raise NumericalError("basis condition estimate exceeds cap")
    basis = Basis(tuple(int(c) for c in columns), tuple(solver.art_sign), lu)
    xB = lu_solve(lu, b)
    x = np.zeros(n)
    for pos, j in enumerate(columns):
        if j < n:
            x[j] = xB[pos]
    x[np.abs(x) < 1e-13] = 0.0
    cB = np.array([cost[j] if j < n else 0.0 for j in columns])
    duals = lu_solve(lu, cB, trans=1)
    return LpResult(OPTIMAL, x, float(cost @ x), duals, basis, solver.iterations)


def _phase1(solver):
    A, b = solver.A, solver.b
    m, n = A.shape
    columns = _crash(A, b)
    cost = np.zeros(n + m)
    arts = [c for c in columns if c >= n]
    cost[arts] = 1.0
    allowed = np.ones(n, dtype=bool)
    status, columns = solver.run(columns, cost, allowed)
    if status == ITERATION_LIMIT:
        return status, columns
    xB = solver.Binv @ b
    infeas = sum(xB[p] for p, c in enumerate(columns) if c >= n)
    if infeas > FEAS_TOL * (1 + np.max(np.abs(b), initial=0.0)):
        return INFEASIBLE, columns
    # drive remaining artificials out where the row allows it
    is_basic = np.zeros(n + m, dtype=bool)
    is_basic[columns] = True
    for p in range(m):
        if columns[p] < n:
            continue
        row = solver.Binv[p] @ A
        cand = np.flatnonzero((np.abs(row) > 1e-9) & ~is_basic[:n])
        if cand.size:
            q = int(cand[np.argmax(np.abs(row[cand]))])
            w = solver.Binv @ A[:, q]
            solver._pivot(columns, is_basic, p, q, w)
    return OPTIMAL, columns


def _art_signs(b):
    return tuple(1.0 if bi >= 0 else -1.0 for bi in b)


def solve_arrays(A, b, c, basis: Optional[Sequence[int]] = None) -> LpResult:
    """Solve ``min c'x, Ax = b, x >= 0`` given dense arrays."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if c.shape != (n,):
        raise ValueError(f"objective has length {c.shape}, expected {n}")
    art_sign = _art_signs(b)
    solver = _Solver(A, b, art_sign)
    columns = None
    if basis is not None:
        columns = _warm_columns(solver, basis)
    if columns is None:
        status, columns = _phase1(solver)
        if status != OPTIMAL:
            return LpResult(status, iterations=solver.iterations)
    cost = np.concatenate([c, np.zeros(m)])
    allowed = np.ones(n, dtype=bool)
    status, columns = solver.run(columns, cost, allowed)
    return _finish(solver, columns, status, c)


def _warm_columns(solver, basis):
    """Reuse a basis if it is nonsingular and primal feasible for this data."""
    cols = list(basis.columns if isinstance(basis, Basis) else basis)
    n, m = solver.n, solver.m
    if len(cols) != m or len(set(cols)) != m:
        return None
    if isinstance(basis, Basis):
        solver.art_sign = basis.art_sign
    try:
        solver.factor(cols)
    except NumericalError:
        return None
    xB = solver.Binv @ solver.b
    tol = FEAS_TOL * (1 + np.max(np.abs(solver.b), initial=0.0))
    for p, j in enumerate(cols):
        if xB[p] < -tol or (j >= n and abs(xB[p]) > tol):
            return None
    return cols


def solve(sf, objective=None) -> LpResult:
    c = sf.c if objective is None else np.asarray(objective, dtype=float)
    return solve_arrays(sf.dense, sf.b, c)


def resolve_with_objective(sf, basis, objective) -> LpResult:
    """Warm-started re-solve; falls back to phase 1 if ``basis`` is not usable."""
    return solve_arrays(sf.dense, sf.b, np.asarray(objective, dtype=float), basis=basis)


def tableau_row(sf, basis: Basis, i: int) -> TableauRow:
    """Row ``i`` of the tableau: ``lambda = e_i' B^-1``, ``alpha = lambda'A``."""
    m = sf.m
    if not 0 <= i < m:
        raise IndexError(f"row {i} out of range for {m} rows")
    e = np.zeros(m)
    e[i] = 1.0
    lam = lu_solve(basis.lu, e, trans=1)
    if not np.all(np.isfinite(lam)):
        raise NumericalError("non-finite multiplier from basis factorization")
    lam[np.abs(lam) < 1e-11] = 0.0
    alpha = lam @ sf.dense
    beta = float(lam @ sf.b)
    return TableauRow(lam, alpha, beta, int(basis.columns[i]), i)


def tableau_rows(sf, basis: Basis) -> list:
    return [tableau_row(sf, basis, i) for i in range(sf.m)]


def basis_to_json(basis: Basis, sf=None) -> dict:
    """Debug dump of a basis, optionally with its tableau."""
    out = {"columns": list(basis.columns), "art_sign": list(basis.art_sign), "key": basis.key()}
    if sf is not None:
        out["tableau"] = [
            {"row": t.row_index, "basic_var": t.basic_var, "beta": t.beta,
             "lambda": [[i, v] for i, v in t.sparse_lambda()], "alpha": t.alpha.tolist()}
            for t in tableau_rows(sf, basis)
        ]
    return out
