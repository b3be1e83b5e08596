"""Ground truth for small instances.

Integer variables are enumerated over a box; for each integer point the
remaining LP over the continuous columns is solved exactly by trying every
basis of the continuous submatrix (plus a one-off recession-direction check
for objectives that may be unbounded).  This is floating-point certification
with a declared margin, not an exact proof.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import OracleRefusal
from .model import Cut, MilpInstance, StandardFormMilp, to_standard_form
from .simplex import INFEASIBLE, OPTIMAL, solve_arrays

VALIDITY_MARGIN = 1e-6
FEAS_TOL = 1e-7
DEFAULT_LIMIT = 10**6
MAX_VERTEX_BASES = 50_000

FEASIBLE = "feasible"
UNKNOWN = "unknown"


@dataclass
class ValidityReport:
    valid: bool
    witness: Optional[np.ndarray]
    points_checked: int
    method: str
    min_lhs: float = math.inf
    rhs: float = 0.0

    def to_json(self) -> dict:
        return {
            "valid": self.valid,
            "witness": None if self.witness is None else [float(v) for v in self.witness],
            "points_checked": self.points_checked,
            "method": self.method,
            "min_lhs": None if not math.isfinite(self.min_lhs) else self.min_lhs,
            "rhs": self.rhs,
        }


def implied_bounds(sf: StandardFormMilp, passes: int = 25):
    """Interval propagation of ``x >= 0`` through the rows of ``Ax = b``."""
    A = sf.dense
    m, n = A.shape
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    for _ in range(passes):
        changed = False
        for i in range(m):
            row = A[i]
            nz = np.flatnonzero(row)
            if nz.size == 0:
                continue
            with np.errstate(invalid="ignore"):
                tmin = np.where(row[nz] > 0, row[nz] * lo[nz], row[nz] * hi[nz])
                tmax = np.where(row[nz] > 0, row[nz] * hi[nz], row[nz] * lo[nz])
            rest_min = _sums_excluding(tmin)
            rest_max = _sums_excluding(tmax)
            for pos, j in enumerate(nz):
                a = row[j]
                lo_t = sf.b[i] - rest_max[pos]
                hi_t = sf.b[i] - rest_min[pos]
                new_lo, new_hi = (lo_t / a, hi_t / a) if a > 0 else (hi_t / a, lo_t / a)
                if sf.integer_mask[j]:
                    new_lo = math.ceil(new_lo - 1e-9) if math.isfinite(new_lo) else new_lo
                    new_hi = math.floor(new_hi + 1e-9) if math.isfinite(new_hi) else new_hi
                if new_lo > lo[j] + 1e-12:
                    lo[j] = new_lo
                    changed = True
                if new_hi < hi[j] - 1e-12:
                    hi[j] = new_hi
                    changed = True
                if lo[j] > hi[j] + 1e-9:
                    return lo, hi  # empty: no point satisfies the rows
        if not changed:
            break
    return lo, hi


def _sums_excluding(terms):
    """``sum(terms) - terms[k]`` for every k, exact about infinite entries."""
    fin = np.isfinite(terms)
    total = terms[fin].sum()
    out = total - np.where(fin, terms, 0.0)
    n_pos = int(np.sum(terms == np.inf))
    n_neg = int(np.sum(terms == -np.inf))
    pos_other = n_pos - (terms == np.inf)
    neg_other = n_neg - (terms == -np.inf)
    out = np.where(pos_other > 0, np.inf, out)
    out = np.where(neg_other > 0, -np.inf, out)
    out = np.where((pos_other > 0) & (neg_other > 0), np.nan, out)
    return out


def integer_box(sf: StandardFormMilp, box=None):
    J = np.flatnonzero(sf.integer_mask)
    if box is not None:
        lo = np.asarray([b[0] for b in box], dtype=np.int64)
        hi = np.asarray([b[1] for b in box], dtype=np.int64)
        if lo.shape != (J.size,):
            raise ValueError(f"box needs {J.size} (lo, hi) pairs")
        return lo, hi
    lo, hi = implied_bounds(sf)
    if np.any(lo > hi + 1e-9):
        return np.zeros(J.size, dtype=np.int64), np.full(J.size, -1, dtype=np.int64)
    lo, hi = lo[J], hi[J]
    if not np.all(np.isfinite(hi)):
        bad = J[~np.isfinite(hi)]
        raise OracleRefusal(f"integer variables {bad.tolist()} have no implied upper bound; pass a box")
    return np.maximum(lo, 0).astype(np.int64), hi.astype(np.int64)


def _box_size(lo, hi) -> int:
    size = 1
    for a, b in zip(lo.tolist(), hi.tolist()):
        size *= max(0, b - a + 1)
    return size


def enumerate_integer_points(sf: StandardFormMilp, box=None, limit: int = DEFAULT_LIMIT) -> np.ndarray:
    """All integer assignments to the integer columns inside the box."""
    lo, hi = integer_box(sf, box)
    size = _box_size(lo, hi)
    if size > limit:
        raise OracleRefusal(f"{size} integer assignments exceed the limit of {limit}")
    if size == 0:
        return np.empty((0, lo.size), dtype=np.int64)
    return kernels.integer_grid(lo, hi)


class SliceOracle:
    """Precomputed fix-and-LP data for one standard-form instance."""

    def __init__(self, sf: StandardFormMilp, box=None, limit: int = DEFAULT_LIMIT):
        self.sf = sf
        A = sf.dense
        self.J = np.flatnonzero(sf.integer_mask)
        self.C = np.flatnonzero(~sf.integer_mask)
        self.AJ = np.ascontiguousarray(A[:, self.J])
        self.AC = np.ascontiguousarray(A[:, self.C])
        self.points = enumerate_integer_points(sf, box, limit)
        self.method = "fix-and-lp" if self.C.size else "enumeration"
        self._build_vertices()
        self._feasible = None

    def _build_vertices(self):
        m = self.sf.m
        AC = self.AC
        if self.C.size == 0:
            self.null_proj = np.eye(m)
            self.vert_proj = np.zeros((1, 0, m))
            self.vert_cols = np.zeros((1, 0), dtype=np.int64)
            return
        rank = int(np.linalg.matrix_rank(AC)) if AC.size else 0
        self.null_proj = np.eye(m) - AC @ np.linalg.pinv(AC)
        projs, cols = [], []
        if rank == 0:
            projs.append(np.zeros((0, m)))
            cols.append(())
        else:
            n_subsets = math.comb(self.C.size, rank)
            if n_subsets > MAX_VERTEX_BASES:
                raise OracleRefusal(f"{n_subsets} continuous bases exceed the oracle cap")
            for S in itertools.combinations(range(self.C.size), rank):
                AS = AC[:, S]
                if np.linalg.matrix_rank(AS) < rank:
                    continue
                projs.append(np.linalg.pinv(AS))
                cols.append(S)
        self.vert_proj = np.ascontiguousarray(np.stack(projs))
        self.vert_cols = np.asarray(cols, dtype=np.int64).reshape(len(cols), rank)

    def _run(self, points, costs):
        costs = np.atleast_2d(np.asarray(costs, dtype=float))
        return kernels.slice_min(points, self.AJ, self.sf.b, self.null_proj, self.vert_proj,
                                 self.vert_cols, np.ascontiguousarray(costs[:, self.J]),
                                 np.ascontiguousarray(costs[:, self.C]), FEAS_TOL)

    @property
    def feasible_points(self) -> np.ndarray:
        if self._feasible is None:
            feas, _, _ = self._run(self.points, np.zeros((0, self.sf.n)))
            self._feasible = self.points[feas]
        return self._feasible

    def full_point(self, xJ, vertex, costs_row=None):
        """Rebuild the standard-form point for integer part ``xJ`` at a slice vertex."""
        x = np.zeros(self.sf.n)
        x[self.J] = xJ
        if self.C.size and vertex >= 0:
            r = self.sf.b - self.AJ @ np.asarray(xJ, dtype=float)
            y = self.vert_proj[vertex] @ r
            x[self.C[self.vert_cols[vertex]]] = np.maximum(y, 0.0)
        return x

    def recession_direction(self, cost):
        """A direction ``d >= 0`` with ``A_C d = 0`` and ``cost_C'd < 0``, if any."""
        cC = np.asarray(cost, dtype=float)[self.C]
        if self.C.size == 0 or np.all(cC >= 0):
            return None
        m, k = self.AC.shape
        A = np.zeros((m + 1, k + 1))
        A[:m, :k] = self.AC
        A[m, :] = 1.0
        b = np.zeros(m + 1)
        b[m] = 1.0
        res = solve_arrays(A, b, np.concatenate([cC, [0.0]]))
        if res.status != OPTIMAL or res.obj >= -1e-9:
            return None
        d = np.zeros(self.sf.n)
        d[self.C] = res.x[:k]
        return d

    def minimize(self, costs):
        """Per cost row: (min value, argmin standard point) over the integer hull."""
        costs = np.atleast_2d(np.asarray(costs, dtype=float))
        pts = self.feasible_points
        out = []
        if pts.shape[0] == 0:
            return [(math.inf, None) for _ in costs]
        _, best, arg = self._run(pts, costs)
        for c in range(costs.shape[0]):
            d = self.recession_direction(costs[c])
            k = int(np.argmin(best[c]))
            x = self.full_point(pts[k], int(arg[c, k]))
            if d is not None:
                out.append((-math.inf, x + d * _ray_length(costs[c], d)))
            else:
                out.append((float(best[c, k]), x))
        return out


def _ray_length(cost, d):
    return 1e6 / max(1e-12, -float(np.asarray(cost) @ d))


def verify_cuts(sf: StandardFormMilp, cuts: Sequence[Cut], box=None, limit: int = DEFAULT_LIMIT,
                margin: float = VALIDITY_MARGIN, oracle: Optional[SliceOracle] = None) -> list:
    """Validity reports for standard-space cuts, sharing one enumeration."""
    if oracle is None:
        oracle = SliceOracle(sf, box, limit)
    cuts = list(cuts)
    for cut in cuts:
        if cut.space != "standard" or cut.dim != sf.n:
            raise ValueError("verify_cuts expects standard-space cuts matching the instance")
    n_pts = int(oracle.points.shape[0])
    if not cuts:
        return []
    costs = np.vstack([c.dense() for c in cuts])
    pts = oracle.feasible_points
    reports = []
    if pts.shape[0]:
        _, best, arg = oracle._run(pts, costs)
    for c, cut in enumerate(cuts):
        if pts.shape[0] == 0:
            reports.append(ValidityReport(True, None, n_pts, oracle.method, math.inf, cut.rhs))
            continue
        d = oracle.recession_direction(costs[c])
        bad = np.flatnonzero(best[c] < cut.rhs - margin)
        min_lhs = float(best[c].min())
        if d is not None:
            k = int(bad[0]) if bad.size else 0
            x = oracle.full_point(pts[k], int(arg[c, k]))
            need = (cut.lhs(x) - cut.rhs + 1.0) / max(1e-12, -float(costs[c] @ d))
            witness = x + d * max(need, 1.0)
            reports.append(ValidityReport(False, witness, n_pts, oracle.method, -math.inf, cut.rhs))
        elif bad.size:
            k = int(bad[0])
            witness = oracle.full_point(pts[k], int(arg[c, k]))
            reports.append(ValidityReport(False, witness, n_pts, oracle.method, min_lhs, cut.rhs))
        else:
            reports.append(ValidityReport(True, None, n_pts, oracle.method, min_lhs, cut.rhs))
    return reports


def verify_cut_valid(sf: StandardFormMilp, cut: Cut, box=None, limit: int = DEFAULT_LIMIT,
                     margin: float = VALIDITY_MARGIN) -> ValidityReport:
    return verify_cuts(sf, [cut], box, limit, margin)[0]


def integer_optimum(sf: StandardFormMilp, box=None, limit: int = DEFAULT_LIMIT,
                    oracle: Optional[SliceOracle] = None) -> float:
    """``min c'x`` over the integer hull; +inf when no integer point is feasible."""
    if oracle is None:
        oracle = SliceOracle(sf, box, limit)
    value, _ = oracle.minimize(sf.c)[0]
    return value


def gap_closed(z_lp: float, z_cut: float, z_ip: float, tol: float = 1e-9) -> float:
    """Fraction of the LP-to-IP gap closed by cuts, for minimization."""
    gap = z_ip - z_lp
    if gap <= 1e-12:
        return 0.0
    if z_cut < z_lp - tol * (1 + abs(z_lp)) or z_cut > z_ip + tol * (1 + abs(z_ip)):
        raise ValueError(f"bounds out of order: lp={z_lp}, cut={z_cut}, ip={z_ip}")
    return float(min(1.0, max(0.0, (z_cut - z_lp) / gap)))


@dataclass
class FeasibilityResult:
    status: str
    point: Optional[np.ndarray] = None
    nodes: int = 0


def feasibility_check(inst: MilpInstance, node_limit: int = 10**5) -> FeasibilityResult:
    """Depth-first branch-and-bound on integer variables with LP pruning."""
    ints = [j for j, v in enumerate(inst.vars) if v.is_integer]
    stack = [inst]
    nodes = 0
    while stack:
        if nodes >= node_limit:
            return FeasibilityResult(UNKNOWN, None, nodes)
        node = stack.pop()
        nodes += 1
        try:
            sf, vmap = to_standard_form(node)
        except Exception:
            continue  # empty integer range after branching
        res = solve_arrays(sf.dense, sf.b, np.zeros(sf.n))
        if res.status == INFEASIBLE:
            continue
        if res.status != OPTIMAL:
            return FeasibilityResult(UNKNOWN, None, nodes)
        x = vmap.to_original_point(res.x)
        frac = [j for j in ints if abs(x[j] - round(x[j])) > 1e-6]
        if not frac:
            x = x.copy()
            x[ints] = np.round(x[ints])
            return FeasibilityResult(FEASIBLE, x, nodes)
        j = frac[0]
        v = node.vars[j]
        down = _with_bounds(node, j, v.lower, math.floor(x[j]))
        up = _with_bounds(node, j, math.ceil(x[j]), v.upper)
        stack.extend(b for b in (up, down) if b is not None)
    return FeasibilityResult(INFEASIBLE, None, nodes)


def _with_bounds(inst, j, lo, up):
    if lo > up:
        return None
    vs = list(inst.vars)
    vs[j] = replace(vs[j], lower=float(lo), upper=float(up))
    return replace(inst, vars=tuple(vs))
