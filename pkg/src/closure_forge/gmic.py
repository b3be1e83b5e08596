"""Gomory mixed-integer cuts from single aggregated rows.

Given a row ``alpha'x = beta`` over ``x >= 0`` with integrality on ``J``, the
GMIC is the ``>= 1`` inequality

    sum_{j in J, f(a_j) <= f(b)} f(a_j)/f(b) x_j
  + sum_{j in J, f(a_j) >  f(b)} (1 - f(a_j))/(1 - f(b)) x_j
  + sum_{j not in J, a_j >= 0}  a_j/f(b) x_j
  + sum_{j not in J, a_j <  0}  -a_j/(1 - f(b)) x_j  >= 1

with ``f(u) = u - floor(u)``.  When ``beta`` is integral there is no cut.
"""
from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import NumericalError
from .model import Cut, CutOrigin, StandardFormMilp

EPS_INT = 1e-3
DROP_TOL = 1e-11
DOMINANCE_TOL = 1e-9
MAX_POOL_FOR_DOMINANCE = 10_000


def fractional_part(u: float) -> float:
    if not math.isfinite(u):
        raise NumericalError(f"fractional part of non-finite value {u}")
    return u - math.floor(u)


def fractionality(u: float) -> float:
    """Distance to the nearest integer."""
    f = fractional_part(u)
    return min(f, 1.0 - f)


def gmic_from_row(alpha, beta: float, integer_mask, origin: Optional[CutOrigin] = None,
                  eps_int: float = EPS_INT) -> Optional[Cut]:
    alpha = np.asarray(alpha, dtype=float)
    mask = np.asarray(integer_mask, dtype=bool)
    if alpha.shape != mask.shape:
        raise ValueError(f"alpha has length {alpha.size}, mask has length {mask.size}")
    if not (math.isfinite(beta) and np.all(np.isfinite(alpha))):
        raise NumericalError("non-finite tableau row")
    f0 = fractional_part(beta)
    if not eps_int <= f0 <= 1.0 - eps_int:
        return None
    coeffs = kernels.gmic_coefficients(alpha, float(beta), mask, DROP_TOL)
    return Cut.from_dense(coeffs, 1.0, "standard", origin)


def aggregate(lam, sf: StandardFormMilp):
    """``(lambda'A, lambda'b)`` for a dense or sparse multiplier."""
    lam = dense_multiplier(lam, sf.m)
    return sf.A.T @ lam, float(lam @ sf.b)


def dense_multiplier(lam, m: int) -> np.ndarray:
    if isinstance(lam, np.ndarray) and lam.ndim == 1 and lam.dtype.kind == "f":
        if lam.shape[0] != m:
            raise ValueError(f"multiplier has length {lam.shape[0]}, expected {m}")
        return lam
    lam = list(lam)
    if lam and isinstance(lam[0], (tuple, list)):
        out = np.zeros(m)
        for i, v in lam:
            if not 0 <= i < m:
                raise ValueError(f"multiplier row {i} out of range for {m} rows")
            out[i] = v
        return out
    out = np.asarray(lam, dtype=float)
    if out.shape != (m,):
        raise ValueError(f"multiplier has length {out.size}, expected {m}")
    return out


def sparse_multiplier(lam) -> tuple:
    lam = np.asarray(lam, dtype=float)
    return tuple((int(i), float(lam[i])) for i in np.flatnonzero(lam))


def gmic_from_multiplier(lam, sf: StandardFormMilp, instance: Optional[str] = None,
                         basis: Optional[str] = None, row: Optional[int] = None) -> Optional[Cut]:
    """GMIC of the aggregated row ``lambda'A x = lambda'b``; records lambda in the origin."""
    lam = dense_multiplier(lam, sf.m)
    alpha, beta = aggregate(lam, sf)
    origin = CutOrigin(instance, basis, row, sparse_multiplier(lam))
    return gmic_from_row(alpha, beta, sf.integer_mask, origin)


def violation(cut: Cut, point) -> float:
    """``rhs - lhs``; positive means the point is cut off."""
    return cut.rhs - cut.lhs(point)


def dominates(c1: Cut, c2: Cut, tol: float = DOMINANCE_TOL) -> bool:
    """``c1`` dominates ``c2`` when its coefficients are no larger everywhere.

    Both cuts must be normalized ``>= 1`` standard-form cuts over ``x >= 0``.
    """
    if c1.space != "standard" or c2.space != "standard":
        raise ValueError("dominance is defined for standard-form cuts only")
    if c1.dim != c2.dim:
        raise ValueError("cuts live in spaces of different dimension")
    if abs(c1.rhs - c2.rhs) > tol:
        raise ValueError("dominance needs both cuts normalized to the same rhs")
    return bool(np.all(c1.dense() <= c2.dense() + tol))


def filter_dominated(cuts: Sequence[Cut], tol: float = DOMINANCE_TOL) -> list:
    """Drop every cut dominated by another; of two equal cuts the first survives."""
    cuts = list(cuts)
    if len(cuts) > MAX_POOL_FOR_DOMINANCE:
        raise ValueError(f"dominance filtering is capped at {MAX_POOL_FOR_DOMINANCE} cuts")
    if not cuts:
        return []
    M = np.vstack([c.dense() for c in cuts])
    keep = np.ones(len(cuts), dtype=bool)
    for j in range(len(cuts)):
        le = np.all(M <= M[j] + tol, axis=1)   # rows dominating cut j
        le[j] = False
        for i in np.flatnonzero(le & keep):
            mutual = np.all(M[j] <= M[i] + tol)
            if not mutual or i < j:
                keep[j] = False
                break
    return [c for c, k in zip(cuts, keep) if k]


def dedupe(cuts: Iterable[Cut]) -> list:
    seen = set()
    out = []
    for c in cuts:
        key = c.key()
        if key not in seen:
            seen.add(key)
            out.append(c)
    return out
