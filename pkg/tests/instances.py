"""Small instance generators shared by the test modules."""
import itertools

import numpy as np
import scipy.sparse as sp

from closure_forge.model import StandardFormMilp, make_instance


def knapsack():
    """max x1 + x2  s.t.  2x1 + 2x2 <= 3,  x in Z+^2."""
    return make_instance([[2, 2]], "<=", [3], [1, 1], integer=[True, True], sense="max", name="knapsack")


def knapsack_sf():
    A = sp.csr_matrix(np.array([[2.0, 2.0, 1.0]]))
    return StandardFormMilp(A, np.array([3.0]), np.array([-1.0, -1.0, 0.0]),
                            np.array([True, True, False]), "knapsack")


def small_row_sf():
    """x1 + 0.5 x2 + y = 2.5 with x1, x2 integer and y continuous."""
    A = sp.csr_matrix(np.array([[1.0, 0.5, 1.0]]))
    return StandardFormMilp(A, np.array([2.5]), np.zeros(3), np.array([True, True, False]), "row")


def random_standard(rng, n_int=None, n_cont=None, m=None, bmax=5, pure_integer=False,
                    fractional=False):
    """Bounded, integer-feasible standard-form instance with integer data in [-5, 5].

    Row 0 has strictly positive coefficients so every variable is bounded;
    the rhs comes from a planted nonnegative integer point.  Draws repeat
    until every |b_i| <= bmax and, with ``fractional``, until the LP optimum
    has a fractional integer variable (so cuts exist).
    """
    dims = (n_int, n_cont, m)
    for _ in range(100_000):
        ni = int(rng.integers(1, 7)) if dims[0] is None else dims[0]
        nc = (0 if pure_integer else int(rng.integers(0, 4))) if dims[1] is None else dims[1]
        mm = int(rng.integers(1, 5)) if dims[2] is None else dims[2]
        n = ni + nc
        A = rng.integers(-5, 6, size=(mm, n)).astype(float)
        A[0] = rng.integers(1, 6, size=n)
        x0 = rng.integers(0, 3, size=n).astype(float)
        b = A @ x0
        if not (np.all(np.abs(b) <= bmax) and b[0] > 0):
            continue
        c = rng.integers(-5, 6, size=n).astype(float)
        mask = np.array([True] * ni + [False] * nc)
        sf = StandardFormMilp(sp.csr_matrix(A), b, c, mask, "rand")
        if not fractional or _lp_fractional(sf):
            return sf
    raise RuntimeError("no instance found; loosen the requested dimensions")


def _lp_fractional(sf):
    from closure_forge.simplex import solve

    res = solve(sf)
    if res.status != "optimal":
        return False
    xi = res.x[sf.integer_mask]
    return bool(np.any(np.abs(xi - np.round(xi)) > 1e-3))


def as_instance(sf, name="rand"):
    """The standard-form data as an equality MilpInstance over x >= 0."""
    return make_instance(sf.dense, "=", sf.b, sf.c, integer=sf.integer_mask, name=name)


def brute_force_points(sf, box_hi):
    """All integer points of a pure-integer standard form within [0, box_hi]."""
    A = sf.dense
    ranges = [range(int(h) + 1) for h in box_hi]
    pts = [p for p in itertools.product(*ranges) if np.allclose(A @ np.array(p, float), sf.b, atol=1e-9)]
    return np.array(pts, dtype=float).reshape(-1, sf.n)
