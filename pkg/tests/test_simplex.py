import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from closure_forge.model import StandardFormMilp
from closure_forge.simplex import (
    INFEASIBLE, OPTIMAL, UNBOUNDED, basis_to_json, resolve_with_objective, solve, solve_arrays,
    tableau_row, tableau_rows,
)

from instances import knapsack_sf


def sf_of(A, b, c):
    A = np.asarray(A, dtype=float)
    return StandardFormMilp(sp.csr_matrix(A), b, c, np.zeros(A.shape[1], dtype=bool))


def test_knapsack_lp():
    sf = knapsack_sf()
    res = solve(sf)
    assert res.status == OPTIMAL
    assert res.obj == pytest.approx(-1.5)
    basic = res.basis.columns[0]
    assert basic in (0, 1)
    assert res.x[basic] == pytest.approx(1.5)


def test_origin_optimal_for_zero_rhs():
    res = solve_arrays([[1.0, -1.0, 2.0]], [0.0], [1.0, 2.0, 0.5])
    assert res.status == OPTIMAL
    assert res.obj == 0.0
    np.testing.assert_allclose(res.x, 0.0)


def test_zero_row_with_nonzero_rhs_is_infeasible():
    res = solve_arrays([[0.0, 0.0]], [1.0], [1.0, 1.0])
    assert res.status == INFEASIBLE


def test_unbounded():
    res = solve_arrays([[1.0, -1.0]], [1.0], [0.0, -1.0])
    assert res.status == UNBOUNDED


def test_redundant_rows():
    A = [[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]]
    res = solve_arrays(A, [2.0, 4.0], [1.0, 2.0, 3.0])
    assert res.status == OPTIMAL
    assert res.obj == pytest.approx(2.0)


def test_slack_basis_tableau_row_is_the_row():
    A = np.array([[1.0, 2.0, 1.0, 0.0], [3.0, -1.0, 0.0, 1.0]])
    sf = sf_of(A, [4.0, 5.0], [0.0, 0.0, 0.0, 0.0])
    res = solve(sf)  # zero objective: the crash basis of unit columns is already optimal
    assert sorted(res.basis.columns) == [2, 3]
    for t in tableau_rows(sf, res.basis):
        i = t.row_index
        np.testing.assert_allclose(t.lam, np.eye(2)[i])
        np.testing.assert_allclose(t.alpha, A[i])
        assert t.beta == pytest.approx(sf.b[i])


def test_knapsack_tableau_row():
    sf = knapsack_sf()
    res = solve(sf)
    t = tableau_row(sf, res.basis, 0)
    # B = (2), B^-1 = 0.5
    np.testing.assert_allclose(t.lam, [0.5])
    np.testing.assert_allclose(t.alpha, [1.0, 1.0, 0.5])
    assert t.beta == pytest.approx(1.5)
    assert t.sparse_lambda() == ((0, 0.5),)


def test_resolve_unchanged_objective():
    sf = knapsack_sf()
    res = solve(sf)
    again = resolve_with_objective(sf, res.basis, sf.c)
    assert again.obj == pytest.approx(res.obj, abs=1e-9)
    assert again.iterations == 0


def test_resolve_moves_to_slack():
    sf = knapsack_sf()
    res = solve(sf)
    # rewarding the slack: s = 3 is worth -6, x1 = 1.5 only -1.5
    moved = resolve_with_objective(sf, res.basis, [-1.0, -1.0, -2.0])
    assert moved.status == OPTIMAL
    assert moved.basis.columns == (2,)
    assert moved.obj == pytest.approx(-6.0)
    # a penalized slack keeps the structural column basic
    kept = resolve_with_objective(sf, res.basis, [-1.0, -1.0, 2.0])
    assert kept.basis.columns[0] in (0, 1)


def test_basis_json_dump():
    sf = knapsack_sf()
    d = basis_to_json(solve(sf).basis, sf)
    assert d["tableau"][0]["beta"] == pytest.approx(1.5)


def random_lp(rng):
    m = int(rng.integers(1, 6))
    n = int(rng.integers(m, m + 6))
    A = rng.integers(-4, 5, size=(m, n)).astype(float)
    x0 = rng.uniform(0, 3, size=n) * (rng.random(n) < 0.7)
    b = A @ x0
    if rng.random() < 0.2:
        b = b + rng.normal(size=m)  # sometimes infeasible
    c = rng.integers(-3, 4, size=n).astype(float)
    if rng.random() < 0.7:
        A = np.vstack([A, np.ones(n)])  # bounded
        b = np.append(b, x0.sum() + 1)
        A = np.hstack([A, np.eye(m + 1)[:, -1:]])
        c = np.append(c, 0.0)
    return A, b, c


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_agrees_with_highs(seed):
    A, b, c = random_lp(np.random.default_rng(seed))
    ref = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    res = solve_arrays(A, b, c)
    status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}[ref.status]
    assert res.status == status
    if status == OPTIMAL:
        assert res.obj == pytest.approx(ref.fun, abs=1e-7 * (1 + abs(ref.fun)))
        np.testing.assert_allclose(A @ res.x, b, atol=1e-7 * (1 + np.abs(b).max()))
        assert np.all(res.x >= -1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_duality_and_tableau_consistency(seed):
    A, b, c = random_lp(np.random.default_rng(seed))
    sf = sf_of(A, b, c)
    res = solve(sf)
    if res.status != OPTIMAL:
        return
    assert abs(c @ res.x - b @ res.duals) <= 1e-6 * (1 + abs(c @ res.x))
    rows = tableau_rows(sf, res.basis)
    for t in rows:
        if t.basic_var < sf.n:
            assert t.beta == pytest.approx(res.x[t.basic_var], abs=1e-7)
            # basic columns form the identity pattern
            basic = [j for j in res.basis.columns if j < sf.n]
            expected = [1.0 if j == t.basic_var else 0.0 for j in basic]
            np.testing.assert_allclose(t.alpha[basic], expected, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_deterministic_basis(seed):
    A, b, c = random_lp(np.random.default_rng(seed))
    r1, r2 = solve_arrays(A, b, c), solve_arrays(A, b, c)
    assert r1.status == r2.status
    if r1.status == OPTIMAL:
        assert r1.basis.columns == r2.basis.columns
        np.testing.assert_array_equal(r1.x, r2.x)


def test_degenerate_cycling_example():
    # Beale's example in standard form; Dantzig pricing cycles without protection
    A = np.array([
        [0.25, -60.0, -1 / 25, 9.0, 1, 0, 0],
        [0.5, -90.0, -1 / 50, 3.0, 0, 1, 0],
        [0.0, 0.0, 1.0, 0.0, 0, 0, 1],
    ])
    c = np.array([-0.75, 150.0, -1 / 50, 6.0, 0, 0, 0])
    res = solve_arrays(A, [0.0, 0.0, 1.0], c)
    assert res.status == OPTIMAL
    assert res.obj == pytest.approx(-0.05)
