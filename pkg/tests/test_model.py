import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from closure_forge.errors import ConversionError, MappingError
from closure_forge.model import (
    Constraint, Cut, CutOrigin, MilpInstance, Variable, instance_from_json, instance_signature,
    instance_to_json, load_instance, make_instance, map_cut_to_original, map_cut_to_standard,
    save_instance, to_standard_form,
)
from closure_forge.oracle import SliceOracle
from closure_forge.simplex import OPTIMAL, solve

from instances import knapsack


def test_knapsack_standard_form():
    sf, vmap = to_standard_form(knapsack())
    np.testing.assert_array_equal(sf.dense, [[2, 2, 1]])
    np.testing.assert_array_equal(sf.b, [3])
    np.testing.assert_array_equal(sf.c, [-1, -1, 0])
    np.testing.assert_array_equal(sf.integer_mask, [True, True, False])
    assert [p.kind for p in vmap.provenance] == ["original", "original", "slack"]
    assert vmap.obj_sign == -1.0


def test_shifted_bounded_variable():
    inst = make_instance([[1.0]], "<=", [4], [1], lower=[2], upper=[5], integer=[True])
    sf, vmap = to_standard_form(inst)
    # row 0: y + s = 4 - 2, row 1: y + t = 5 - 2
    np.testing.assert_array_equal(sf.dense, [[1, 1, 0], [1, 0, 1]])
    np.testing.assert_array_equal(sf.b, [2, 3])
    assert vmap.originals[0].shift == 2.0
    assert vmap.provenance[2].kind == "bound_slack"
    np.testing.assert_allclose(vmap.to_original_point([1, 1, 2]), [3])


def test_already_standard_is_fixed_point():
    A = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 3.0]])
    inst = make_instance(A, "=", [4, 5], [1, 2, 3], integer=[True, False, True])
    sf, vmap = to_standard_form(inst)
    np.testing.assert_array_equal(sf.dense, A)
    np.testing.assert_array_equal(sf.b, [4, 5])
    np.testing.assert_array_equal(sf.c, [1, 2, 3])
    assert [ov.column for ov in vmap.originals] == [0, 1, 2]
    assert all(ov.shift == 0 and not ov.negated for ov in vmap.originals)


def test_upper_only_and_free_variables():
    inst = make_instance([[1.0, 1.0, 1.0]], ">=", [-4], [1, -1, 2],
                         lower=[-math.inf, -math.inf, 0], upper=[3, math.inf, math.inf])
    sf, vmap = to_standard_form(inst)
    assert vmap.originals[0].negated
    assert vmap.originals[1].split_pair == (1, 2)
    assert sf.n == 5  # negated, split pair, x3, surplus
    x = np.array([-1.0, -2.5, 0.5])
    y = vmap.to_standard_point(x)
    np.testing.assert_allclose(sf.dense @ y, sf.b)
    np.testing.assert_allclose(vmap.to_original_point(y), x)
    np.testing.assert_allclose(vmap.original_objective(sf.c @ y), inst.objective @ x)


def test_too_many_free_variables():
    inst = make_instance([[1.0, 1.0]], "=", [0], [0, 0], lower=[-math.inf] * 2)
    with pytest.raises(ConversionError):
        to_standard_form(inst, max_free_splits=1)


def test_empty_integer_range():
    inst = make_instance([[1.0]], "<=", [1], [1], lower=[0.2], upper=[0.8], integer=[True])
    with pytest.raises(ConversionError):
        to_standard_form(inst)


def test_invalid_instances_rejected():
    with pytest.raises(ValueError):
        MilpInstance("x", (Variable("a", 1, 0),), ())
    with pytest.raises(ValueError):
        MilpInstance("x", (Variable("a"),), (Constraint("c", {0: 1.0}, "<", 1.0),))
    with pytest.raises(ValueError):
        MilpInstance("x", (Variable("a"),), (Constraint("c", {3: 1.0}, "<=", 1.0),))


# ---- cut mapping


def test_slack_cut_maps_to_knapsack_inequality():
    sf, vmap = to_standard_form(knapsack())
    cut = Cut([2], [1.0], 1.0, 3)
    orig = map_cut_to_original(cut, vmap, sf)
    # s = 3 - 2x1 - 2x2 >= 1  <=>  -2x1 - 2x2 >= -2  <=>  2x1 + 2x2 <= 2
    np.testing.assert_allclose(orig.dense(), [-2, -2])
    assert orig.rhs == pytest.approx(-2)
    assert orig.space == "original"


def test_unshifted_cut_is_unchanged():
    sf, vmap = to_standard_form(knapsack())
    cut = Cut([0, 1], [0.5, 2.0], 1.0, 3)
    orig = map_cut_to_original(cut, vmap, sf)
    np.testing.assert_allclose(orig.dense(), [0.5, 2.0])
    assert orig.rhs == 1.0


def test_shift_is_undone():
    inst = make_instance([[1.0]], "<=", [10], [1], lower=[2], integer=[True])
    sf, vmap = to_standard_form(inst)
    orig = map_cut_to_original(Cut([0], [1.0], 1.0, sf.n), vmap, sf)
    np.testing.assert_allclose(orig.dense(), [1.0])
    assert orig.rhs == 3.0


def test_split_free_cut_is_unmappable():
    inst = make_instance([[1.0, 1.0]], "<=", [3], [1, 1], lower=[-math.inf, 0])
    sf, vmap = to_standard_form(inst)
    with pytest.raises(MappingError):
        map_cut_to_original(Cut([0], [1.0], 1.0, sf.n), vmap, sf)


def test_map_to_standard_inverts_map_to_original():
    sf, vmap = to_standard_form(knapsack())
    cut = Cut([2], [1.0], 1.0, 3)
    back = map_cut_to_standard(map_cut_to_original(cut, vmap, sf), vmap, sf)
    # the image is a different but equivalent inequality over the columns
    for y in ([0, 0, 3], [1, 0, 1], [0.5, 0.5, 1]):
        assert back.lhs(y) - back.rhs == pytest.approx(cut.lhs(y) - cut.rhs)


def mixed_instance(rng):
    n = 3
    A = rng.integers(-3, 4, size=(2, n)).astype(float)
    A[A == 0] = 1.0
    senses = [["<=", ">=", "="][k] for k in rng.integers(0, 3, size=2)]
    lower = rng.integers(-2, 2, size=n).astype(float)
    upper = lower + rng.integers(1, 4, size=n)
    x0 = lower + rng.integers(0, 2, size=n)
    rhs = A @ x0 + np.where(np.array(senses) == "<=", 1, np.where(np.array(senses) == ">=", -1, 0))
    return make_instance(A, senses, rhs, rng.integers(-3, 4, size=n), integer=[True, True, False],
                         lower=lower, upper=upper, sense=["min", "max"][int(rng.integers(2))])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_roundtrip_of_optimal_point(seed):
    inst = mixed_instance(np.random.default_rng(seed))
    sf, vmap = to_standard_form(inst)
    res = solve(sf)
    assert res.status == OPTIMAL
    x = vmap.to_original_point(res.x)
    relaxed = MilpInstance(inst.name, [Variable(v.name, v.lower, v.upper, False, v.obj) for v in inst.vars],
                           inst.constraints, inst.objective_sense)
    assert relaxed.is_feasible_point(x, tol=1e-7)
    val = inst.objective_value(x)
    assert vmap.original_objective(res.obj) == pytest.approx(val, abs=1e-9 * (1 + abs(val)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_mapped_cut_agrees_on_integer_points(seed):
    """Standard cut holds at y iff the mapped cut holds at the original x."""
    rng = np.random.default_rng(seed)
    inst = mixed_instance(rng)
    sf, vmap = to_standard_form(inst)
    cut = Cut.from_dense(rng.uniform(0, 2, size=sf.n) * (rng.random(sf.n) < 0.6), 1.0)
    orig = map_cut_to_original(cut, vmap, sf)
    oracle = SliceOracle(sf)
    pts = oracle.feasible_points
    _, _, arg = oracle._run(pts, np.zeros((1, sf.n)))
    for k in range(pts.shape[0]):
        y = oracle.full_point(pts[k], int(arg[0, k]))
        np.testing.assert_allclose(sf.dense @ y, sf.b, atol=1e-9)
        x = vmap.to_original_point(y)
        assert inst.is_feasible_point(x)
        assert cut.lhs(y) - cut.rhs == pytest.approx(orig.lhs(x) - orig.rhs, abs=1e-9)


# ---- signature


def test_signature_ignores_rhs_and_objective():
    inst = knapsack()
    assert instance_signature(inst) == instance_signature(inst)
    assert instance_signature(inst) == instance_signature(inst.with_rhs([3.3]).with_objective([2, 0.5]))


def test_signature_sees_matrix_change():
    a = make_instance([[2, 2]], "<=", [3], [1, 1], integer=[1, 1])
    b = make_instance([[2, 3]], "<=", [3], [1, 1], integer=[1, 1])
    assert instance_signature(a) != instance_signature(b)


@given(st.lists(st.integers(-5, 5).filter(bool), min_size=2, max_size=2),
       st.floats(-10, 10), st.floats(-10, 10))
def test_signature_property(coeffs, r, c):
    a = make_instance([coeffs], "<=", [1], [1, 1], integer=[1, 0])
    assert instance_signature(a) == instance_signature(a.with_rhs([r]).with_objective([c, -c]))
    changed = make_instance([[coeffs[0], coeffs[1] + 1 if coeffs[1] != -1 else 2]], "<=", [1], [1, 1],
                            integer=[1, 0])
    assert instance_signature(a) != instance_signature(changed)


# ---- serialization


def test_instance_json_roundtrip(tmp_path):
    inst = make_instance([[1, -2.5], [0, 1]], ["<=", ">="], [3, -1], [1, 0.5], integer=[True, False],
                         lower=[-math.inf, 0], upper=[4, math.inf], sense="max", name="rt")
    assert instance_from_json(instance_to_json(inst)) == inst
    save_instance(inst, tmp_path / "a.json")
    assert load_instance(tmp_path / "a.json") == inst
    assert (tmp_path / "a.json").read_text() == (save_instance(inst, tmp_path / "b.json") or
                                                 (tmp_path / "b.json").read_text())


def test_cut_json_roundtrip():
    cut = Cut([3, 1], [2.0, 0.5], 1.0, 5, origin=CutOrigin("i", "abc", 2, ((0, 0.5), (2, -1.0))))
    back = Cut.from_json(cut.to_json())
    assert back.key() == cut.key()
    assert back.origin == cut.origin
    np.testing.assert_array_equal(back.index, [1, 3])


def test_cut_arrays_are_read_only():
    cut = Cut([0], [1.0], 1.0, 2)
    with pytest.raises(ValueError):
        cut.value[0] = 3.0
