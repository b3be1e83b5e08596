import gzip
import math

import pytest

from closure_forge.errors import MpsParseError
from closure_forge.model import instance_signature, load_instance, make_instance
from closure_forge.mps import parse_mps, read_mps

MINIMAL = """\
NAME          TINY
ROWS
 N  obj
 L  c1
COLUMNS
    x         obj       1.0        c1        1.0
    y         obj       2.0        c1        3.0
RHS
    rhs       c1        4.0
ENDATA
"""

MARKED = """\
NAME          MARKED
ROWS
 N  cost
 G  lim
 E  bal
COLUMNS
    a         cost      1          lim       1
    MARKER                 'MARKER'                 'INTORG'
    b         cost      2          lim       1
    b         bal       1
    MARKER                 'MARKER'                 'INTEND'
    c         bal       -1         cost      0.5
RHS
    RHS       lim       2          bal       0
BOUNDS
 UP BND       b         7
ENDATA
"""


def independent_integer_columns(text):
    """Second reader: integer columns are those first seen between INTORG and INTEND."""
    in_cols = False
    flag = False
    seen = {}
    for line in text.splitlines():
        if line and not line[0].isspace():
            in_cols = line.split()[0] == "COLUMNS"
            continue
        parts = line.split()
        if not in_cols or not parts:
            continue
        if "'MARKER'" in parts:
            flag = "'INTORG'" in parts
            continue
        seen.setdefault(parts[0], flag)
    return seen


def test_minimal_document():
    inst = parse_mps(MINIMAL)
    assert inst.name == "TINY"
    assert inst.n_vars == 2 and inst.n_constraints == 1
    con = inst.constraints[0]
    assert con.sense == "<=" and con.rhs == 4.0 and con.coeffs == {0: 1.0, 1: 3.0}
    assert [v.obj for v in inst.vars] == [1.0, 2.0]
    assert not any(v.is_integer for v in inst.vars)
    assert all(v.lower == 0 and v.upper == math.inf for v in inst.vars)


def test_marker_matches_second_reader():
    inst = parse_mps(MARKED)
    expected = independent_integer_columns(MARKED)
    assert {v.name: v.is_integer for v in inst.vars} == expected
    assert expected == {"a": False, "b": True, "c": False}
    assert inst.vars[1].upper == 7
    assert [c.sense for c in inst.constraints] == [">=", "="]


def test_missing_columns_section():
    text = "NAME X\nROWS\n N obj\n L c1\nRHS\n    rhs c1 1\nENDATA\n"
    with pytest.raises(MpsParseError, match="COLUMNS"):
        parse_mps(text)


def test_error_carries_line_number():
    text = MINIMAL.replace("    y         obj       2.0", "    y         obj       two")
    with pytest.raises(MpsParseError) as err:
        parse_mps(text)
    assert err.value.lineno == 7
    assert str(err.value).startswith("line 7:")


def test_unknown_row_reference():
    with pytest.raises(MpsParseError, match="unknown row"):
        parse_mps(MINIMAL.replace("c1        3.0", "zz        3.0"))


@pytest.mark.parametrize("kind,val,lower,upper,integer", [
    ("UP", "5", 0.0, 5.0, False),
    ("UP", "-2", -math.inf, -2.0, False),
    ("LO", "-3", -3.0, math.inf, False),
    ("FX", "2.5", 2.5, 2.5, False),
    ("FR", "", -math.inf, math.inf, False),
    ("MI", "", -math.inf, math.inf, False),
    ("BV", "", 0.0, 1.0, True),
    ("UI", "4", 0.0, 4.0, True),
    ("LI", "1", 1.0, math.inf, True),
])
def test_bound_types(kind, val, lower, upper, integer):
    text = MINIMAL.replace("ENDATA", f"BOUNDS\n {kind} BND       x         {val}\nENDATA")
    v = parse_mps(text).vars[0]
    assert (v.lower, v.upper, v.is_integer) == (lower, upper, integer)


def test_duplicate_and_unsupported_bounds():
    dup = MINIMAL.replace("ENDATA", "BOUNDS\n UP BND x 5\n UP BND x 6\nENDATA")
    with pytest.raises(MpsParseError, match="duplicate"):
        parse_mps(dup)
    with pytest.raises(MpsParseError, match="unsupported"):
        parse_mps(MINIMAL.replace("ENDATA", "BOUNDS\n SC BND x 5\nENDATA"))


def test_ranges_split_into_two_rows():
    text = MINIMAL.replace("ENDATA", "RANGES\n    rng       c1        1.5\nENDATA")
    inst = parse_mps(text)
    senses = [(c.name, c.sense, c.rhs) for c in inst.constraints]
    assert senses == [("c1", ">=", 2.5), ("c1_rng", "<=", 4.0)]


def test_objsense_max():
    inst = parse_mps("NAME X\nOBJSENSE\n    MAX\n" + MINIMAL.split("\n", 1)[1])
    assert inst.objective_sense == "max"


def test_read_plain_and_gzip(tmp_path):
    p = tmp_path / "tiny.mps"
    p.write_text(MINIMAL)
    g = tmp_path / "tiny.mps.gz"
    with gzip.open(g, "wt") as fh:
        fh.write(MINIMAL)
    a, b = read_mps(p), load_instance(g)
    assert a == b
    assert load_instance(p) == a


def test_same_matrix_as_dense_builder():
    inst = parse_mps(MINIMAL)
    ref = make_instance([[1, 3]], "<=", [4], [1, 2], var_names=["x", "y"])
    assert instance_signature(inst) == instance_signature(ref)
