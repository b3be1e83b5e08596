"""Reader for fixed- and free-format MPS files.

Fields are split on whitespace, which covers free MPS and every fixed-format
file whose names contain no blanks.
"""
from __future__ import annotations

import gzip
import math
from pathlib import Path

from .errors import MpsParseError
from .model import INF, Constraint, MilpInstance, Variable

_SECTIONS = {"NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA", "OBJSENSE", "OBJSENCE"}
_SENSE = {"L": "<=", "G": ">=", "E": "="}


def read_mps(path) -> MilpInstance:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rt") as fh:
            text = fh.read()
    else:
        text = path.read_text()
    return parse_mps(text, default_name=path.name.split(".")[0])


def parse_mps(text: str, default_name: str = "mps") -> MilpInstance:
    name = default_name
    section = None
    sense = "min"
    obj_row = None
    row_order: list[str] = []
    row_type: dict[str, str] = {}
    col_index: dict[str, int] = {}
    col_names: list[str] = []
    col_int: list[bool] = []
    col_obj: list[float] = []
    coeffs: dict[str, dict[int, float]] = {}
    rhs: dict[str, float] = {}
    ranges: list[tuple[str, float, int]] = []
    lower: dict[int, float] = {}
    upper: dict[int, float] = {}
    bound_seen: set = set()
    in_int = False
    seen_sections = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        tok = raw.split()
        head = tok[0].upper()
        if not raw[0].isspace() and head in _SECTIONS or (head in _SECTIONS and section is None):
            section = head
            seen_sections.add(head)
            if head == "NAME":
                if len(tok) > 1:
                    name = tok[1]
            elif head in ("OBJSENSE", "OBJSENCE") and len(tok) > 1:
                sense = _objsense(tok[1], lineno)
            elif head == "ENDATA":
                break
            continue
        if section is None:
            raise MpsParseError(f"data line outside any section: {raw.strip()!r}", lineno)
        if not raw[0].isspace() and section != "OBJSENSE":
            raise MpsParseError(f"unknown section {tok[0]!r}", lineno)

        if section in ("OBJSENSE", "OBJSENCE"):
            sense = _objsense(tok[0], lineno)
        elif section == "ROWS":
            if len(tok) != 2:
                raise MpsParseError("ROWS entries need a type and a name", lineno)
            kind, rname = tok[0].upper(), tok[1]
            if rname in row_type:
                raise MpsParseError(f"duplicate row {rname!r}", lineno)
            if kind == "N":
                row_type[rname] = "N"
                if obj_row is None:
                    obj_row = rname
            elif kind in _SENSE:
                row_type[rname] = kind
                row_order.append(rname)
                coeffs[rname] = {}
                rhs[rname] = 0.0
            else:
                raise MpsParseError(f"unknown row type {tok[0]!r}", lineno)
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1].strip("'\"").upper() == "MARKER":
                marker = tok[2].strip("'\"").upper()
                if marker == "INTORG":
                    in_int = True
                elif marker == "INTEND":
                    in_int = False
                else:
                    raise MpsParseError(f"unknown marker {tok[2]!r}", lineno)
                continue
            if len(tok) not in (3, 5):
                raise MpsParseError("COLUMNS entries need a column and 1 or 2 (row, value) pairs", lineno)
            cname = tok[0]
            if cname not in col_index:
                col_index[cname] = len(col_names)
                col_names.append(cname)
                col_int.append(in_int)
                col_obj.append(0.0)
            j = col_index[cname]
            for rname, sval in zip(tok[1::2], tok[2::2]):
                val = _float(sval, lineno)
                if rname not in row_type:
                    raise MpsParseError(f"unknown row {rname!r}", lineno)
                if row_type[rname] == "N":
                    if rname == obj_row:
                        col_obj[j] += val
                elif val != 0:
                    coeffs[rname][j] = coeffs[rname].get(j, 0.0) + val
        elif section in ("RHS", "RANGES"):
            pairs = tok[1:] if len(tok) % 2 == 1 else tok
            if len(pairs) not in (2, 4):
                raise MpsParseError(f"malformed {section} entry", lineno)
            for rname, sval in zip(pairs[0::2], pairs[1::2]):
                val = _float(sval, lineno)
                if rname not in row_type:
                    raise MpsParseError(f"unknown row {rname!r}", lineno)
                if row_type[rname] == "N":
                    continue  # objective constant; does not affect cuts
                if section == "RHS":
                    rhs[rname] = val
                else:
                    ranges.append((rname, val, lineno))
        elif section == "BOUNDS":
            _read_bound(tok, lineno, col_index, col_int, lower, upper, bound_seen)
        else:  # pragma: no cover
            raise MpsParseError(f"unexpected data in section {section}", lineno)

    for required in ("ROWS", "COLUMNS"):
        if required not in seen_sections:
            raise MpsParseError(f"missing {required} section")

    cons = []
    extra = []
    for rname in row_order:
        cons.append(Constraint(rname, {j: a for j, a in sorted(coeffs[rname].items()) if a != 0},
                               _SENSE[row_type[rname]], rhs[rname]))
    pos = {c.name: i for i, c in enumerate(cons)}
    for rname, r, lineno in ranges:
        i = pos[rname]
        con = cons[i]
        b = con.rhs
        kind = row_type[rname]
        if kind == "L":
            lo_hi = (b - abs(r), b)
        elif kind == "G":
            lo_hi = (b, b + abs(r))
        else:
            lo_hi = (b, b + r) if r >= 0 else (b + r, b)
        cons[i] = Constraint(rname, con.coeffs, ">=", lo_hi[0])
        extra.append(Constraint(rname + "_rng", con.coeffs, "<=", lo_hi[1]))

    vs = []
    for j, cname in enumerate(col_names):
        lo = lower.get(j, 0.0)
        up = upper.get(j, INF)
        if lo > up:
            raise MpsParseError(f"column {cname!r}: lower bound {lo} exceeds upper bound {up}")
        vs.append(Variable(cname, lo, up, col_int[j], col_obj[j]))
    return MilpInstance(name, tuple(vs), tuple(cons + extra), sense)


def _objsense(tok, lineno):
    t = tok.upper()
    if t in ("MAX", "MAXIMIZE"):
        return "max"
    if t in ("MIN", "MINIMIZE"):
        return "min"
    raise MpsParseError(f"unknown objective sense {tok!r}", lineno)


def _float(s, lineno):
    try:
        v = float(s)
    except ValueError:
        raise MpsParseError(f"not a number: {s!r}", lineno) from None
    if math.isnan(v):
        raise MpsParseError("NaN value", lineno)
    return v


def _read_bound(tok, lineno, col_index, col_int, lower, upper, seen):
    kind = tok[0].upper()
    no_value = kind in ("FR", "MI", "PL", "BV")
    if no_value:
        if len(tok) == 2:
            cname, sval = tok[1], None
        elif len(tok) == 3:
            cname, sval = tok[2], None
        elif len(tok) == 4 and kind == "BV":
            cname, sval = tok[2], tok[3]
        else:
            raise MpsParseError("malformed BOUNDS entry", lineno)
    else:
        if len(tok) == 3:
            cname, sval = tok[1], tok[2]
        elif len(tok) == 4:
            cname, sval = tok[2], tok[3]
        else:
            raise MpsParseError("malformed BOUNDS entry", lineno)
    if cname not in col_index:
        raise MpsParseError(f"unknown column {cname!r}", lineno)
    j = col_index[cname]
    val = None if sval is None else _float(sval, lineno)

    def mark(which):
        if (j, which) in seen:
            raise MpsParseError(f"duplicate {which} bound for column {cname!r}", lineno)
        seen.add((j, which))

    if kind == "UP":
        mark("upper")
        upper[j] = val
        if val < 0 and (j, "lower") not in seen:
            lower[j] = -INF
    elif kind == "LO":
        mark("lower")
        lower[j] = val
    elif kind == "FX":
        mark("lower")
        mark("upper")
        lower[j] = upper[j] = val
    elif kind == "FR":
        mark("lower")
        mark("upper")
        lower[j], upper[j] = -INF, INF
    elif kind == "MI":
        mark("lower")
        lower[j] = -INF
    elif kind == "PL":
        mark("upper")
        upper[j] = INF
    elif kind == "BV":
        mark("lower")
        mark("upper")
        lower[j], upper[j] = 0.0, 1.0
        col_int[j] = True
    elif kind in ("LI", "UI"):
        mark("lower" if kind == "LI" else "upper")
        (lower if kind == "LI" else upper)[j] = val
        col_int[j] = True
    else:
        raise MpsParseError(f"unsupported bound type {tok[0]!r}", lineno)
