"""MILP instances, the standard-form conversion and cuts.

A :class:`MilpInstance` is the general problem as read from disk. Cut generation
works on :class:`StandardFormMilp` (``min c'x, Ax = b, x >= 0``) and every
conversion produces a :class:`VariableMap` that lets points and cuts travel back
to the original variables.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConversionError, MappingError

INF = math.inf
SENSES = ("<=", "=", ">=")
INSTANCE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float = 0.0
    upper: float = INF
    is_integer: bool = False
    obj: float = 0.0


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: Mapping[int, float]
    sense: str
    rhs: float


@dataclass(frozen=True)
class MilpInstance:
    name: str
    vars: tuple
    constraints: tuple
    objective_sense: str = "min"

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.objective_sense not in ("min", "max"):
            raise ValueError(f"bad objective sense {self.objective_sense!r}")
        n = len(self.vars)
        for v in self.vars:
            if v.lower > v.upper:
                raise ValueError(f"variable {v.name}: lower {v.lower} > upper {v.upper}")
        for con in self.constraints:
            if con.sense not in SENSES:
                raise ValueError(f"constraint {con.name}: bad sense {con.sense!r}")
            for j, a in con.coeffs.items():
                if not 0 <= j < n:
                    raise ValueError(f"constraint {con.name}: unknown variable index {j}")
                if a == 0:
                    raise ValueError(f"constraint {con.name}: explicit zero coefficient")

    @property
    def n_vars(self) -> int:
        return len(self.vars)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def rhs(self) -> np.ndarray:
        return np.array([c.rhs for c in self.constraints], dtype=float)

    @property
    def objective(self) -> np.ndarray:
        return np.array([v.obj for v in self.vars], dtype=float)

    def with_rhs(self, rhs: Sequence[float]) -> "MilpInstance":
        cons = tuple(replace(c, rhs=float(r)) for c, r in zip(self.constraints, rhs, strict=True))
        return replace(self, constraints=cons)

    def with_objective(self, obj: Sequence[float]) -> "MilpInstance":
        vs = tuple(replace(v, obj=float(c)) for v, c in zip(self.vars, obj, strict=True))
        return replace(self, vars=vs)

    def dense_matrix(self) -> np.ndarray:
        A = np.zeros((self.n_constraints, self.n_vars))
        for i, con in enumerate(self.constraints):
            for j, a in con.coeffs.items():
                A[i, j] = a
        return A

    def is_feasible_point(self, x, tol=1e-7) -> bool:
        x = np.asarray(x, dtype=float)
        for v, xv in zip(self.vars, x):
            if xv < v.lower - tol or xv > v.upper + tol:
                return False
            if v.is_integer and abs(xv - round(xv)) > tol:
                return False
        for con in self.constraints:
            lhs = sum(a * x[j] for j, a in con.coeffs.items())
            scale = tol * (1 + abs(con.rhs))
            if con.sense == "<=" and lhs > con.rhs + scale:
                return False
            if con.sense == ">=" and lhs < con.rhs - scale:
                return False
            if con.sense == "=" and abs(lhs - con.rhs) > scale:
                return False
        return True

    def objective_value(self, x) -> float:
        return float(self.objective @ np.asarray(x, dtype=float))


def make_instance(A, senses, rhs, obj, *, integer=None, lower=None, upper=None,
                  sense="min", name="instance", var_names=None) -> MilpInstance:
    """Build an instance from dense arrays; convenient for tests and generators."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    integer = [False] * n if integer is None else list(integer)
    lower = [0.0] * n if lower is None else list(lower)
    upper = [INF] * n if upper is None else list(upper)
    if var_names is None:
        var_names = [f"x{j + 1}" for j in range(n)]
    if isinstance(senses, str):
        senses = [senses] * m
    vs = tuple(Variable(var_names[j], float(lower[j]), float(upper[j]), bool(integer[j]), float(obj[j]))
               for j in range(n))
    cons = tuple(
        Constraint(f"c{i + 1}", {j: float(A[i, j]) for j in range(n) if A[i, j] != 0}, senses[i], float(rhs[i]))
        for i in range(m)
    )
    return MilpInstance(name, vs, cons, sense)


def instance_signature(inst: MilpInstance) -> int:
    """64-bit hash of everything that must stay fixed across a family.

    Covers variable count, integrality, bounds, senses and the matrix itself;
    right-hand sides and objective coefficients are deliberately left out.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<q", inst.n_vars))
    for v in inst.vars:
        h.update(struct.pack("<?dd", v.is_integer, v.lower, v.upper))
    h.update(struct.pack("<q", inst.n_constraints))
    for con in inst.constraints:
        h.update(con.sense.encode())
        for j in sorted(con.coeffs):
            h.update(struct.pack("<qd", j, con.coeffs[j]))
        h.update(b";")
    return int.from_bytes(h.digest(), "little")


# --------------------------------------------------------------------------
# standard form

@dataclass(frozen=True)
class StandardFormMilp:
    A: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    integer_mask: np.ndarray
    name: str = ""

    def __post_init__(self):
        A = sp.csr_matrix(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).ravel()
        c = np.asarray(self.c, dtype=float).ravel()
        mask = np.asarray(self.integer_mask, dtype=bool).ravel()
        m, n = A.shape
        if m < 1 or n < 1:
            raise ValueError("standard form needs at least one row and one column")
        if b.shape != (m,) or c.shape != (n,) or mask.shape != (n,):
            raise ValueError("dimension mismatch in standard form data")
        for arr in (b, c, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "integer_mask", mask)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @cached_property
    def dense(self) -> np.ndarray:
        D = self.A.toarray()
        D.setflags(write=False)
        return D

    def with_rhs(self, b) -> "StandardFormMilp":
        return StandardFormMilp(self.A, b, self.c, self.integer_mask, self.name)

    def with_cuts(self, cuts: Sequence["Cut"]) -> "StandardFormMilp":
        """Append ``eta'x - s = rhs`` rows with fresh continuous surplus columns."""
        if not cuts:
            return self
        p = len(cuts)
        rows = np.vstack([cut.dense() for cut in cuts])
        A = sp.bmat([[self.A, None], [sp.csr_matrix(rows), -sp.identity(p)]], format="csr")
        b = np.concatenate([self.b, [cut.rhs for cut in cuts]])
        c = np.concatenate([self.c, np.zeros(p)])
        mask = np.concatenate([self.integer_mask, np.zeros(p, dtype=bool)])
        return StandardFormMilp(A, b, c, mask, self.name)


@dataclass(frozen=True)
class OriginalVar:
    """How original variable ``x`` is expressed with standard columns.

    ``x = shift + y`` normally, ``x = shift - y`` when ``negated``, and
    ``x = y_pos - y_neg`` for a split free variable.
    """
    column: int
    shift: float = 0.0
    negated: bool = False
    split_pair: Optional[tuple] = None
    bound_slack: Optional[int] = None
    upper: float = INF


@dataclass(frozen=True)
class Provenance:
    kind: str  # original | slack | surplus | bound_slack
    ref: int


@dataclass(frozen=True)
class VariableMap:
    originals: tuple
    provenance: tuple
    constraint_rows: tuple  # standard row index per original constraint, or None if dropped
    constraints: tuple      # original (coeffs, sense, rhs) for slack substitution
    obj_sign: float = 1.0
    obj_offset: float = 0.0

    def to_original_point(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        x = np.empty(len(self.originals))
        for i, ov in enumerate(self.originals):
            if ov.split_pair is not None:
                x[i] = y[ov.split_pair[0]] - y[ov.split_pair[1]]
            elif ov.negated:
                x[i] = ov.shift - y[ov.column]
            else:
                x[i] = ov.shift + y[ov.column]
        return x

    def to_standard_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.zeros(len(self.provenance))
        for i, ov in enumerate(self.originals):
            if ov.split_pair is not None:
                y[ov.split_pair[0]] = max(x[i], 0.0)
                y[ov.split_pair[1]] = max(-x[i], 0.0)
            elif ov.negated:
                y[ov.column] = ov.shift - x[i]
            else:
                y[ov.column] = x[i] - ov.shift
        for k, prov in enumerate(self.provenance):
            if prov.kind in ("slack", "surplus"):
                coeffs, _, rhs = self.constraints[prov.ref]
                act = sum(a * x[j] for j, a in coeffs.items())
                y[k] = rhs - act if prov.kind == "slack" else act - rhs
            elif prov.kind == "bound_slack":
                y[k] = self.originals[prov.ref].upper - x[prov.ref]
        return y

    def original_objective(self, std_obj: float) -> float:
        return self.obj_sign * (std_obj + self.obj_offset)


def to_standard_form(inst: MilpInstance, max_free_splits: int = 64):
    """Convert ``inst`` to ``min c'y, Ay = b, y >= 0``.

    Lower bounds are shifted to zero, variables with only an upper bound are
    negated, free variables are split, and finite upper bounds become explicit
    rows ``y + t = u - l``.  Integer bounds are rounded inward first so that
    shifted integer variables stay integral.  Slack, surplus and bound-slack
    columns are always continuous.
    """
    sign = -1.0 if inst.objective_sense == "max" else 1.0
    cols_obj: list[float] = []
    cols_int: list[bool] = []
    provenance: list[Provenance] = []
    originals: list[OriginalVar] = []
    # per original var: list of (standard column, multiplier) so that x = shift + sum(mult*y)
    expansion: list[list[tuple[int, float]]] = []
    shifts: list[float] = []
    n_free = 0

    for i, v in enumerate(inst.vars):
        lo, up = v.lower, v.upper
        if v.is_integer:
            lo = math.ceil(lo - 1e-9) if math.isfinite(lo) else lo
            up = math.floor(up + 1e-9) if math.isfinite(up) else up
            if lo > up:
                raise ConversionError(f"variable {v.name}: empty integer range [{v.lower}, {v.upper}]")
        k = len(cols_obj)
        if math.isfinite(lo):
            originals.append(OriginalVar(k, float(lo), upper=float(up)))
            expansion.append([(k, 1.0)])
            shifts.append(float(lo))
            cols_obj.append(sign * v.obj)
        elif math.isfinite(up):
            originals.append(OriginalVar(k, float(up), negated=True, upper=float(up)))
            expansion.append([(k, -1.0)])
            shifts.append(float(up))
            cols_obj.append(-sign * v.obj)
        else:
            n_free += 1
            if n_free > max_free_splits:
                raise ConversionError(f"more than {max_free_splits} free variables to split")
            originals.append(OriginalVar(k, 0.0, split_pair=(k, k + 1)))
            expansion.append([(k, 1.0), (k + 1, -1.0)])
            shifts.append(0.0)
            cols_obj.extend([sign * v.obj, -sign * v.obj])
        width = len(cols_obj) - k
        provenance.extend([Provenance("original", i)] * width)
        cols_int.extend([v.is_integer] * width)

    row_i: list[int] = []
    col_j: list[int] = []
    vals: list[float] = []
    b: list[float] = []
    constraint_rows: list[Optional[int]] = []
    saved = []

    def add_entry(r, c, a):
        row_i.append(r)
        col_j.append(c)
        vals.append(a)

    for ci, con in enumerate(inst.constraints):
        saved.append((dict(con.coeffs), con.sense, con.rhs))
        if not math.isfinite(con.rhs):
            raise ConversionError(f"constraint {con.name}: infinite right-hand side")
        rhs = con.rhs - sum(a * shifts[j] for j, a in con.coeffs.items())
        if not con.coeffs and con.sense == "=" and rhs == 0:
            constraint_rows.append(None)
            continue
        r = len(b)
        merged: dict[int, float] = {}
        for j, a in con.coeffs.items():
            for k, mult in expansion[j]:
                merged[k] = merged.get(k, 0.0) + a * mult
        for k in sorted(merged):
            if merged[k] != 0:
                add_entry(r, k, merged[k])
        if con.sense == "<=":
            k = len(cols_obj)
            cols_obj.append(0.0)
            cols_int.append(False)
            provenance.append(Provenance("slack", ci))
            add_entry(r, k, 1.0)
        elif con.sense == ">=":
            k = len(cols_obj)
            cols_obj.append(0.0)
            cols_int.append(False)
            provenance.append(Provenance("surplus", ci))
            add_entry(r, k, -1.0)
        b.append(rhs)
        constraint_rows.append(r)

    for i, ov in enumerate(originals):
        if ov.split_pair is not None or ov.negated or not math.isfinite(ov.upper):
            continue
        r = len(b)
        k = len(cols_obj)
        cols_obj.append(0.0)
        cols_int.append(False)
        provenance.append(Provenance("bound_slack", i))
        add_entry(r, ov.column, 1.0)
        add_entry(r, k, 1.0)
        b.append(ov.upper - ov.shift)
        originals[i] = replace(ov, bound_slack=k)

    n = len(cols_obj)
    if not b:
        # keep the form well defined for instances without rows
        add_entry(0, 0, 0.0)
        b.append(0.0)
        constraint_rows = [None] * len(inst.constraints)
    A = sp.csr_matrix((vals, (row_i, col_j)), shape=(len(b), n))
    A.eliminate_zeros()
    sf = StandardFormMilp(A, np.array(b), np.array(cols_obj), np.array(cols_int, dtype=bool), inst.name)
    offset = sign * sum(v.obj * s for v, s in zip(inst.vars, shifts))
    vmap = VariableMap(tuple(originals), tuple(provenance), tuple(constraint_rows), tuple(saved),
                       sign, offset)
    return sf, vmap


# --------------------------------------------------------------------------
# cuts

def _sparse_pairs(pairs) -> Optional[tuple]:
    if pairs is None:
        return None
    return tuple((int(i), float(v)) for i, v in pairs)


@dataclass(frozen=True)
class CutOrigin:
    instance: Optional[str] = None
    basis: Optional[str] = None
    row: Optional[int] = None
    multiplier: Optional[tuple] = None  # sparse lambda as ((row, value), ...)

    def to_json(self) -> dict:
        return {
            "instance": self.instance,
            "basis": self.basis,
            "row": self.row,
            "multiplier": None if self.multiplier is None else [[i, v] for i, v in self.multiplier],
        }

    @classmethod
    def from_json(cls, d) -> "CutOrigin":
        return cls(d.get("instance"), d.get("basis"), d.get("row"), _sparse_pairs(d.get("multiplier")))


@dataclass(frozen=True)
class Cut:
    """The inequality ``sum(value[k] * x[index[k]]) >= rhs``."""
    index: np.ndarray
    value: np.ndarray
    rhs: float
    dim: int
    space: str = "standard"
    origin: Optional[CutOrigin] = None

    def __post_init__(self):
        idx = np.asarray(self.index, dtype=np.int64)
        val = np.asarray(self.value, dtype=float)
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], val[order]
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "value", val)
        object.__setattr__(self, "rhs", float(self.rhs))
        if self.space not in ("standard", "original"):
            raise ValueError(f"bad cut space {self.space!r}")

    @classmethod
    def from_dense(cls, coeffs, rhs, space="standard", origin=None, drop_tol=0.0) -> "Cut":
        coeffs = np.asarray(coeffs, dtype=float)
        nz = np.flatnonzero(np.abs(coeffs) > drop_tol)
        return cls(nz, coeffs[nz], rhs, len(coeffs), space, origin)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.index] = self.value
        return out

    def lhs(self, point) -> float:
        point = np.asarray(point, dtype=float)
        if point.shape[-1] != self.dim:
            raise ValueError(f"point has length {point.shape[-1]}, cut has dimension {self.dim}")
        return float(self.value @ point[self.index])

    def key(self) -> bytes:
        """Deduplication key: coefficients rounded to 12 significant digits."""
        text = ";".join(f"{i}:{v:.12g}" for i, v in zip(self.index.tolist(), self.value.tolist()))
        text += f"|{self.rhs:.12g}|{self.space}|{self.dim}"
        return hashlib.blake2b(text.encode(), digest_size=16).digest()

    def with_origin(self, origin) -> "Cut":
        return replace(self, origin=origin)

    def to_json(self) -> dict:
        return {
            "coeffs": [[i, v] for i, v in zip(self.index.tolist(), self.value.tolist())],
            "rhs": self.rhs,
            "dim": self.dim,
            "space": self.space,
            "origin": None if self.origin is None else self.origin.to_json(),
        }

    @classmethod
    def from_json(cls, d) -> "Cut":
        pairs = d["coeffs"]
        idx = [int(p[0]) for p in pairs]
        val = [float(p[1]) for p in pairs]
        origin = d.get("origin")
        dim = d.get("dim")
        if dim is None:
            dim = max(idx, default=-1) + 1
        return cls(idx, val, d["rhs"], int(dim), d.get("space", "standard"),
                   None if origin is None else CutOrigin.from_json(origin))


def map_cut_to_original(cut: Cut, vmap: VariableMap, sf: Optional[StandardFormMilp] = None) -> Cut:
    """Rewrite a standard-form cut over the original variables.

    Slack, surplus and bound-slack columns are replaced by their defining row
    expressions and shifts/negations are undone, so the result is valid for the
    original feasible set exactly when the input is valid for the standard one.
    """
    if cut.space != "standard":
        raise ValueError("cut is not in standard-form space")
    if sf is not None and cut.dim != sf.n:
        raise ValueError(f"cut dimension {cut.dim} does not match standard form ({sf.n})")
    n_orig = len(vmap.originals)
    coef = np.zeros(n_orig)
    rhs = cut.rhs
    split_cols = {}
    for i, ov in enumerate(vmap.originals):
        if ov.split_pair is not None:
            split_cols[ov.split_pair[0]] = split_cols[ov.split_pair[1]] = i
    for k, eta in zip(cut.index.tolist(), cut.value.tolist()):
        if k >= len(vmap.provenance):
            raise MappingError(f"standard variable {k} is not in the variable map")
        prov = vmap.provenance[k]
        if prov.kind == "original":
            ov = vmap.originals[prov.ref]
            if ov.split_pair is not None:
                raise MappingError(f"cut uses half of split free variable {prov.ref}; no linear image")
            if ov.negated:
                coef[prov.ref] -= eta
                rhs -= eta * ov.shift
            else:
                coef[prov.ref] += eta
                rhs += eta * ov.shift
        elif prov.kind in ("slack", "surplus"):
            coeffs, _, b_row = vmap.constraints[prov.ref]
            s = -1.0 if prov.kind == "slack" else 1.0
            for j, a in coeffs.items():
                coef[j] += s * eta * a
            rhs += s * eta * b_row
        elif prov.kind == "bound_slack":
            ov = vmap.originals[prov.ref]
            coef[prov.ref] -= eta
            rhs -= eta * ov.upper
        else:  # pragma: no cover - provenance kinds are closed
            raise MappingError(f"unknown provenance {prov.kind}")
    scale = max(1.0, float(np.max(np.abs(coef), initial=0.0)))
    coef[np.abs(coef) <= 1e-12 * scale] = 0.0
    return Cut.from_dense(coef, rhs, "original", cut.origin)


def map_cut_to_standard(cut: Cut, vmap: VariableMap, sf: StandardFormMilp) -> Cut:
    """Express an original-space cut over the standard columns (not normalized)."""
    if cut.space != "original":
        raise ValueError("cut is not in original space")
    coef = np.zeros(sf.n)
    rhs = cut.rhs
    for i, a in zip(cut.index.tolist(), cut.value.tolist()):
        ov = vmap.originals[i]
        if ov.split_pair is not None:
            coef[ov.split_pair[0]] += a
            coef[ov.split_pair[1]] -= a
        elif ov.negated:
            coef[ov.column] -= a
            rhs -= a * ov.shift
        else:
            coef[ov.column] += a
            rhs -= a * ov.shift
    return Cut.from_dense(coef, rhs, "standard", cut.origin)


# --------------------------------------------------------------------------
# native JSON format

def _num_out(v: float):
    if math.isinf(v):
        return None
    return v


def instance_to_json(inst: MilpInstance) -> dict:
    """Field-for-field JSON mirror of the instance; infinite bounds become null."""
    return {
        "v": INSTANCE_FORMAT_VERSION,
        "name": inst.name,
        "objective_sense": inst.objective_sense,
        "vars": [
            {"name": v.name, "lower": _num_out(v.lower), "upper": _num_out(v.upper),
             "is_integer": v.is_integer, "obj": v.obj}
            for v in inst.vars
        ],
        "constraints": [
            {"name": c.name, "coeffs": [[j, c.coeffs[j]] for j in sorted(c.coeffs)],
             "sense": c.sense, "rhs": c.rhs}
            for c in inst.constraints
        ],
    }


def instance_from_json(d: dict) -> MilpInstance:
    if d.get("v", INSTANCE_FORMAT_VERSION) != INSTANCE_FORMAT_VERSION:
        raise ValueError(f"unsupported instance format version {d.get('v')}")
    vs = tuple(
        Variable(v["name"],
                 -INF if v["lower"] is None else float(v["lower"]),
                 INF if v["upper"] is None else float(v["upper"]),
                 bool(v["is_integer"]), float(v["obj"]))
        for v in d["vars"]
    )
    cons = tuple(
        Constraint(c["name"], {int(j): float(a) for j, a in c["coeffs"]}, c["sense"], float(c["rhs"]))
        for c in d["constraints"]
    )
    return MilpInstance(d["name"], vs, cons, d["objective_sense"])


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def save_instance(inst: MilpInstance, path) -> None:
    Path(path).write_text(dumps_json(instance_to_json(inst)))


def load_instance(path) -> MilpInstance:
    path = Path(path)
    if path.suffix.lower() in (".mps", ".gz") or path.name.lower().endswith(".mps.gz"):
        from .mps import read_mps
        return read_mps(path)
    return instance_from_json(json.loads(path.read_text()))
