"""Relax-and-cut collection of rank-1 GMICs for one instance.

Each round solves the LP with every retained cut, drops cuts whose dual is
zero, moves the survivors into the objective with their duals as penalties,
re-solves the plain LP relaxation from the last visited basis and harvests
GMICs from the new optimal tableau.  Cuts are always generated from the
original rows ``Ax = b``, never from cut rows, so they stay rank 1.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CollectionError
from .gmic import fractionality, gmic_from_row
from .model import Cut, CutOrigin, StandardFormMilp
from .simplex import OPTIMAL, resolve_with_objective, solve, tableau_rows

log = logging.getLogger(__name__)

POOL_FORMAT_VERSION = 1

STALLED = "stalled"
BASIS_REPEAT = "basis_repeat"
ROUND_LIMIT = "round_limit"
INTEGRAL_LP = "integral_lp"


@dataclass(frozen=True)
class CollectConfig:
    max_rounds: int = 10
    frac_threshold: float = 1e-3
    max_rows_per_basis: int = 500
    dual_zero_tol: float = 1e-7
    obj_stall_tol: float = 1e-9
    audit: bool = False  # re-solve after each zero-dual removal and record the optimum

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        if not 0 < self.frac_threshold < 0.5:
            raise ValueError("frac_threshold must lie in (0, 0.5)")
        if self.max_rows_per_basis < 1:
            raise ValueError("max_rows_per_basis must be at least 1")


@dataclass
class RoundRecord:
    round: int
    lp_with_cuts: float
    cuts_in_lp: int
    removed: int
    lp_after_removal: Optional[float] = None
    basis: Optional[str] = None
    eligible_rows: int = 0
    harvested: int = 0
    added: int = 0


@dataclass
class CutPool:
    cuts: list
    duals: list
    visited: list
    history: list
    termination_reason: str
    lp_bound: float
    final_bound: float
    rounds: int = 0
    instance: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "v": POOL_FORMAT_VERSION,
            "instance": self.instance,
            "termination_reason": self.termination_reason,
            "rounds": self.rounds,
            "lp_bound": self.lp_bound,
            "final_bound": self.final_bound,
            "visited": list(self.visited),
            "history": [asdict(r) for r in self.history],
            "cuts": [dict(c.to_json(), dual=u) for c, u in zip(self.cuts, self.duals)],
        }

    @classmethod
    def from_json(cls, d) -> "CutPool":
        cuts = [Cut.from_json(c) for c in d["cuts"]]
        duals = [float(c.get("dual", 0.0)) for c in d["cuts"]]
        history = [RoundRecord(**r) for r in d.get("history", [])]
        return cls(cuts, duals, list(d.get("visited", [])), history, d["termination_reason"],
                   d["lp_bound"], d["final_bound"], d.get("rounds", 0), d.get("instance"))

    @property
    def multipliers(self) -> list:
        return [c.origin.multiplier for c in self.cuts]


def _eligible(rows, integer_mask, cfg):
    n = len(integer_mask)
    return [t for t in rows
            if t.basic_var < n and integer_mask[t.basic_var]
            and fractionality(t.beta) > cfg.frac_threshold]


def select_rows(rows, integer_mask, cfg: CollectConfig = CollectConfig()) -> list:
    """Most fractional rows with integer basic variables, at most ``max_rows_per_basis``."""
    keep = _eligible(rows, integer_mask, cfg)
    keep.sort(key=lambda t: (-fractionality(t.beta), t.row_index))
    return keep[: cfg.max_rows_per_basis]


def lagrangian_objective(c, active) -> np.ndarray:
    """``c - sum(u_j * eta_j)`` for active (cut, dual) pairs."""
    out = np.array(c, dtype=float)
    for cut, u in active:
        if u < -1e-9:
            raise ValueError(f"negative dual {u} in Lagrangian objective")
        if u > 0:
            out[cut.index] -= u * cut.value
    return out


def lagrangian_constant(active) -> float:
    return float(sum(max(u, 0.0) * cut.rhs for cut, u in active))


def final_bound(sf: StandardFormMilp, cuts: Sequence[Cut]) -> float:
    res = solve(sf.with_cuts(list(cuts)))
    if res.status != OPTIMAL:
        raise CollectionError("final_bound", res.status)
    return res.obj


def _harvest(sf, basis, cfg, instance):
    rows = tableau_rows(sf, basis)
    eligible = _eligible(rows, sf.integer_mask, cfg)
    chosen = select_rows(rows, sf.integer_mask, cfg)
    key = basis.key()
    cuts = []
    for t in chosen:
        origin = CutOrigin(instance, key, t.row_index, t.sparse_lambda())
        cut = gmic_from_row(t.alpha, t.beta, sf.integer_mask, origin)
        if cut is not None:
            cuts.append(cut)
    return cuts, len(eligible)


def _solve_with_cuts(sf, cuts, step):
    res = solve(sf.with_cuts(cuts))
    if res.status != OPTIMAL:
        raise CollectionError(step, res.status)
    return res, res.duals[sf.m:]


def collect_cuts(sf: StandardFormMilp, cfg: CollectConfig = CollectConfig(),
                 instance: Optional[str] = None) -> CutPool:
    instance = instance if instance is not None else (sf.name or None)
    lp = solve(sf)
    if lp.status != OPTIMAL:
        raise CollectionError("lp_relaxation", lp.status)
    cuts, eligible = _harvest(sf, lp.basis, cfg, instance)
    visited = [lp.basis.key()]
    if not cuts:
        return CutPool([], [], visited, [], INTEGRAL_LP, lp.obj, lp.obj, 0, instance)

    keys = {c.key() for c in cuts}
    retained = list(cuts)
    history = [RoundRecord(0, lp.obj, 0, 0, None, visited[0], eligible, len(cuts), len(cuts))]
    plain_basis = lp.basis
    prev_obj = None
    reason = ROUND_LIMIT
    rounds = 0
    for rnd in range(1, cfg.max_rounds + 1):
        rounds = rnd
        res, u = _solve_with_cuts(sf, retained, f"round {rnd}: lp_with_cuts")
        keep = u >= cfg.dual_zero_tol
        rec = RoundRecord(rnd, res.obj, len(retained), int((~keep).sum()))
        history.append(rec)
        retained = [c for c, k in zip(retained, keep) if k]
        duals = u[keep]
        keys = {c.key() for c in retained}
        if cfg.audit and rec.removed:
            rec.lp_after_removal = _solve_with_cuts(sf, retained, f"round {rnd}: audit")[0].obj
        if prev_obj is not None and abs(res.obj - prev_obj) <= cfg.obj_stall_tol * (1 + abs(res.obj)):
            reason = STALLED
            break
        prev_obj = res.obj

        c_lag = lagrangian_objective(sf.c, zip(retained, duals))
        lag = resolve_with_objective(sf, plain_basis, c_lag)
        if lag.status != OPTIMAL:
            raise CollectionError(f"round {rnd}: lagrangian", lag.status)
        key = lag.basis.key()
        rec.basis = key
        if key in visited:
            reason = BASIS_REPEAT
            break
        visited.append(key)
        plain_basis = lag.basis
        new, rec.eligible_rows = _harvest(sf, lag.basis, cfg, instance)
        rec.harvested = len(new)
        for cut in new:
            k = cut.key()
            if k not in keys:
                keys.add(k)
                retained.append(cut)
                rec.added += 1

    res, u = _solve_with_cuts(sf, retained, "final: lp_with_cuts")
    keep = u >= cfg.dual_zero_tol
    final_cuts = [c for c, k in zip(retained, keep) if k]
    final_duals = [float(v) for v in u[keep]]
    bound = final_bound(sf, final_cuts) if final_cuts else lp.obj
    log.debug("collect %s: %d cuts, %s after %d rounds", instance, len(final_cuts), reason, rounds)
    return CutPool(final_cuts, final_duals, visited, history, reason, lp.obj, bound, rounds, instance)
