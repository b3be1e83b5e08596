"""Instance families by perturbing right-hand sides and objective coefficients.

Right-hand sides follow four per-constraint rules (multiplicative ``r`` for
rows with a continuous variable or discrete inequalities whose rhs is not 1,
additive ``{-1, 0, 1}`` for all-discrete equalities).  A handful of rhs-only
probes is checked for integer feasibility first; any failure disables the rhs
channel.  Objectives are scaled coefficient-wise unless their support is a
single variable.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FamilyError
from .model import Constraint, MilpInstance, dumps_json, instance_signature, instance_to_json, load_instance, save_instance
from .oracle import FEASIBLE, feasibility_check

log = logging.getLogger(__name__)

RULE1, RULE2, RULE3, RULE4, NONE = "rule1", "rule2", "rule3", "rule4", "none"
MULTIPLICATIVE = (RULE1, RULE2, RULE3)
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class PerturbConfig:
    rhs_mult_range: tuple = (0.9, 1.1)
    obj_mult_range: tuple = (0.75, 1.25)
    equality_additive_set: tuple = (-1, 0, 1)
    n_train: int = 50
    n_test: int = 5
    feasibility_probe_count: int = 5
    seed: int = 0
    node_limit: int = 10**5

    def __post_init__(self):
        for lo, hi in (self.rhs_mult_range, self.obj_mult_range):
            if not lo <= hi:
                raise ValueError(f"range [{lo}, {hi}] is not ordered")
        if self.feasibility_probe_count < 1:
            raise ValueError("feasibility_probe_count must be at least 1")
        if not self.equality_additive_set:
            raise ValueError("equality_additive_set is empty")

    def to_json(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def classify_constraint(con: Constraint, vars) -> str:
    support = [j for j, a in con.coeffs.items() if a != 0]
    if not support:
        return NONE
    n_disc = sum(1 for j in support if vars[j].is_integer)
    n_cont = len(support) - n_disc
    if len(support) == 2 and n_disc == 1:
        return RULE1
    if len(support) > 2 and n_cont >= 1:
        return RULE2
    if n_cont == 0 and con.sense != "=" and con.rhs != 1:
        return RULE3
    if n_cont == 0 and con.sense == "=":
        return RULE4
    return NONE


def objective_support(inst: MilpInstance) -> int:
    return sum(1 for v in inst.vars if v.obj != 0)


def perturb_instance(inst: MilpInstance, cfg: PerturbConfig, seed: int, which: str = "both",
                     name: Optional[str] = None) -> MilpInstance:
    """One random variation; deterministic given ``seed``."""
    if which not in ("rhs", "obj", "both"):
        raise ValueError(f"bad channel {which!r}")
    rng = np.random.default_rng(seed)
    out = inst
    if which in ("rhs", "both"):
        lo, hi = cfg.rhs_mult_range
        rhs = []
        for con in inst.constraints:
            rule = classify_constraint(con, inst.vars)
            if rule in MULTIPLICATIVE:
                rhs.append(con.rhs * rng.uniform(lo, hi))
            elif rule == RULE4:
                rhs.append(con.rhs + float(rng.choice(cfg.equality_additive_set)))
            else:
                rhs.append(con.rhs)
        out = out.with_rhs(rhs)
    if which in ("obj", "both") and objective_support(inst) > 1:
        lo, hi = cfg.obj_mult_range
        r = rng.uniform(lo, hi, size=inst.n_vars)
        out = out.with_objective(inst.objective * r)
    if name is not None:
        from dataclasses import replace
        out = replace(out, name=name)
    return out


@dataclass
class Family:
    seed: MilpInstance
    train: list
    test: list
    rhs_enabled: bool
    obj_enabled: bool
    provenance: list = field(default_factory=list)
    probes: list = field(default_factory=list)
    config: Optional[PerturbConfig] = None

    @property
    def members(self) -> list:
        return self.train + self.test


def _sub_seeds(seed: int, count: int) -> list:
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def generate_family(inst: MilpInstance, cfg: PerturbConfig = PerturbConfig()) -> Family:
    labels = [classify_constraint(c, inst.vars) for c in inst.constraints]
    obj_enabled = objective_support(inst) > 1
    rhs_enabled = any(lab != NONE for lab in labels)
    n_var = cfg.n_train + cfg.n_test
    seeds = _sub_seeds(cfg.seed, cfg.feasibility_probe_count + n_var)
    probes = []
    if rhs_enabled:
        for i, s in enumerate(seeds[: cfg.feasibility_probe_count]):
            probe = perturb_instance(inst, cfg, s, "rhs")
            res = feasibility_check(probe, cfg.node_limit)
            probes.append({"probe": i, "sub_seed": s, "status": res.status, "nodes": res.nodes})
            if res.status != FEASIBLE:
                log.info("rhs probe %d is %s; disabling rhs perturbation", i, res.status)
                rhs_enabled = False
                break
    if not rhs_enabled and not obj_enabled:
        raise FamilyError("no changes")
    which = "both" if rhs_enabled and obj_enabled else ("rhs" if rhs_enabled else "obj")
    train, test, prov = [], [], []
    for i, s in enumerate(seeds[cfg.feasibility_probe_count:]):
        split = "train" if i < cfg.n_train else "test"
        idx = i if split == "train" else i - cfg.n_train
        vid = f"{split}_{idx:03d}"
        member = perturb_instance(inst, cfg, s, which, name=f"{inst.name}_{vid}")
        (train if split == "train" else test).append(member)
        prov.append({"id": vid, "split": split, "file": f"{vid}.json", "sub_seed": s,
                     "rhs": rhs_enabled, "obj": obj_enabled})
    return Family(inst, train, test, rhs_enabled, obj_enabled, prov, probes, cfg)


def _content_hash(inst: MilpInstance) -> str:
    text = json.dumps(instance_to_json(inst), sort_keys=True)
    return hashlib.blake2b(text.encode(), digest_size=8).hexdigest()


def family_manifest(fam: Family) -> dict:
    return {
        "v": MANIFEST_VERSION,
        "seed_instance": fam.seed.name,
        "seed_hash": _content_hash(fam.seed),
        "matrix_signature": f"{instance_signature(fam.seed):016x}",
        "config": fam.config.to_json() if fam.config else None,
        "rhs_enabled": fam.rhs_enabled,
        "obj_enabled": fam.obj_enabled,
        "probes": fam.probes,
        "variations": fam.provenance,
    }


def write_family(fam: Family, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_instance(fam.seed, d / "seed.json")
    for rec, member in zip(fam.provenance, fam.members):
        save_instance(member, d / rec["file"])
    path = d / "manifest.json"
    path.write_text(dumps_json(family_manifest(fam)))
    return path


def load_family(directory) -> Family:
    d = Path(directory)
    man = json.loads((d / "manifest.json").read_text())
    seed = load_instance(d / "seed.json")
    train, test = [], []
    for rec in man["variations"]:
        inst = load_instance(d / rec["file"])
        (train if rec["split"] == "train" else test).append(inst)
    cfg = None
    if man.get("config"):
        cfg = PerturbConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in man["config"].items()})
    return Family(seed, train, test, man["rhs_enabled"], man["obj_enabled"], man["variations"],
                  man.get("probes", []), cfg)
