"""Learning and replaying aggregation multipliers across an instance family.

Training runs cut collection on every training variation and keeps the
multiplier (a row of the basis inverse) behind every surviving cut.  At test
time the stored multipliers of the nearest, farthest or random training
variations are applied to the test instance's own rows, which keeps every
replayed cut valid for the test instance.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .collect import CollectConfig, collect_cuts
from .errors import ClosureForgeError, MappingError, SignatureMismatch
from .gmic import dedupe, filter_dominated, gmic_from_multiplier
from .model import MilpInstance, dumps_json, instance_signature, map_cut_to_original, to_standard_form

log = logging.getLogger(__name__)

STORE_FORMAT_VERSION = 1
STRATEGIES = ("closest", "farthest", "random")


def features(inst: MilpInstance) -> np.ndarray:
    """Right-hand sides followed by objective coefficients, in instance order."""
    return np.concatenate([inst.rhs, inst.objective]).astype(float)


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json(cls, d) -> "Scaler":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


def fit_scaler(rows) -> Scaler:
    X = np.asarray(rows, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("fit_scaler needs at least one feature row")
    mean = X.mean(axis=0)
    std = X.std(axis=0)  # population standard deviation
    std[std < 1e-12] = 1.0
    return Scaler(mean, std)


@dataclass
class StoreEntry:
    id: str
    features: np.ndarray
    multipliers: list  # sparse lambdas: [((row, value), ...), ...]
    failure: Optional[str] = None

    def to_json(self) -> dict:
        out = {
            "id": self.id,
            "features": self.features.tolist(),
            "multipliers": [[[i, v] for i, v in lam] for lam in self.multipliers],
        }
        if self.failure is not None:
            out["failure"] = self.failure
        return out

    @classmethod
    def from_json(cls, d) -> "StoreEntry":
        lams = [tuple((int(i), float(v)) for i, v in lam) for lam in d["multipliers"]]
        return cls(d["id"], np.asarray(d["features"], dtype=float), lams, d.get("failure"))


@dataclass
class MultiplierStore:
    matrix_signature: int
    scaler: Scaler
    entries: list

    def __post_init__(self):
        width = self.scaler.mean.shape[0]
        for e in self.entries:
            if e.features.shape != (width,):
                raise ValueError(f"entry {e.id}: feature length {e.features.shape[0]} != {width}")
            for lam in e.multipliers:
                vals = [v for _, v in lam]
                if not vals or not np.all(np.isfinite(vals)):
                    raise ValueError(f"entry {e.id}: multipliers must be nonzero and finite")

    @property
    def ids(self) -> list:
        return [e.id for e in self.entries]

    def entry(self, vid: str) -> StoreEntry:
        for e in self.entries:
            if e.id == vid:
                return e
        raise KeyError(vid)

    def to_json(self) -> dict:
        return {
            "v": STORE_FORMAT_VERSION,
            "matrix_signature": f"{self.matrix_signature:016x}",
            "scaler": self.scaler.to_json(),
            "entries": [e.to_json() for e in self.entries],
        }

    @classmethod
    def from_json(cls, d) -> "MultiplierStore":
        if d.get("v") != STORE_FORMAT_VERSION:
            raise ValueError(f"unsupported store version {d.get('v')}")
        return cls(int(d["matrix_signature"], 16), Scaler.from_json(d["scaler"]),
                   [StoreEntry.from_json(e) for e in d["entries"]])

    def save(self, path) -> None:
        Path(path).write_text(dumps_json(self.to_json()))

    @classmethod
    def load(cls, path) -> "MultiplierStore":
        return cls.from_json(json.loads(Path(path).read_text()))


def _check_signature(store: MultiplierStore, inst: MilpInstance):
    sig = instance_signature(inst)
    if sig != store.matrix_signature:
        raise SignatureMismatch(
            f"instance signature {sig:016x} does not match store {store.matrix_signature:016x}")


def select_variations(store: MultiplierStore, test, k: int, strategy: str = "closest",
                      seed: Optional[int] = None) -> list:
    """Ids of ``k`` training variations chosen by scaled 2-norm distance or at random.

    ``test`` is an instance (signature-checked) or a raw feature vector.
    """
    n = len(store.entries)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside 1..{n}")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if isinstance(test, MilpInstance):
        _check_signature(store, test)
        test = features(test)
    if strategy == "random":
        rng = np.random.default_rng(seed)
        order = rng.permutation(n)
        return [store.entries[i].id for i in order[:k]]
    X = store.scaler.transform(np.vstack([e.features for e in store.entries]))
    t = store.scaler.transform(test)
    dist = np.linalg.norm(X - t, axis=1)
    ids = store.ids
    sign = 1.0 if strategy == "closest" else -1.0
    order = sorted(range(n), key=lambda i: (sign * dist[i], ids[i]))
    return [ids[i] for i in order[:k]]


def _train_one(args):
    vid, inst, cfg = args
    feats = features(inst)
    try:
        sf, _ = to_standard_form(inst)
        pool = collect_cuts(sf, cfg, instance=vid)
    except ClosureForgeError as exc:
        log.warning("collection failed on %s: %s", vid, exc)
        return StoreEntry(vid, feats, [], failure=f"{type(exc).__name__}: {exc}")
    lams = [lam for lam in pool.multipliers if lam]
    return StoreEntry(vid, feats, lams)


def train_family(train_instances: Sequence[MilpInstance], cfg: CollectConfig = CollectConfig(),
                 ids: Optional[Sequence[str]] = None, jobs: int = 1) -> MultiplierStore:
    train_instances = list(train_instances)
    if not train_instances:
        raise ValueError("no training instances")
    sig = instance_signature(train_instances[0])
    for inst in train_instances[1:]:
        if instance_signature(inst) != sig:
            raise SignatureMismatch(f"training instance {inst.name} has a different matrix signature")
    if ids is None:
        ids = [f"train_{i:03d}" for i in range(len(train_instances))]
    work = [(vid, inst, cfg) for vid, inst in zip(ids, train_instances, strict=True)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            entries = list(ex.map(_train_one, work))
    else:
        entries = [_train_one(w) for w in work]
    scaler = fit_scaler([e.features for e in entries])
    return MultiplierStore(sig, scaler, entries)


def replay_multipliers(store: MultiplierStore, sf, ids: Sequence[str], instance: Optional[str] = None,
                       dominance: bool = False) -> list:
    """Standard-space GMICs from the multipliers of ``ids`` applied to ``sf``."""
    cuts = []
    for vid in ids:
        for lam in store.entry(vid).multipliers:
            cut = gmic_from_multiplier(lam, sf, instance=instance, basis=vid)
            if cut is not None:
                cuts.append(cut)
    cuts = dedupe(cuts)
    if dominance:
        cuts = filter_dominated(cuts)
    return cuts


def predict_cuts(store: MultiplierStore, test: MilpInstance, k: int, strategy: str = "closest",
                 seed: Optional[int] = None, dominance: bool = False, space: str = "original") -> list:
    """Cuts for ``test`` from the multipliers of the selected training variations.

    Returned in original-variable space unless ``space="standard"``.
    """
    ids = select_variations(store, test, k, strategy, seed)
    sf, vmap = to_standard_form(test)
    cuts = replay_multipliers(store, sf, ids, instance=test.name, dominance=dominance)
    if space == "standard":
        return cuts
    out = []
    for cut in cuts:
        try:
            out.append(map_cut_to_original(cut, vmap, sf))
        except MappingError as exc:
            log.info("dropping unmappable cut: %s", exc)
    return out
