"""``closure-forge`` command line: perturb, collect, train, predict, eval, verify.

Every subcommand writes JSON.  Failures are reported as one JSON object on
standard error with exit codes 2 (usage), 3 (family has no changes),
4 (invalid cut found) and 1 (anything else).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional

from . import __version__
from .collect import CollectConfig, collect_cuts, final_bound
from .errors import ClosureForgeError, FamilyError, OracleRefusal, SignatureMismatch
from .learn import STRATEGIES, MultiplierStore, predict_cuts, train_family
from .model import Cut, dumps_json, load_instance, map_cut_to_original, map_cut_to_standard, to_standard_form
from .oracle import SliceOracle, gap_closed, integer_optimum, verify_cuts
from .perturb import PerturbConfig, generate_family, load_family, write_family
from .simplex import OPTIMAL, solve

log = logging.getLogger("closure_forge")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_NO_CHANGES, EXIT_INVALID = 0, 1, 2, 3, 4
REPORT_VERSION = 1
SEED_ENV = "CLOSURE_FORGE_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _write(obj, out: Optional[str]):
    text = dumps_json(obj)
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _collect_cfg(args) -> CollectConfig:
    try:
        return CollectConfig(max_rounds=args.rounds, frac_threshold=args.frac_threshold,
                             max_rows_per_basis=args.max_rows)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _add_collect_flags(p):
    p.add_argument("--rounds", type=int, default=10, help="relax-and-cut rounds (default 10)")
    p.add_argument("--max-rows", type=int, default=500, help="tableau rows harvested per basis")
    p.add_argument("--frac-threshold", type=float, default=1e-3, help="minimum rhs fractionality")


# --------------------------------------------------------------------------
# subcommands

def cmd_perturb(args) -> int:
    inst = load_instance(args.inp)
    try:
        cfg = PerturbConfig(n_train=args.train, n_test=args.test, seed=args.seed,
                            feasibility_probe_count=args.probes, node_limit=args.node_limit)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fam = generate_family(inst, cfg)
    path = write_family(fam, args.out)
    log.info("wrote %d variations to %s", len(fam.members), args.out)
    print(path)
    return EXIT_OK


def cmd_collect(args) -> int:
    cfg = _collect_cfg(args)
    inst = load_instance(args.inp)
    sf, vmap = to_standard_form(inst)
    pool = collect_cuts(sf, cfg, instance=inst.name)
    out = pool.to_json()
    original = []
    for cut in pool.cuts:
        try:
            original.append(map_cut_to_original(cut, vmap, sf).to_json())
        except ClosureForgeError:
            original.append(None)
    out["original_cuts"] = original
    _write(out, args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _collect_cfg(args)
    fam = load_family(args.family)
    ids = [rec["id"] for rec in fam.provenance if rec["split"] == "train"]
    store = train_family(fam.train, cfg, ids=ids, jobs=args.jobs)
    store.save(args.out)
    failed = [e.id for e in store.entries if e.failure]
    if failed:
        log.warning("collection failed on %d training variations: %s", len(failed), ", ".join(failed))
    return EXIT_OK


def _check_k(store, k):
    if not 1 <= k <= len(store.entries):
        raise UsageError(f"--k {k} outside 1..{len(store.entries)} (store size)")


def cmd_predict(args) -> int:
    store = MultiplierStore.load(args.store)
    _check_k(store, args.k)
    test = load_instance(args.inp)
    cuts = predict_cuts(store, test, args.k, args.strategy, args.seed,
                        dominance=args.dominance, space=args.space)
    _write({"v": REPORT_VERSION, "instance": test.name, "k": args.k, "strategy": args.strategy,
            "seed": args.seed, "space": args.space, "cuts": [c.to_json() for c in cuts]}, args.out)
    return EXIT_OK


def _load_cuts(path):
    d = json.loads(Path(path).read_text())
    rows = d["cuts"] if isinstance(d, dict) else d
    return [Cut.from_json(c) for c in rows]


def cmd_verify(args) -> int:
    inst = load_instance(args.inp)
    sf, vmap = to_standard_form(inst)
    cuts = _load_cuts(args.cuts)
    std = []
    for cut in cuts:
        if cut.space == "original":
            if cut.dim != inst.n_vars:
                raise UsageError(f"original-space cut has dimension {cut.dim}, instance has {inst.n_vars}")
            std.append(map_cut_to_standard(cut, vmap, sf))
        else:
            if cut.dim != sf.n:
                raise UsageError(f"standard-space cut has dimension {cut.dim}, standard form has {sf.n}")
            std.append(cut)
    reports = verify_cuts(sf, std, limit=args.limit)
    n_bad = sum(1 for r in reports if not r.valid)
    _write({"v": REPORT_VERSION, "instance": inst.name, "cuts": len(reports), "invalid": n_bad,
            "reports": [r.to_json() for r in reports]}, args.out)
    if n_bad:
        _emit_error("invalid_cut", f"{n_bad} of {len(reports)} cuts are invalid", EXIT_INVALID)
        return EXIT_INVALID
    return EXIT_OK


def _row(method, sf, vmap, z_lp, z_ip, cuts, oracle, t0, extra=None):
    """One report row; bounds are in the instance's own objective sense."""
    t1 = time.perf_counter()
    z_cut = final_bound(sf, cuts) if cuts else z_lp
    t2 = time.perf_counter()
    n_valid = None
    if oracle is not None and cuts:
        n_valid = sum(r.valid for r in verify_cuts(sf, cuts, oracle=oracle))
    elif oracle is not None:
        n_valid = 0
    t3 = time.perf_counter()
    row = {
        "method": method,
        "lp_bound": vmap.original_objective(z_lp),
        "cut_bound": vmap.original_objective(z_cut),
        "ip_bound": None if z_ip is None else vmap.original_objective(z_ip),
        "gap_closed": None if z_ip is None else gap_closed(z_lp, z_cut, z_ip),
        "cuts_generated": len(cuts),
        "cuts_valid": n_valid,
        "termination_reason": None,
        "timings": {"generate": t1 - t0, "bound": t2 - t1, "verify": t3 - t2},
    }
    if extra:
        row.update(extra)
    return row


def _eval_one(task):
    vid, test, store, k, strategies, seed, cfg, timings, limit = task
    sf, vmap = to_standard_form(test)
    lp = solve(sf)
    if lp.status != OPTIMAL:
        return {"id": vid, "instance": test.name, "error": f"LP relaxation {lp.status}", "rows": []}
    oracle, z_ip = None, None
    try:
        oracle = SliceOracle(sf, limit=limit)
        z_ip = integer_optimum(sf, oracle=oracle)
    except OracleRefusal as exc:
        log.info("%s: no oracle bound (%s)", vid, exc)
    if z_ip is not None and z_ip == float("inf"):
        z_ip = None
    rows = [_row("baseline", sf, vmap, lp.obj, z_ip, [], oracle, time.perf_counter())]
    t0 = time.perf_counter()
    pool = collect_cuts(sf, cfg, instance=vid)
    rows.append(_row("expert", sf, vmap, lp.obj, z_ip, pool.cuts, oracle, t0,
                     {"termination_reason": pool.termination_reason}))
    for strat in strategies:
        t0 = time.perf_counter()
        cuts = predict_cuts(store, test, k, strat, seed, space="standard")
        rows.append(_row(f"ml:{strat}", sf, vmap, lp.obj, z_ip, cuts, oracle, t0, {"k": k}))
    if not timings:
        for r in rows:
            del r["timings"]
    return {"id": vid, "instance": test.name, "rows": rows}


def cmd_eval(args) -> int:
    fam = load_family(args.family)
    store = MultiplierStore.load(args.store)
    _check_k(store, args.k)
    strategies = list(STRATEGIES) if args.strategy == "all" else [args.strategy]
    ids = [rec["id"] for rec in fam.provenance if rec["split"] == "test"]
    cfg = _collect_cfg(args)
    tasks = [(vid, t, store, args.k, strategies, args.seed, cfg, args.timings, args.limit)
             for vid, t in zip(ids, fam.test)]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            per = list(ex.map(_eval_one, tasks))
    else:
        per = [_eval_one(t) for t in tasks]
    summary = {}
    for method in ["baseline", "expert"] + [f"ml:{s}" for s in strategies]:
        gaps = [r["gap_closed"] for p in per for r in p["rows"]
                if r["method"] == method and r["gap_closed"] is not None]
        summary[method] = {"mean_gap_closed": sum(gaps) / len(gaps) if gaps else None,
                           "instances": len(gaps)}
    _write({"v": REPORT_VERSION, "family": fam.seed.name, "k": args.k, "seed": args.seed,
            "instances": per, "summary": summary}, args.out)
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="closure-forge", description="GMIC collection and multiplier replay for MILP families.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("perturb", help="generate a train/test family from a seed instance")
    q.add_argument("--in", dest="inp", required=True, help="seed instance (.mps or .json)")
    q.add_argument("--seed", type=int, default=None)
    q.add_argument("--train", type=int, default=50)
    q.add_argument("--test", type=int, default=5)
    q.add_argument("--probes", type=int, default=5, help="rhs feasibility probes")
    q.add_argument("--node-limit", type=int, default=10**5)
    q.add_argument("--out", required=True, help="output directory")
    q.set_defaults(func=cmd_perturb)

    q = sub.add_parser("collect", help="relax-and-cut GMIC collection on one instance")
    q.add_argument("--in", dest="inp", required=True)
    _add_collect_flags(q)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_collect)

    q = sub.add_parser("train", help="collect multipliers on every training variation")
    q.add_argument("--family", required=True)
    _add_collect_flags(q)
    q.add_argument("--jobs", type=int, default=1)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_train)

    q = sub.add_parser("predict", help="replay stored multipliers on a test instance")
    q.add_argument("--store", required=True)
    q.add_argument("--in", dest="inp", required=True)
    q.add_argument("--k", type=int, default=10)
    q.add_argument("--strategy", choices=STRATEGIES, default="closest")
    q.add_argument("--seed", type=int, default=None)
    q.add_argument("--dominance", action="store_true", help="drop dominated cuts")
    q.add_argument("--space", choices=("original", "standard"), default="original")
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_predict)

    q = sub.add_parser("eval", help="compare LP and cut bounds on the test variations")
    q.add_argument("--family", required=True)
    q.add_argument("--store", required=True)
    q.add_argument("--k", type=int, default=10)
    q.add_argument("--strategy", choices=STRATEGIES + ("all",), default="all")
    q.add_argument("--seed", type=int, default=None)
    _add_collect_flags(q)
    q.add_argument("--limit", type=int, default=10**6, help="oracle enumeration limit")
    q.add_argument("--jobs", type=int, default=1)
    q.add_argument("--timings", action="store_true", help="include wall-clock timings (not reproducible)")
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_eval)

    q = sub.add_parser("verify", help="check cuts against the brute-force oracle")
    q.add_argument("--in", dest="inp", required=True)
    q.add_argument("--cuts", required=True)
    q.add_argument("--limit", type=int, default=10**6)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_verify)
    return p


def _emit_error(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be at least 1")
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        _emit_error("usage", str(exc), EXIT_USAGE)
        return EXIT_USAGE
    except SignatureMismatch as exc:
        _emit_error("signature_mismatch", str(exc), EXIT_USAGE)
        return EXIT_USAGE
    except FamilyError as exc:
        code = EXIT_NO_CHANGES if str(exc) == "no changes" else EXIT_INTERNAL
        _emit_error("family", str(exc), code)
        return code
    except (OSError, ValueError, KeyError) as exc:
        _emit_error("input", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)
        return EXIT_INTERNAL
    except ClosureForgeError as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_INTERNAL)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort structured report
        _emit_error("internal", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
