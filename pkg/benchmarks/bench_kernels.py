"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs under both backends; the table reports the
best wall time per call and the speedup of the compiled version.
"""
import argparse
import sys
import timeit
from pathlib import Path

import numpy as np

from closure_forge import _kernels_py, kernels
from closure_forge.oracle import FEAS_TOL, SliceOracle

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from instances import random_standard  # noqa: E402


def cases(rng):
    alpha = rng.normal(scale=5, size=2000)
    mask = rng.random(2000) < 0.6
    yield "gmic_coefficients n=2000", "gmic_coefficients", (alpha, 3.37, mask, 1e-11)

    lo = np.zeros(6, np.int64)
    hi = np.full(6, 5, np.int64)
    yield "integer_grid 6^6", "integer_grid", (lo, hi)

    # the largest oracle among a batch of random instances
    best = None
    for _ in range(30):
        sf = random_standard(rng, n_int=6, n_cont=3, m=3)
        o = SliceOracle(sf)
        if best is None or o.points.shape[0] * max(1, o.vert_cols.shape[0]) > \
                best.points.shape[0] * max(1, best.vert_cols.shape[0]):
            best = o
    o = best
    costs = rng.uniform(0, 3, size=(20, o.sf.n))
    args = (o.points, o.AJ, o.sf.b, o.null_proj, o.vert_proj, o.vert_cols,
            np.ascontiguousarray(costs[:, o.J]), np.ascontiguousarray(costs[:, o.C]), FEAS_TOL)
    yield f"slice_min {o.points.shape[0]} points x 20 costs", "slice_min", args


def best_time(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    compiled = kernels.compiled()
    if compiled is None:
        print("compiled extension not built; only the numpy fallback is timed")
    print(f"{'kernel':<40} {'python':>12} {'cython':>12} {'speedup':>8}")
    for label, name, inputs in cases(np.random.default_rng(args.seed)):
        t_py = best_time(getattr(_kernels_py, name), inputs, args.repeat)
        if compiled is None:
            print(f"{label:<40} {t_py * 1e6:>10.1f}us {'-':>12} {'-':>8}")
            continue
        t_cy = best_time(getattr(compiled, name), inputs, args.repeat)
        print(f"{label:<40} {t_py * 1e6:>10.1f}us {t_cy * 1e6:>10.1f}us {t_py / t_cy:>7.2f}x")


if __name__ == "__main__":
    main()
