"""Pure-numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable or when
``CLOSURE_FORGE_PURE=1`` is set.  Signatures and results match the Cython
module exactly.
"""
import numpy as np

CHUNK = 1 << 15


def gmic_coefficients(alpha, beta, int_mask, drop_tol):
    alpha = np.asarray(alpha, dtype=np.float64)
    mask = np.asarray(int_mask, dtype=bool)
    f0 = beta - np.floor(beta)
    fa = alpha - np.floor(alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        ints = np.where(fa <= f0, fa / f0, (1.0 - fa) / (1.0 - f0))
        conts = np.where(alpha >= 0, alpha / f0, -alpha / (1.0 - f0))
    out = np.where(mask, ints, conts)
    out[np.abs(out) < drop_tol] = 0.0
    return out


def integer_grid(lo, hi):
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    k = lo.shape[0]
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64)
    if np.any(hi < lo):
        return np.zeros((0, k), dtype=np.int64)
    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def slice_min(points, AJ, b, null_proj, vert_proj, vert_cols, costs_J, costs_C, tol):
    """Minimize linear functions over the continuous slice at each integer point.

    For point ``x`` the slice is ``{y >= 0 : A_C y = b - A_J x}``.  It is
    nonempty iff the residual is in the column space of ``A_C`` and some
    vertex solution is nonnegative; every vertex is tried.
    """
    points = np.asarray(points, dtype=np.float64)
    p = points.shape[0]
    q = costs_J.shape[0]
    V = vert_proj.shape[0]
    feasible = np.zeros(p, dtype=bool)
    best = np.full((q, p), np.inf)
    arg = np.full((q, p), -1, dtype=np.int64)
    for start in range(0, p, CHUNK):
        stop = min(p, start + CHUNK)
        X = points[start:stop]
        R = b[None, :] - X @ AJ.T                       # (c, m)
        scale = tol * (1.0 + np.max(np.abs(R), axis=1, initial=0.0))
        in_span = np.max(np.abs(R @ null_proj.T), axis=1, initial=0.0) <= scale
        base = X @ costs_J.T                            # (c, q)
        for v in range(V):
            Y = R @ vert_proj[v].T                      # (c, s)
            ok = in_span & (np.min(Y, axis=1, initial=0.0) >= -scale)
            if not ok.any():
                continue
            feasible[start:stop] |= ok
            val = base + Y @ costs_C[:, vert_cols[v]].T  # (c, q)
            val = np.where(ok[:, None], val, np.inf).T
            sub = best[:, start:stop]
            better = val < sub
            sub[better] = val[better]
            arg[:, start:stop][better] = v
    return feasible, best, arg
