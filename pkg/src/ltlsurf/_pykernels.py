"""Pure-numpy implementations of the batched stencil kernels.

Used when the compiled extension is unavailable or ``LTLSURF_BACKEND=python``.
The compiled module exposes the same functions with the same signatures.
"""

import numpy as np

FIRST_ORDER = 0
MONOMIAL = 1

_FACT = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0, 362880.0, 3628800.0]


def n_rows(kind, degree):
    if kind == FIRST_ORDER:
        return 5
    return (degree + 1) * (degree + 2) // 2 - 1


def build_rows(xs, ys, kind, degree):
    """Configuration matrix, shape (n_rows, len(xs))."""
    if kind == FIRST_ORDER:
        return np.stack([xs, ys, xs * ys, xs * xs - ys * ys, np.ones_like(xs)])
    xp, yp = [np.ones_like(xs)], [np.ones_like(ys)]
    for _ in range(degree):
        xp.append(xp[-1] * xs)
        yp.append(yp[-1] * ys)
    rows = []
    for d in range(1, degree + 1):
        for m in range(d + 1):
            rows.append(xp[d - m] * yp[m] * (1.0 / (_FACT[d - m] * _FACT[m])))
    return np.stack(rows)


def config_pinv(indptr, xs, ys, kind, degree, rcond=1e-12):
    """Pseudo-inverses of the per-block configuration matrices.

    Block ``b`` covers points ``indptr[b]:indptr[b+1]``. Returns ``(P, flags)``
    where ``P[indptr[b]:indptr[b+1]]`` is ``pinv(M_b)`` (n_b x n_rows) and
    ``flags[b]`` is 1 when ``M_b`` is numerically rank deficient.
    """
    indptr = np.asarray(indptr, dtype=np.int64)
    m = n_rows(kind, degree)
    out = np.zeros((int(indptr[-1]), m))
    flags = np.zeros(len(indptr) - 1, dtype=np.int8)
    sizes = np.diff(indptr)
    for n in np.unique(sizes):
        blocks = np.flatnonzero(sizes == n)
        if n == 0:
            flags[blocks] = 1
            continue
        idx = indptr[blocks][:, None] + np.arange(n)[None, :]
        mats = build_rows(xs[idx], ys[idx], kind, degree)  # (m, nb, n)
        mats = np.moveaxis(mats, 0, 1)  # (nb, m, n)
        u, s, vt = np.linalg.svd(mats, full_matrices=False)
        cutoff = rcond * s[:, :1]
        keep = s > cutoff
        sinv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
        p = np.einsum("bkn,bk,bmk->bnm", vt, sinv, u)
        out[idx.ravel()] = p.reshape(-1, m)
        flags[blocks] = (keep.sum(axis=1) < m).astype(np.int8)
    return out, flags
