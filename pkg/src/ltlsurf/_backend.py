"""Kernel backend selection.

The compiled extension is used when it imports, unless the environment sets
``LTLSURF_BACKEND=python``. Blocks the compiled kernel flags as rank
deficient are recomputed here with the SVD path, so both backends return the
same pseudo-inverses up to rounding.
"""

import os

import numpy as np

from . import _pykernels

FIRST_ORDER = _pykernels.FIRST_ORDER
MONOMIAL = _pykernels.MONOMIAL

_compiled = None
if os.environ.get("LTLSURF_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def available_backends():
    return ["compiled", "python"] if _compiled is not None else ["python"]


def config_pinv(indptr, xs, ys, kind, degree, backend=None):
    """Per-block pseudo-inverses; see :func:`_pykernels.config_pinv`."""
    backend = backend or BACKEND
    indptr = np.asarray(indptr, dtype=np.int64)
    xs = np.ascontiguousarray(xs, dtype=float)
    ys = np.ascontiguousarray(ys, dtype=float)
    if backend == "python":
        return _pykernels.config_pinv(indptr, xs, ys, kind, degree)
    if backend != "compiled" or _compiled is None:
        raise ValueError(f"backend {backend!r} is not available")
    out, flags = _compiled.config_pinv(indptr, xs, ys, kind, degree)
    redo = np.flatnonzero(flags)
    if len(redo):
        sub_sizes = indptr[redo + 1] - indptr[redo]
        sub_ptr = np.concatenate([[0], np.cumsum(sub_sizes)])
        pos = np.concatenate([np.arange(indptr[b], indptr[b + 1]) for b in redo])
        p, f = _pykernels.config_pinv(sub_ptr, xs[pos], ys[pos], kind, degree)
        out[pos] = p
        flags[redo] = f
    return out, flags
