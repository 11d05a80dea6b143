"""Global sparse operators assembled from per-vertex stencils, their action on
vertex fields, MatrixMarket export and diffusion time stepping.

Scalar fields are plain float arrays indexed by vertex (or by reduced index
for operators with Dirichlet reduction).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .highorder import height_coefficients, laplacian_functional
from .mesh import NeighborhoodSpec, TriMesh
from .patches import PatchSet, build_patches
from .stencil import monomial_exponents

BOUNDARY_MODES = ("none", "dirichlet_zero")


class DivergenceError(RuntimeError):
    """Time stepping blew up (norm grew beyond the divergence threshold)."""


@dataclass
class SparseOperator:
    """Row-compressed operator on vertex fields.

    Attributes
    ----------
    matrix : scipy.sparse.csr_matrix
        Square matrix with column indices sorted ascending within each row.
    ring : ndarray
        Ring numerator actually used for each row's neighborhood.
    residual : ndarray
        Moment residual of each row's stencil.
    normalizer : ndarray
        Row scale ``omega_i`` (1 for jet operators).
    boundary_mode : str
        ``"none"`` or ``"dirichlet_zero"``.
    index_map : ndarray
        Mesh vertex id of each row (identity without reduction).
    """

    matrix: sp.csr_matrix
    ring: np.ndarray
    residual: np.ndarray
    normalizer: np.ndarray
    boundary_mode: str = "none"
    index_map: np.ndarray = field(default=None)
    kind: str = "laplacian"

    def __post_init__(self):
        if self.index_map is None:
            self.index_map = np.arange(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, u):
        return apply_operator(self, u)


def _check_mode(mode):
    if mode not in BOUNDARY_MODES:
        raise ValueError(f"boundary_mode must be one of {BOUNDARY_MODES}, got {mode!r}")


def _patches(mesh, spec, degree, boundary_mode, backend):
    _check_mode(boundary_mode)
    if boundary_mode == "dirichlet_zero":
        rows = np.flatnonzero(~mesh.boundary_flags)
        if len(rows) == 0:
            raise ValueError("no interior vertices to keep")
    else:
        rows = None
    return build_patches(mesh, spec, degree=degree, vertices=rows, backend=backend)


def _finish(mesh, ps: PatchSet, off, diag, normalizer, boundary_mode, kind):
    """Build the CSR matrix from per-point off-diagonal values and diagonals."""
    n = mesh.n_vertices
    own = ps.vertices[ps.owner]
    rows = np.concatenate([own, ps.vertices])
    cols = np.concatenate([ps.neighbors, ps.vertices])
    vals = np.concatenate([off, diag])
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    keep = ps.vertices
    if boundary_mode == "dirichlet_zero":
        mat = mat[keep][:, keep].tocsr()
    mat.sort_indices()
    return SparseOperator(mat, ps.ring.copy(), ps.residual.copy(), np.asarray(normalizer, dtype=float),
                          boundary_mode, keep.copy(), kind)


def assemble_laplacian(mesh: TriMesh, spec: NeighborhoodSpec | None = None, boundary_mode: str = "none",
                       backend: str | None = None) -> SparseOperator:
    """First-order Laplace-Beltrami operator ``W A``.

    Row ``i`` holds ``omega_i * alpha_ij`` at each neighbor, with
    ``omega_i = 2 / sum_j alpha_ij x_ij**2``. The diagonal is
    ``-omega_i sum_j alpha_ij``, which equals ``-omega_i`` because the
    weights sum to one, and keeps row sums at rounding level.
    """
    ps = _patches(mesh, spec, None, boundary_mode, backend)
    alpha, own = ps.pinv[:, 4], ps.owner
    omega = 2.0 / np.bincount(own, alpha * ps.coords[:, 0] ** 2, minlength=len(ps.vertices))
    off = omega[own] * alpha
    diag = -np.bincount(own, off, minlength=len(ps.vertices))
    return _finish(mesh, ps, off, diag, omega, boundary_mode, "laplacian")


def assemble_weighted_divgrad(mesh: TriMesh, h, spec: NeighborhoodSpec | None = None,
                              boundary_mode: str = "none", backend: str | None = None) -> SparseOperator:
    """Operator ``phi -> div(h grad phi)``.

    Row ``i`` realizes ``omega'_i sum_j beta_ij (phi_j - phi_i)(h_j + h_i)``
    with ``omega'_i = 1 / sum_j beta_ij x_ij**2``.
    """
    h = np.asarray(h, dtype=float)
    if h.shape != (mesh.n_vertices,):
        raise ValueError("h length does not match the mesh")
    ps = _patches(mesh, spec, None, boundary_mode, backend)
    beta, own = ps.pinv[:, 4], ps.owner
    omega = 1.0 / np.bincount(own, beta * ps.coords[:, 0] ** 2, minlength=len(ps.vertices))
    off = omega[own] * beta * (h[ps.neighbors] + h[ps.vertices[own]])
    diag = -np.bincount(own, off, minlength=len(ps.vertices))
    return _finish(mesh, ps, off, diag, omega, boundary_mode, "weighted_divgrad")


def assemble_jet_laplacian(mesh: TriMesh, degree: int, spec: NeighborhoodSpec | None = None,
                           boundary_mode: str = "none", backend: str | None = None) -> SparseOperator:
    """High-order Laplace-Beltrami operator from degree-`degree` jet fits.

    Each row applies the graph-surface Laplacian, with the height fit's
    metric, to the jet coefficients of the field, which are linear in the
    neighbor differences ``phi_j - phi_i``.
    """
    if degree < 2:
        raise ValueError("the jet Laplacian needs degree at least 2")
    ps = _patches(mesh, spec, degree, boundary_mode, backend)
    c = laplacian_functional(height_coefficients(ps), degree)
    order = np.array([a + b for a, b in monomial_exponents(degree)], dtype=float)
    c = c / ps.radius[:, None] ** order[None, :]
    own = ps.owner
    off = np.einsum("pi,pi->p", ps.pinv, c[own])
    diag = -np.bincount(own, off, minlength=len(ps.vertices))
    return _finish(mesh, ps, off, diag, np.ones(len(ps.vertices)), boundary_mode, f"jet_laplacian_{degree}")


def apply_operator(op: SparseOperator, u) -> np.ndarray:
    """Sparse matrix-vector product ``op @ u`` (entries visited in ascending column)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (op.dim,):
        raise ValueError(f"field has shape {u.shape}, operator expects ({op.dim},)")
    return op.matrix @ u


def restrict(op: SparseOperator, field) -> np.ndarray:
    """Restrict a per-vertex field to the operator's rows."""
    return np.asarray(field, dtype=float)[op.index_map]


# ---------------------------------------------------------------- diffusion


def diffusion_solve(op: SparseOperator, u0, f=None, dt: float = 1e-3, steps: int = 1,
                    scheme: str = "implicit", return_history: bool = False, blowup: float = 1e6):
    """Time-step ``u_t = op u + f``.

    Parameters
    ----------
    scheme : {'explicit', 'implicit'}
        Forward Euler, or backward Euler solved with a sparse LU factorization.
    return_history : bool
        Also return the (steps + 1, n) array of states.
    blowup : float
        Abort with :class:`DivergenceError` once the max norm exceeds
        `blowup` times the initial scale.
    """
    u = np.array(u0, dtype=float)
    n = op.dim
    if u.shape != (n,):
        raise ValueError(f"u0 has shape {u.shape}, operator expects ({n},)")
    f = np.zeros(n) if f is None else np.asarray(f, dtype=float)
    if f.shape != (n,):
        raise ValueError(f"f has shape {f.shape}, operator expects ({n},)")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if int(steps) != steps or steps < 1:
        raise ValueError("steps must be a positive integer")
    if scheme not in ("explicit", "implicit"):
        raise ValueError(f"unknown scheme {scheme!r}")
    scale = max(np.abs(u).max(initial=0.0), dt * steps * np.abs(f).max(initial=0.0))
    limit = blowup * scale if scale > 0 else np.inf
    history = [u.copy()] if return_history else None
    if scheme == "implicit":
        system = (sp.identity(n, format="csc") - dt * op.matrix.tocsc()).tocsc()
        lu = spla.splu(system)
    for step in range(int(steps)):
        if scheme == "explicit":
            u = u + dt * (op.matrix @ u + f)
        else:
            rhs = u + dt * f
            nxt = lu.solve(rhs)
            res = rhs - system @ nxt
            if np.abs(res).max(initial=0.0) > 1e-10 * max(np.abs(rhs).max(initial=0.0), 1e-300):
                nxt = nxt + lu.solve(res)
            u = nxt
        peak = np.abs(u).max(initial=0.0)
        if not np.isfinite(peak) or peak > limit:
            raise DivergenceError(f"{scheme} diffusion diverged at step {step + 1} (max |u| = {peak:.3g})")
        if history is not None:
            history.append(u.copy())
    if return_history:
        return u, np.array(history)
    return u


def stability_bound(op: SparseOperator) -> float:
    """Forward Euler step bound ``2 / max |diagonal|``."""
    d = np.abs(op.matrix.diagonal()).max(initial=0.0)
    return np.inf if d == 0 else 2.0 / d


# ----------------------------------------------------------------------- I/O


def write_operator(op: SparseOperator, target) -> None:
    """MatrixMarket coordinate export; metadata goes in a JSON comment line."""
    meta = {"boundary_mode": op.boundary_mode, "kind": op.kind, "index_map": op.index_map.tolist()}
    scipy.io.mmwrite(str(target) if isinstance(target, Path) else target, op.matrix.tocoo(),
                     comment="ltlsurf " + json.dumps(meta, separators=(",", ":")), precision=17)


def read_operator(source) -> SparseOperator:
    """Read an operator written by :func:`write_operator` (or any square MatrixMarket matrix)."""
    path = Path(source)
    if path.suffix == "" and not path.exists():
        path = path.with_suffix(".mtx")
    mat = sp.csr_matrix(scipy.io.mmread(str(path)))
    if mat.shape[0] != mat.shape[1]:
        raise ValueError("operator matrix must be square")
    mat.sort_indices()
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("%"):
                break
            text = line.lstrip("%").strip()
            if text.startswith("ltlsurf "):
                meta = json.loads(text[len("ltlsurf "):])
    n = mat.shape[0]
    index_map = np.asarray(meta.get("index_map", np.arange(n)), dtype=np.int64)
    return SparseOperator(mat, np.zeros(n, np.int64), np.zeros(n), np.ones(n),
                          meta.get("boundary_mode", "none"), index_map, meta.get("kind", "laplacian"))
