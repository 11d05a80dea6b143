"""Batched construction of lifted vertex patches.

A patch is a vertex's neighborhood lifted into its tangent frame, together
with the scaled pseudo-inverse of its configuration matrix. Vertices whose
system is unacceptable are retried with the next half-ring, up to
``MAX_RING``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .lifting import frames_from_normals, vertex_normals
from .mesh import NeighborhoodSpec, TriMesh, _neighborhood
from .stencil import ACCEPT_RESIDUAL, LAPLACE_TARGET, StencilError, batch_pinv, n_coefficients

MAX_RING = 8


def max_condition(degree: int) -> float:
    """Largest accepted Frobenius condition number of a scaled degree-k system.

    Well-spread patches sit near ``10**(degree - 1)``; lattice subsets that
    nearly lie on a few lines exceed this bound by orders of magnitude.
    """
    return 10.0 ** (degree + 2)


@dataclass
class PatchSet:
    """Lifted patches of `vertices`, stored flat (CSR style).

    ``indptr[b]:indptr[b+1]`` indexes the points of ``vertices[b]`` in
    `neighbors`, `coords`, `heights` and `pinv`. ``pinv`` is the
    pseudo-inverse of the configuration matrix in coordinates divided by
    ``radius[b]``.
    """

    vertices: np.ndarray
    indptr: np.ndarray
    neighbors: np.ndarray
    coords: np.ndarray
    heights: np.ndarray
    frames: np.ndarray
    pinv: np.ndarray
    radius: np.ndarray
    ring: np.ndarray
    residual: np.ndarray
    degree: int | None
    condition: np.ndarray | None = None

    @property
    def owner(self) -> np.ndarray:
        """Block index of every flat point."""
        return np.repeat(np.arange(len(self.vertices)), np.diff(self.indptr))

    def block(self, b: int) -> slice:
        return slice(int(self.indptr[b]), int(self.indptr[b + 1]))


def _lift(mesh, frames, verts, ids):
    sizes = np.array([len(a) for a in ids], dtype=np.int64)
    indptr = np.concatenate([[0], np.cumsum(sizes)])
    nbr = np.concatenate(ids) if len(ids) else np.zeros(0, np.int64)
    block = np.repeat(np.arange(len(verts)), sizes)
    d = mesh.vertices[nbr] - mesh.vertices[verts[block]]
    local = np.einsum("ij,irj->ir", d, frames[block])
    return indptr, nbr, local


def _first_order_residual(indptr, cs, p):
    rows = _backend._pykernels.build_rows(cs[:, 0], cs[:, 1], _backend.FIRST_ORDER, 0)
    alpha = p[:, 4]
    starts = indptr[:-1]
    nonempty = np.diff(indptr) > 0
    res = np.full(len(starts), np.inf)
    sums = np.add.reduceat(rows * alpha, starts[nonempty], axis=1) if nonempty.any() else np.zeros((5, 0))
    res[nonempty] = np.abs(sums - LAPLACE_TARGET[:, None]).max(axis=0)
    norm = np.full(len(starts), 0.0)
    if nonempty.any():
        norm[nonempty] = np.add.reduceat(alpha * cs[:, 0] ** 2, starts[nonempty])
    return res, norm


def _moment_residual(indptr, cs, p, degree):
    """Max entry of ``|M P - I|`` and ``|M|_F |P|_F`` per block."""
    m = p.shape[1]
    rows = _backend._pykernels.build_rows(cs[:, 0], cs[:, 1], _backend.MONOMIAL, degree)
    sizes = np.diff(indptr)
    res = np.full(len(sizes), np.inf)
    cond = np.full(len(sizes), np.inf)
    eye = np.eye(m)
    for n in np.unique(sizes):
        if n == 0:
            continue
        blocks = np.flatnonzero(sizes == n)
        idx = indptr[blocks][:, None] + np.arange(n)[None, :]
        mb = np.moveaxis(rows[:, idx], 0, 1)  # (nb, m, n)
        pb = p[idx]
        res[blocks] = np.abs(mb @ pb - eye).max(axis=(1, 2))
        cond[blocks] = np.sqrt((mb * mb).sum(axis=(1, 2)) * (pb * pb).sum(axis=(1, 2)))
    return res, cond


def build_patches(mesh: TriMesh, spec: NeighborhoodSpec | None = None, degree: int | None = None,
                  vertices=None, backend: str | None = None, max_ring: int = MAX_RING) -> PatchSet:
    """Lift and solve the configuration system at each of `vertices`.

    Parameters
    ----------
    degree : int or None
        None for the first-order Laplacian system; otherwise the degree of
        the local polynomial (jet) fit, which must be full rank.
    vertices : sequence of int, optional
        Defaults to every vertex.
    """
    spec = spec or NeighborhoodSpec()
    if degree is not None:
        if degree < 1:
            raise ValueError("degree must be at least 1")
        spec = NeighborhoodSpec(spec.ring_numerator, max(spec.min_count, n_coefficients(degree)))
    verts = np.arange(mesh.n_vertices) if vertices is None else np.asarray(vertices, dtype=np.int64)
    frames = frames_from_normals(vertex_normals(mesh, verts))
    nb = len(verts)
    ring_req = np.full(nb, spec.ring_numerator, dtype=np.int64)
    ring_used = np.zeros(nb, dtype=np.int64)
    cond_limit = np.inf if degree is None else max_condition(degree)
    ids = [None] * nb
    store = {}
    todo = np.arange(nb)
    while len(todo):
        for b in todo:
            ids[b], ring_used[b] = _neighborhood(mesh, int(verts[b]), NeighborhoodSpec(int(ring_req[b]), spec.min_count))
        indptr, nbr, local = _lift(mesh, frames[todo], verts[todo], [ids[b] for b in todo])
        p, radius, flags, cs = batch_pinv(indptr, local[:, :2], degree, backend=backend)
        if degree is None:
            res, norm = _first_order_residual(indptr, cs, p)
            cond = np.full(len(res), np.nan)
            ok = (res <= ACCEPT_RESIDUAL) & (np.abs(norm) >= 1e-12)
        else:
            res, cond = _moment_residual(indptr, cs, p, degree)
            ok = (res <= ACCEPT_RESIDUAL) & (cond <= cond_limit)
        ok &= radius > 0
        failed = []
        for k, b in enumerate(todo):
            sl = slice(indptr[k], indptr[k + 1])
            if ok[k]:
                store[b] = (nbr[sl], local[sl], p[sl], radius[k], res[k], cond[k])
            else:
                if ring_used[b] + 1 > max_ring:
                    raise StencilError(
                        f"vertex {int(verts[b])}: no acceptable stencil up to ring {max_ring}/2 "
                        f"(residual {res[k]:.3g}, condition {cond[k]:.3g})")
                ring_req[b] = ring_used[b] + 1
                failed.append(b)
        todo = np.array(failed, dtype=np.int64)
    parts = [store[b] for b in range(nb)]
    sizes = np.array([len(s[0]) for s in parts], dtype=np.int64)
    indptr = np.concatenate([[0], np.cumsum(sizes)])
    m = 5 if degree is None else n_coefficients(degree)
    local = np.concatenate([s[1] for s in parts]) if nb else np.zeros((0, 3))
    return PatchSet(
        vertices=verts,
        indptr=indptr,
        neighbors=np.concatenate([s[0] for s in parts]) if nb else np.zeros(0, np.int64),
        coords=local[:, :2].copy(),
        heights=local[:, 2].copy(),
        frames=frames,
        pinv=np.concatenate([s[2] for s in parts]) if nb else np.zeros((0, m)),
        radius=np.array([s[3] for s in parts]),
        ring=ring_used,
        residual=np.array([s[4] for s in parts]),
        degree=degree,
        condition=np.array([s[5] for s in parts]),
    )
