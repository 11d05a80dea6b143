"""Approximating normals, tangent frames and the tangential lifting of
neighborhoods (vertices and scalar values) into a vertex's tangent plane."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import TriMesh


class DegenerateStarError(ValueError):
    """The triangles around a vertex do not define a usable normal."""


@dataclass(frozen=True)
class LocalFrame:
    origin: int
    normal: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    def basis(self) -> np.ndarray:
        """Rows e1, e2, normal."""
        return np.stack([self.e1, self.e2, self.normal])


@dataclass(frozen=True)
class TangentPolygon:
    frame: LocalFrame
    neighbor_ids: np.ndarray
    coords: np.ndarray
    heights: np.ndarray
    lifted_values: np.ndarray | None = None
    center_value: float | None = None

    @property
    def x(self) -> np.ndarray:
        return self.coords[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.coords[:, 1]


def face_normals(mesh: TriMesh) -> np.ndarray:
    v, t = mesh.vertices, mesh.triangles
    n = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
    length = np.linalg.norm(n, axis=1)
    bad = length == 0
    length[bad] = 1.0
    n = n / length[:, None]
    n[bad] = 0.0
    return n


def _star_normal(mesh, v):
    tris = mesh.vertex_triangles(v)
    if len(tris) == 0:
        raise DegenerateStarError(f"vertex {v} has no incident triangle")
    p = mesh.vertices[v]
    corners = mesh.vertices[mesh.triangles[tris]]
    g = corners.mean(axis=1)
    d2 = np.einsum("ij,ij->i", g - p, g - p)
    if np.any(d2 == 0):
        raise DegenerateStarError(f"vertex {v}: triangle centroid coincides with the vertex")
    w = 1.0 / d2
    w /= w.sum()
    normals = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    length = np.linalg.norm(normals, axis=1)
    if np.any(length == 0):
        raise DegenerateStarError(f"vertex {v}: zero-area incident triangle")
    normals = normals / length[:, None]
    # align signs against the first incident face
    sign = np.where(normals @ normals[0] < 0, -1.0, 1.0)
    normals = normals * sign[:, None]
    if len(normals) > 1 and np.min(normals @ normals.T) <= 0:
        raise DegenerateStarError(f"vertex {v}: incident face normals span more than a hemisphere")
    s = w @ normals
    length = np.linalg.norm(s)
    if length < 1e-14:
        raise DegenerateStarError(f"vertex {v}: weighted normal vanishes")
    return s / length


def vertex_normal(mesh: TriMesh, v: int) -> np.ndarray:
    """Centroid-weighted approximating unit normal at vertex `v`.

    Face weights are proportional to ``1 / |G_T - v|**2`` with ``G_T`` the
    triangle centroid. Face normals are sign-aligned with the first incident
    face before summing.
    """
    return _star_normal(mesh, v)


def vertex_normals(mesh: TriMesh, vertices=None) -> np.ndarray:
    """:func:`vertex_normal` for each of `vertices` (default: all), shape (k, 3).

    Vectorized over stars of equal size; on any degenerate star the scalar
    routine is rerun there to raise its diagnostic.
    """
    verts = np.arange(mesh.n_vertices) if vertices is None else np.asarray(vertices, dtype=np.int64).ravel()
    ptr, idx = mesh._vf_ptr, mesh._vf_idx
    sizes = ptr[verts + 1] - ptr[verts]
    out = np.zeros((len(verts), 3))
    pts, tris = mesh.vertices, mesh.triangles
    for s in np.unique(sizes):
        sel = np.flatnonzero(sizes == s)
        if s == 0:
            _star_normal(mesh, int(verts[sel[0]]))
        star = idx[ptr[verts[sel]][:, None] + np.arange(s)[None, :]]  # (nb, s)
        corners = pts[tris[star]]  # (nb, s, 3, 3)
        g = corners.mean(axis=2) - pts[verts[sel]][:, None, :]
        d2 = np.einsum("bsi,bsi->bs", g, g)
        n = np.cross(corners[:, :, 1] - corners[:, :, 0], corners[:, :, 2] - corners[:, :, 0])
        length = np.linalg.norm(n, axis=2)
        bad = (d2 == 0).any(axis=1) | (length == 0).any(axis=1)
        n = n / np.where(length > 0, length, 1.0)[:, :, None]
        ref = n[:, :1, :]
        n = n * np.where(np.einsum("bsi,bti->bs", n, ref) < 0, -1.0, 1.0)[:, :, None]
        if s > 1:
            bad |= np.einsum("bsi,bti->bst", n, n).min(axis=(1, 2)) <= 0
        w = 1.0 / np.where(d2 > 0, d2, 1.0)
        w /= w.sum(axis=1, keepdims=True)
        res = np.einsum("bs,bsi->bi", w, n)
        rl = np.linalg.norm(res, axis=1)
        bad |= rl < 1e-14
        if bad.any():
            _star_normal(mesh, int(verts[sel[np.argmax(bad)]]))
        out[sel] = res / rl[:, None]
    return out


def frame_from_normal(normal, origin: int = -1) -> LocalFrame:
    n = np.asarray(normal, dtype=float)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(n)))] = 1.0
    e1 = axis - (axis @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return LocalFrame(origin, n, e1, e2)


def frames_from_normals(normals: np.ndarray) -> np.ndarray:
    """Vectorized :func:`frame_from_normal`; returns (n, 3, 3) rows e1, e2, normal."""
    n = np.asarray(normals, dtype=float)
    axis = np.zeros_like(n)
    axis[np.arange(len(n)), np.argmin(np.abs(n), axis=1)] = 1.0
    e1 = axis - np.einsum("ij,ij->i", axis, n)[:, None] * n
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(n, e1)
    return np.stack([e1, e2, n], axis=1)


def tangent_frame(mesh: TriMesh, v: int) -> LocalFrame:
    """Orthonormal frame at `v`: e1 is the global axis least aligned with the
    normal, projected into the tangent plane; ``e2 = normal x e1``."""
    return frame_from_normal(vertex_normal(mesh, v), v)


def lift_neighborhood(mesh: TriMesh, frame: LocalFrame, neighbors, field=None) -> TangentPolygon:
    """Project ``v_i - v`` into the tangent plane of `frame`.

    Returns the in-plane coordinates ``(x_i, y_i)`` together with the heights
    ``<v_i - v, N>``. When `field` is given its neighbor values are copied
    as the lifted values and its value at the origin as the center value.
    """
    ids = np.asarray(neighbors, dtype=np.int64)
    if ids.size == 0:
        raise ValueError("neighbors must be nonempty")
    if np.any(ids == frame.origin):
        raise ValueError("neighbors must exclude the origin vertex")
    d = mesh.vertices[ids] - mesh.vertices[frame.origin]
    local = d @ frame.basis().T
    values = center = None
    if field is not None:
        field = np.asarray(field, dtype=float)
        if len(field) != mesh.n_vertices:
            raise ValueError("field length does not match the mesh")
        values = field[ids].copy()
        center = float(field[frame.origin])
    return TangentPolygon(frame, ids, local[:, :2].copy(), local[:, 2].copy(), values, center)
