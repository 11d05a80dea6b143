"""Triangle meshes: representation, OFF/OBJ I/O, analytic test surfaces and
ring neighborhoods."""

from __future__ import annotations

import io
import math
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for malformed or unsupported mesh input."""


class TriMesh:
    """Immutable indexed triangle mesh with vertex adjacency.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
        Vertex coordinates.
    triangles : array_like, shape (m, 3)
        Vertex indices of each triangle.

    Attributes
    ----------
    vertices : ndarray
        Read-only float array of shape (n, 3).
    triangles : ndarray
        Read-only int array of shape (m, 3).
    boundary_flags : ndarray
        Boolean array, True for vertices on an edge with one incident triangle.
    """

    def __init__(self, vertices, triangles):
        v = np.array(vertices, dtype=float)
        t = np.array(triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError("vertices must have shape (n, 3)")
        if t.size == 0:
            t = t.reshape(0, 3)
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must have shape (m, 3)")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        degenerate = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
        if np.any(degenerate):
            raise MeshError(f"degenerate triangle at index {int(np.flatnonzero(degenerate)[0])}")
        v.flags.writeable = False
        t.flags.writeable = False
        self.vertices = v
        self.triangles = t
        self._build_adjacency()

    def _build_adjacency(self):
        n = len(self.vertices)
        t = self.triangles
        half = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        und = np.sort(half, axis=1)
        edges, counts = np.unique(und, axis=0, return_counts=True) if len(und) else (
            np.zeros((0, 2), np.int64), np.zeros(0, np.int64))
        if np.any(counts > 2):
            a, b = edges[np.argmax(counts > 2)]
            raise MeshError(f"non-manifold edge ({a}, {b}) has more than two incident triangles")
        self.edges = edges
        self.edges.flags.writeable = False
        boundary = np.zeros(n, dtype=bool)
        boundary[edges[counts == 1].ravel()] = True
        boundary.flags.writeable = False
        self.boundary_flags = boundary

        # vertex -> vertex, both directions, sorted ascending within each row
        both = np.concatenate([edges, edges[:, ::-1]])
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        self._nbr_ptr = np.searchsorted(both[:, 0], np.arange(n + 1))
        self._nbr_idx = both[:, 1].copy()
        # vertex -> incident triangles
        owner = t.ravel()
        tri_ids = np.repeat(np.arange(len(t)), 3)
        order = np.argsort(owner, kind="stable")
        self._vf_ptr = np.searchsorted(owner[order], np.arange(n + 1))
        self._vf_idx = tri_ids[order]
        self._nbr_lists = None
        self._tri_lists = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def neighbors(self, v: int) -> np.ndarray:
        """One-ring vertex indices of `v`, ascending."""
        return self._nbr_idx[self._nbr_ptr[v]:self._nbr_ptr[v + 1]]

    def vertex_triangles(self, v: int) -> np.ndarray:
        """Indices of the triangles incident to `v`."""
        return self._vf_idx[self._vf_ptr[v]:self._vf_ptr[v + 1]]

    def adjacency_csr(self):
        """Return ``(indptr, indices)`` of the vertex one-ring adjacency."""
        return self._nbr_ptr, self._nbr_idx

    def neighbor_lists(self) -> list[list[int]]:
        if self._nbr_lists is None:
            p, idx = self._nbr_ptr, self._nbr_idx.tolist()
            self._nbr_lists = [idx[p[i]:p[i + 1]] for i in range(self.n_vertices)]
        return self._nbr_lists

    def triangle_lists(self):
        """Cached ``(triangles, vertex_triangles)`` as nested Python lists."""
        if self._tri_lists is None:
            p, idx = self._vf_ptr, self._vf_idx.tolist()
            self._tri_lists = (self.triangles.tolist(), [idx[p[i]:p[i + 1]] for i in range(self.n_vertices)])
        return self._tri_lists

    def is_closed(self) -> bool:
        return not self.boundary_flags.any()

    def __repr__(self):
        return f"TriMesh(n_vertices={self.n_vertices}, n_triangles={self.n_triangles})"


# --------------------------------------------------------------------------- I/O


def _tokens(text: str):
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


def _read_off(text: str) -> TriMesh:
    lines = list(_tokens(text))
    if not lines or not lines[0].startswith("OFF"):
        raise MeshError("missing OFF header")
    head = lines[0][3:].split()
    rest = lines[1:]
    if not head:
        if not rest:
            raise MeshError("missing OFF counts line")
        head, rest = rest[0].split(), rest[1:]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (ValueError, IndexError) as exc:
        raise MeshError("malformed OFF counts line") from exc
    if len(rest) < nv + nf:
        raise MeshError("OFF file truncated")
    try:
        verts = [[float(s) for s in rest[i].split()[:3]] for i in range(nv)]
        faces = []
        for line in rest[nv:nv + nf]:
            parts = [int(s) for s in line.split()]
            k = parts[0]
            if k < 3 or len(parts) < k + 1:
                raise MeshError(f"malformed OFF face line: {line!r}")
            faces.extend(_fan(parts[1:k + 1]))
    except ValueError as exc:
        raise MeshError(f"malformed OFF data: {exc}") from exc
    if any(len(p) != 3 for p in verts):
        raise MeshError("OFF vertex line with fewer than 3 coordinates")
    return TriMesh(np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))


def _fan(poly):
    return [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]


def _read_obj(text: str) -> TriMesh:
    verts, faces = [], []
    for line in _tokens(text):
        parts = line.split()
        try:
            if parts[0] == "v":
                verts.append([float(s) for s in parts[1:4]])
                if len(verts[-1]) != 3:
                    raise MeshError(f"malformed OBJ vertex: {line!r}")
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                if len(idx) < 3:
                    raise MeshError(f"OBJ face with fewer than 3 vertices: {line!r}")
                faces.extend(_fan(idx))
        except ValueError as exc:
            raise MeshError(f"malformed OBJ line {line!r}") from exc
    return TriMesh(np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))


def load_mesh(source, format: str | None = None) -> TriMesh:
    """Read an ASCII OFF or OBJ mesh.

    `source` may be a path, a text/byte stream, or ``bytes``. Polygons are
    fan-triangulated. The format is inferred from the file suffix when not
    given.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if format is None:
            format = path.suffix.lstrip(".")
        data = path.read_text()
    elif isinstance(source, bytes):
        data = source.decode()
    else:
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode()
    fmt = (format or "").lower()
    if fmt == "off":
        return _read_off(data)
    if fmt == "obj":
        return _read_obj(data)
    raise MeshError(f"unsupported mesh format {format!r}")


def write_off(mesh: TriMesh, target=None) -> str:
    """Serialize `mesh` as OFF; write to `target` (path or stream) if given."""
    buf = io.StringIO()
    buf.write("OFF\n")
    buf.write(f"{mesh.n_vertices} {mesh.n_triangles} 0\n")
    for x, y, z in mesh.vertices.tolist():
        buf.write(f"{x!r} {y!r} {z!r}\n")
    for a, b, c in mesh.triangles.tolist():
        buf.write(f"3 {a} {b} {c}\n")
    text = buf.getvalue()
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    elif target is not None:
        target.write(text)
    return text


# ----------------------------------------------------------------- measurements


def mesh_size(mesh: TriMesh) -> float:
    """Maximum Euclidean edge length."""
    if len(mesh.edges) == 0:
        raise MeshError("mesh has no edges")
    e = mesh.edges
    return float(np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1).max())


def boundary_vertices(mesh: TriMesh) -> set[int]:
    return set(np.flatnonzero(mesh.boundary_flags).tolist())


# -------------------------------------------------------------------- neighbors


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Request for the ``j/2``-ring of a vertex, grown until `min_count`."""

    ring_numerator: int = 2
    min_count: int = 5

    def __post_init__(self):
        if self.ring_numerator < 1:
            raise ValueError("ring_numerator must be a positive integer")
        if self.min_count < 1:
            raise ValueError("min_count must be a positive integer")


def _ring_levels(mesh: TriMesh, v: int, j: int):
    """Yield (ring_numerator, dist) for successive half-rings starting at `j`.

    `dist` maps vertex -> graph distance for every collected vertex."""
    nbrs = mesh.neighbor_lists()
    tris, vtris = mesh.triangle_lists()
    dist = {v: 0}
    shells = [[v]]

    def grow():
        k = len(shells) - 1
        nxt = sorted({w for a in shells[k] for w in nbrs[a] if w not in dist})
        for w in nxt:
            dist[w] = k + 1
        shells.append(nxt)

    jj = max(j, 1)
    while True:
        k_full = jj // 2
        while len(shells) - 1 < k_full + 1:
            grow()
            if not shells[-1]:
                break
        members = {w: d for w, d in dist.items() if 0 < d <= k_full}
        if jj % 2 == 1:
            k = k_full
            if k == 0:
                members = {w: 1 for w in nbrs[v]}
            elif len(shells) > k + 1:
                for w in shells[k + 1]:
                    for t in vtris[w]:
                        a, b, c = tris[t]
                        if (dist.get(a, -1) == k) + (dist.get(b, -1) == k) + (dist.get(c, -1) == k) == 2:
                            members[w] = k + 1
                            break
        exhausted = len(shells) <= k_full + 1 or not shells[k_full + 1]
        yield jj, members, exhausted
        jj += 1


def neighborhood(mesh: TriMesh, v: int, spec: NeighborhoodSpec | None = None) -> np.ndarray:
    """Ordered ``j/2``-ring of `v` (excluding `v`).

    Even ``j`` gives every vertex within graph distance ``j/2``. Odd ``j``
    extends the ``(j-1)/2``-ring by the far vertex of each triangle sharing
    an edge with the outer shell of that ring. The set grows half a ring at
    a time until it holds ``spec.min_count`` vertices. Order: graph distance,
    then Euclidean distance, then index.
    """
    return _neighborhood(mesh, v, spec or NeighborhoodSpec())[0]


def _neighborhood(mesh: TriMesh, v: int, spec: NeighborhoodSpec):
    if not 0 <= v < mesh.n_vertices:
        raise IndexError(f"vertex {v} out of range")
    for jj, members, exhausted in _ring_levels(mesh, v, spec.ring_numerator):
        if len(members) >= spec.min_count:
            break
        if exhausted and jj % 2 == 0:
            raise MeshError(
                f"vertex {v}: only {len(members)} reachable neighbors, need {spec.min_count}")
    ids = np.fromiter(members.keys(), dtype=np.int64, count=len(members))
    d = np.fromiter(members.values(), dtype=np.int64, count=len(members))
    eu = np.linalg.norm(mesh.vertices[ids] - mesh.vertices[v], axis=1)
    order = np.lexsort((ids, eu, d))
    return ids[order], jj


# ------------------------------------------------------------------- generators


def _icosahedron():
    t = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]], dtype=np.int64)
    return v / np.linalg.norm(v, axis=1)[:, None], f


def _octahedron():
    v = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    f = np.array([
        [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
        [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]], dtype=np.int64)
    return v, f


def _unit(p):
    return p / np.linalg.norm(p, axis=1)[:, None]


def _midpoint_split(v, f, project=None):
    half = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    edges, inv = np.unique(np.sort(half, axis=1), axis=0, return_inverse=True)
    inv = inv.ravel()
    mid = 0.5 * (v[edges[:, 0]] + v[edges[:, 1]])
    if project is not None:
        mid = project(mid)
    m = len(f)
    ab, bc, ca = (inv[:m] + len(v), inv[m:2 * m] + len(v), inv[2 * m:] + len(v))
    a, b, c = f[:, 0], f[:, 1], f[:, 2]
    nf = np.concatenate([
        np.stack([a, ab, ca], 1), np.stack([ab, b, bc], 1),
        np.stack([ca, bc, c], 1), np.stack([ab, bc, ca], 1)])
    return np.concatenate([v, mid]), nf


def subdivide(mesh: TriMesh, project=None) -> TriMesh:
    """One level of edge-midpoint (1-to-4) subdivision.

    `project` maps an (k, 3) array of new midpoints onto the target surface,
    e.g. :func:`numpy` normalisation for the unit sphere.
    """
    v, f = _midpoint_split(np.asarray(mesh.vertices), np.asarray(mesh.triangles), project)
    return TriMesh(v, f)


def _geodesic(base_v, base_f, n):
    """Class-I frequency-`n` subdivision of every base face (flat, unprojected)."""
    key, verts, faces = {}, [], []
    for a, b, c in base_f:
        ids = {}
        for i in range(n + 1):
            for j in range(n + 1 - i):
                w = {a: n - i - j, b: i, c: j}
                k = tuple(sorted((x, y) for x, y in w.items() if y > 0))
                if k not in key:
                    key[k] = len(verts)
                    verts.append(((n - i - j) * base_v[a] + i * base_v[b] + j * base_v[c]) / n)
                ids[i, j] = key[k]
        for i in range(n):
            for j in range(n - i):
                faces.append((ids[i, j], ids[i + 1, j], ids[i, j + 1]))
                if i + j < n - 1:
                    faces.append((ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1]))
    return np.array(verts), np.array(faces, dtype=np.int64)


def _edge_max(v, f):
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    return float(np.linalg.norm(v[e[:, 0]] - v[e[:, 1]], axis=1).max())


def _sphere_arrays(base, target, params):
    v0, f0 = base
    method = params.get("method", "subdivision")
    if method == "subdivision":
        levels = params.get("levels")
        v, f = v0, f0
        lev = 0
        while (levels is None and _edge_max(v, f) > 1.1 * target) or (levels is not None and lev < levels):
            v, f = _midpoint_split(v, f, _unit)
            lev += 1
        return v, f
    if method == "geodesic":
        n = params.get("frequency")
        if n is not None:
            v, f = _geodesic(v0, f0, int(n))
            return _unit(v), f
        n = 1
        while True:
            v, f = _geodesic(v0, f0, n)
            v = _unit(v)
            if _edge_max(v, f) <= 1.1 * target:
                return v, f
            n += 1
    raise MeshError(f"unknown sphere method {method!r}")


def _grid_faces(nu, nv, periodic_u, periodic_v):
    """Triangulate a (nu x nv) vertex grid, index = i * nv + j."""
    cu = nu if periodic_u else nu - 1
    cv = nv if periodic_v else nv - 1
    i, j = np.meshgrid(np.arange(cu), np.arange(cv), indexing="ij")
    i, j = i.ravel(), j.ravel()
    ip, jp = (i + 1) % nu, (j + 1) % nv
    p00, p10, p01, p11 = i * nv + j, ip * nv + j, i * nv + jp, ip * nv + jp
    return np.concatenate([np.stack([p00, p10, p11], 1), np.stack([p00, p11, p01], 1)])


def _signed_volume(v, f):
    return float(np.einsum("ij,ij->i", v[f[:, 0]], np.cross(v[f[:, 1]], v[f[:, 2]])).sum() / 6.0)


def torus_radii(params: Mapping) -> tuple[float, float]:
    """(center-circle radius, tube radius) from inner/outer axis distances."""
    inner = float(params.get("inner", 0.5))
    outer = float(params.get("outer", 1.0))
    if inner <= 0 or outer <= 0:
        raise MeshError("torus radii must be positive")
    if inner >= outer:
        raise MeshError("torus inner radius must be smaller than outer radius")
    return 0.5 * (inner + outer), 0.5 * (outer - inner)


def dumbbell_radius(v):
    """Polar radius of the dumbbell (a Cassini-oval surface of revolution)."""
    s = np.sin(2.0 * v)
    return np.sqrt(0.81 * np.cos(2.0 * v) + np.sqrt(1.0 - 0.9 ** 4 * s * s))


def _refine_grid(build, target, h0):
    h = h0
    while True:
        v, f = build(h)
        if _edge_max(v, f) <= 1.1 * target:
            return v, f
        h *= 0.97


def _torus(params, target):
    c, a = torus_radii(params)

    def build(h):
        nu = max(3, math.ceil(2 * math.pi * (c + a) / h))
        nv = max(3, math.ceil(2 * math.pi * a / h))
        u, w = np.meshgrid(np.arange(nu) * 2 * math.pi / nu, np.arange(nv) * 2 * math.pi / nv, indexing="ij")
        u, w = u.ravel(), w.ravel()
        rho = c + a * np.cos(w)
        v = np.stack([rho * np.cos(u), rho * np.sin(u), a * np.sin(w)], 1)
        return v, _grid_faces(nu, nv, True, True)

    return _refine_grid(build, target, 1.1 * target)


def _wave(params, target):
    extent = float(params.get("extent", 2 * math.pi))
    if extent <= 0:
        raise MeshError("wave extent must be positive")

    def build(h):
        n = max(2, math.ceil(extent / h))
        s = np.linspace(0.0, extent, n + 1)
        u, w = np.meshgrid(s, s, indexing="ij")
        u, w = u.ravel(), w.ravel()
        v = np.stack([u, w, np.sin(u) * np.cos(w)], 1)
        return v, _grid_faces(n + 1, n + 1, False, False)

    return _refine_grid(build, target, 1.1 * target)


def _dumbbell(params, target):
    def build(h):
        nu = max(3, math.ceil(2 * math.pi * 1.35 / h))
        nv = max(2, math.ceil(4.0 / h))
        uu = np.arange(nu) * 2 * math.pi / nu
        vv = np.arange(1, nv) * math.pi / nv
        u, w = np.meshgrid(uu, vv, indexing="ij")
        u, w = u.ravel(), w.ravel()
        r = dumbbell_radius(w)
        body = np.stack([r * np.sin(w) * np.cos(u), r * np.sin(w) * np.sin(u), r * np.cos(w)], 1)
        r0 = float(dumbbell_radius(np.array(0.0)))
        poles = np.array([[0.0, 0.0, r0], [0.0, 0.0, -r0]])
        v = np.concatenate([body, poles])
        m = nv - 1
        f = [_grid_faces(nu, m, True, False)] if m > 1 else []
        top, bot = len(body), len(body) + 1
        i = np.arange(nu)
        ip = (i + 1) % nu
        f.append(np.stack([np.full(nu, top), ip * m, i * m], 1))
        f.append(np.stack([np.full(nu, bot), i * m + m - 1, ip * m + m - 1], 1))
        return v, np.concatenate(f)

    return _refine_grid(build, target, 1.1 * target)


def generate_mesh(kind: str, params: Mapping | None = None, target_edge: float = 0.1) -> TriMesh:
    """Mesh one of the analytic test surfaces with edges at most ``1.1 * target_edge``.

    Parameters
    ----------
    kind : {'sphere', 'hemisphere', 'torus', 'dumbbell', 'wave'}
    params : mapping, optional
        ``sphere``/``hemisphere``: ``method`` ('subdivision' or 'geodesic'),
        optionally ``levels`` or ``frequency``. ``torus``: ``inner`` and
        ``outer`` axis distances (default 0.5 and 1). ``wave``: ``extent``
        of the square parameter domain (default 2*pi).
    target_edge : float
        Requested mesh size.
    """
    params = dict(params or {})
    if not target_edge > 0:
        raise MeshError("target_edge must be positive")
    if kind == "sphere":
        v, f = _sphere_arrays(_icosahedron(), target_edge, params)
    elif kind == "hemisphere":
        v, f = _sphere_arrays(_octahedron(), target_edge, params)
        v = v.copy()
        v[np.abs(v[:, 2]) < 1e-12, 2] = 0.0
        keep_f = np.all(v[f, 2] >= 0.0, axis=1)
        f = f[keep_f]
        used = np.unique(f)
        remap = np.full(len(v), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        v, f = v[used], remap[f]
    elif kind == "torus":
        v, f = _torus(params, target_edge)
    elif kind == "wave":
        v, f = _wave(params, target_edge)
    elif kind == "dumbbell":
        v, f = _dumbbell(params, target_edge)
    else:
        raise MeshError(f"unknown mesh kind {kind!r}")
    if kind in ("sphere", "torus", "dumbbell") and _signed_volume(v, f) < 0:
        f = f[:, ::-1].copy()
    if kind in ("hemisphere", "wave"):
        n0 = np.cross(v[f[0, 1]] - v[f[0, 0]], v[f[0, 2]] - v[f[0, 0]])
        up = v[f[0]].mean(0) if kind == "hemisphere" else np.array([0.0, 0.0, 1.0])
        if n0 @ up < 0:
            f = f[:, ::-1].copy()
    return TriMesh(v, f)


MESH_KINDS: tuple[str, ...] = ("sphere", "hemisphere", "torus", "dumbbell", "wave")
