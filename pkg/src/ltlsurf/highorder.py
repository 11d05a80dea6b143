"""Local polynomial (jet) fits of the height function and of scalar fields in
the lifted frame, and the graph-surface formulas for normals, curvatures,
gradients and the Laplace-Beltrami operator built on them.

Coefficient ``i`` of a degree-k jet pairs with the monomial
``x**a * y**b / (a! b!)``, ``(a, b) = monomial_exponents(k)[i]``, so it
estimates the partial derivative ``d^(a+b) f / dx^a dy^b`` at the vertex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lifting import LocalFrame
from .mesh import NeighborhoodSpec, TriMesh
from .patches import PatchSet, build_patches
from .stencil import StencilError, configuration_matrix, monomial_exponents, monomial_scales, n_coefficients


@dataclass(frozen=True)
class JetFit:
    """Taylor coefficients of a height function or scalar field at one vertex.

    Attributes
    ----------
    coefficients : ndarray, shape (n,)
        Derivative estimates ordered as :func:`monomial_exponents`.
    center_value : float
        Value at the vertex (0 for the height function).
    residual : float
        Largest entry of ``|M pinv(M) - I|`` for the scaled moment system.
    """

    degree: int
    coefficients: np.ndarray
    center_value: float
    residual: float
    frame: LocalFrame

    def derivative(self, a: int, b: int) -> float:
        """Estimate of ``d^(a+b) f / dx^a dy^b`` at the vertex (0 beyond the degree)."""
        if a == 0 and b == 0:
            return self.center_value
        if a < 0 or b < 0:
            raise ValueError("derivative orders must be nonnegative")
        if a + b > self.degree:
            return 0.0
        return float(self.coefficients[monomial_exponents(self.degree).index((a, b))])


@dataclass(frozen=True)
class GeometricInvariants:
    """Normal, fundamental forms and curvatures at one vertex.

    ``first_form`` is (E, F, G) and ``second_form`` is (e, f, g) in the
    graph parametrization over the tangent plane.
    """

    normal: np.ndarray
    first_form: tuple[float, float, float]
    second_form: tuple[float, float, float]
    gaussian: float
    mean: float


# ------------------------------------------------------------------ fitting


def _index(degree: int, a: int, b: int) -> int:
    return monomial_exponents(degree).index((a, b))


def patch_coefficients(ps: PatchSet, values) -> np.ndarray:
    """Jet coefficients of per-vertex `values` over every patch, shape (nb, n).

    `values` is indexed by mesh vertex; the differences to the patch center
    are projected with the stored pseudo-inverses.
    """
    if ps.degree is None:
        raise ValueError("patches were built for the first-order system")
    values = np.asarray(values, dtype=float)
    own = ps.owner
    diff = values[ps.neighbors] - values[ps.vertices[own]]
    return _reduce(ps, diff)


def height_coefficients(ps: PatchSet) -> np.ndarray:
    """Jet coefficients of the height function over every patch, shape (nb, n)."""
    if ps.degree is None:
        raise ValueError("patches were built for the first-order system")
    return _reduce(ps, ps.heights)


def _reduce(ps, diff):
    sums = np.add.reduceat(ps.pinv * diff[:, None], ps.indptr[:-1], axis=0)
    order = np.array([a + b for a, b in monomial_exponents(ps.degree)], dtype=float)
    return sums / ps.radius[:, None] ** order[None, :]


def _frame(ps: PatchSet, b: int) -> LocalFrame:
    f = ps.frames[b]
    return LocalFrame(int(ps.vertices[b]), f[2].copy(), f[0].copy(), f[1].copy())


def _single_patch(mesh, v, degree, spec):
    if degree < 1:
        raise ValueError("degree must be at least 1")
    if not 0 <= v < mesh.n_vertices:
        raise IndexError(f"vertex {v} out of range")
    return build_patches(mesh, spec, degree=degree, vertices=[v])


def fit_height(mesh: TriMesh, v: int, degree: int, spec: NeighborhoodSpec | None = None) -> JetFit:
    """Fit the height function ``z = h(x, y)`` over the tangent plane at `v`.

    The neighborhood is grown until it holds at least as many points as
    coefficients and the moment system has full rank.
    """
    ps = _single_patch(mesh, v, degree, spec)
    return JetFit(degree, height_coefficients(ps)[0], 0.0, float(ps.residual[0]), _frame(ps, 0))


def fit_scalar(mesh: TriMesh, v: int, degree: int, field, spec: NeighborhoodSpec | None = None) -> JetFit:
    """Fit the lifted scalar `field` over the tangent plane at `v`."""
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_vertices,):
        raise ValueError("field length does not match the mesh")
    ps = _single_patch(mesh, v, degree, spec)
    return JetFit(degree, patch_coefficients(ps, field)[0], float(field[v]), float(ps.residual[0]),
                  _frame(ps, 0))


def fit_samples(coords, values, degree: int, center_value: float = 0.0, frame: LocalFrame | None = None) -> JetFit:
    """Jet fit of scattered planar samples ``values`` at ``coords`` around the origin."""
    c = np.asarray(coords, dtype=float).reshape(-1, 2)
    f = np.asarray(values, dtype=float)
    if f.shape != (len(c),):
        raise ValueError("values and coords differ in length")
    if len(c) < n_coefficients(degree):
        raise StencilError(f"degree {degree} needs at least {n_coefficients(degree)} points, got {len(c)}")
    radius = float(np.sqrt((c * c).sum(axis=1)).max())
    if radius == 0:
        raise StencilError("all sample points coincide with the origin")
    m = configuration_matrix(c / radius, degree)
    p = np.linalg.pinv(m, rcond=1e-12)
    residual = float(np.abs(m @ p - np.eye(len(m))).max())
    if residual > 1e-6:
        raise StencilError(f"rank-deficient sample configuration (residual {residual:.3g})")
    coef = (p.T @ (f - center_value)) / monomial_scales(degree, radius)
    if frame is None:
        frame = LocalFrame(-1, np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    return JetFit(degree, coef, float(center_value), residual, frame)


# ------------------------------------------------------------ graph formulas


def _first_second(hc, degree):
    hu = hc[..., _index(degree, 1, 0)]
    hv = hc[..., _index(degree, 0, 1)]
    if degree >= 2:
        huu = hc[..., _index(degree, 2, 0)]
        huv = hc[..., _index(degree, 1, 1)]
        hvv = hc[..., _index(degree, 0, 2)]
    else:
        huu = huv = hvv = np.zeros_like(hu)
    return hu, hv, huu, huv, hvv


def curvature_arrays(height_coef, degree: int, frames) -> dict[str, np.ndarray]:
    """Vectorized graph-surface invariants.

    Parameters
    ----------
    height_coef : (nb, n) array
    frames : (nb, 3, 3) array
        Rows e1, e2, normal of each tangent frame.

    Returns
    -------
    dict with ``normal`` (nb, 3), ``E``, ``F``, ``G``, ``e``, ``f``, ``g``,
    ``gaussian``, ``mean`` and ``gaussian_forms`` (K recomputed from the
    fundamental forms).
    """
    hc = np.atleast_2d(np.asarray(height_coef, dtype=float))
    fr = np.asarray(frames, dtype=float).reshape(-1, 3, 3)
    hu, hv, huu, huv, hvv = _first_second(hc, degree)
    w2 = 1.0 + hu * hu + hv * hv
    w = np.sqrt(w2)
    local_n = np.stack([-hu, -hv, np.ones_like(hu)], axis=1) / w[:, None]
    normal = np.einsum("bi,bij->bj", local_n, fr)
    E, F, G = 1.0 + hu * hu, hu * hv, 1.0 + hv * hv
    e, f, g = huu / w, huv / w, hvv / w
    gaussian = (huu * hvv - huv * huv) / (w2 * w2)
    mean = ((1.0 + hu * hu) * hvv - 2.0 * hu * hv * huv + (1.0 + hv * hv) * huu) / (2.0 * w2 * w)
    return {
        "normal": normal, "E": E, "F": F, "G": G, "e": e, "f": f, "g": g,
        "gaussian": gaussian, "mean": mean, "gaussian_forms": (e * g - f * f) / (E * G - F * F),
    }


def invariants_from_fit(fit: JetFit) -> GeometricInvariants:
    """Normal, fundamental forms, Gaussian and mean curvature of a height fit.

    The mean curvature is signed with respect to the fitted normal, which
    points to the side of the frame normal.
    """
    if fit.degree < 2:
        raise ValueError("curvatures need a fit of degree at least 2")
    a = curvature_arrays(fit.coefficients[None, :], fit.degree, fit.frame.basis()[None])
    return GeometricInvariants(
        normal=a["normal"][0],
        first_form=(float(a["E"][0]), float(a["F"][0]), float(a["G"][0])),
        second_form=(float(a["e"][0]), float(a["f"][0]), float(a["g"][0])),
        gaussian=float(a["gaussian"][0]),
        mean=float(a["mean"][0]),
    )


def laplacian_functional(height_coef, degree: int) -> np.ndarray:
    """Coefficient vectors ``c`` with ``Lap phi = c . phi_coefficients``.

    In graph coordinates, with ``W^2 = 1 + h_u^2 + h_v^2`` and inverse metric
    ``g^ij``, the Laplace-Beltrami operator at the origin reads
    ``g^ij phi_ij - kappa (h_u phi_u + h_v phi_v)`` where
    ``kappa = g^ij h_ij / W^2``. Returns shape (nb, n).
    """
    hc = np.atleast_2d(np.asarray(height_coef, dtype=float))
    if degree < 2:
        raise ValueError("the Laplacian needs fits of degree at least 2")
    hu, hv, huu, huv, hvv = _first_second(hc, degree)
    w2 = 1.0 + hu * hu + hv * hv
    guu = 1.0 - hu * hu / w2
    guv = -hu * hv / w2
    gvv = 1.0 - hv * hv / w2
    kappa = (guu * huu + 2.0 * guv * huv + gvv * hvv) / w2
    c = np.zeros_like(hc)
    c[:, _index(degree, 1, 0)] = -kappa * hu
    c[:, _index(degree, 0, 1)] = -kappa * hv
    c[:, _index(degree, 2, 0)] = guu
    c[:, _index(degree, 1, 1)] = 2.0 * guv
    c[:, _index(degree, 0, 2)] = gvv
    return c


def gradient_arrays(height_coef, scalar_coef, degree: int, frames) -> np.ndarray:
    """World-space surface gradients ``g^ij phi_j X_i``, shape (nb, 3)."""
    hc = np.atleast_2d(np.asarray(height_coef, dtype=float))
    sc = np.atleast_2d(np.asarray(scalar_coef, dtype=float))
    fr = np.asarray(frames, dtype=float).reshape(-1, 3, 3)
    hu, hv = hc[:, _index(degree, 1, 0)], hc[:, _index(degree, 0, 1)]
    pu, pv = sc[:, _index(degree, 1, 0)], sc[:, _index(degree, 0, 1)]
    w2 = 1.0 + hu * hu + hv * hv
    guu, guv, gvv = 1.0 - hu * hu / w2, -hu * hv / w2, 1.0 - hv * hv / w2
    cu = guu * pu + guv * pv
    cv = guv * pu + gvv * pv
    e1, e2, n = fr[:, 0], fr[:, 1], fr[:, 2]
    xu = e1 + hu[:, None] * n
    xv = e2 + hv[:, None] * n
    return cu[:, None] * xu + cv[:, None] * xv


def surface_differentials(height: JetFit, scalar: JetFit) -> tuple[np.ndarray, float]:
    """Surface gradient (world 3-vector) and Laplace-Beltrami value at the vertex.

    Both fits must live in the same frame and have degree at least 2.
    """
    if height.degree != scalar.degree:
        raise ValueError("height and scalar fits must share the degree")
    if height.degree < 2:
        raise ValueError("surface differentials need fits of degree at least 2")
    if height.frame.origin != scalar.frame.origin or not np.array_equal(height.frame.basis(), scalar.frame.basis()):
        raise ValueError("height and scalar fits must share the frame")
    k = height.degree
    grad = gradient_arrays(height.coefficients[None], scalar.coefficients[None], k, height.frame.basis()[None])[0]
    lap = float(laplacian_functional(height.coefficients[None], k)[0] @ scalar.coefficients)
    return grad, lap


# ------------------------------------------------------------- whole meshes


def vertex_invariants(mesh: TriMesh, degree: int, spec: NeighborhoodSpec | None = None,
                      vertices=None, backend: str | None = None) -> dict[str, np.ndarray]:
    """:func:`curvature_arrays` at every (or each given) vertex, plus ``ring``."""
    if degree < 2:
        raise ValueError("curvatures need a fit of degree at least 2")
    ps = build_patches(mesh, spec, degree=degree, vertices=vertices, backend=backend)
    out = curvature_arrays(height_coefficients(ps), degree, ps.frames)
    out["ring"] = ps.ring
    out["vertices"] = ps.vertices
    return out


def vertex_differentials(mesh: TriMesh, degree: int, field, spec: NeighborhoodSpec | None = None,
                         vertices=None, backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Surface gradients (nb, 3) and Laplacians (nb,) of `field` from jet fits."""
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_vertices,):
        raise ValueError("field length does not match the mesh")
    if degree < 2:
        raise ValueError("surface differentials need fits of degree at least 2")
    ps = build_patches(mesh, spec, degree=degree, vertices=vertices, backend=backend)
    hc = height_coefficients(ps)
    sc = patch_coefficients(ps, field)
    grad = gradient_arrays(hc, sc, degree, ps.frames)
    lap = np.einsum("bi,bi->b", laplacian_functional(hc, degree), sc)
    return grad, lap
