import math
from functools import lru_cache

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import planar_grid
from ltlsurf.analytic import graph_laplacian_expr, torus_reference
from ltlsurf.highorder import (
    curvature_arrays,
    fit_height,
    fit_samples,
    fit_scalar,
    gradient_arrays,
    invariants_from_fit,
    laplacian_functional,
    surface_differentials,
    vertex_differentials,
    vertex_invariants,
)
from ltlsurf.lifting import LocalFrame
from ltlsurf.mesh import NeighborhoodSpec, TriMesh, generate_mesh, mesh_size
from ltlsurf.stencil import StencilError, monomial_exponents, n_coefficients


def polar_points(degree, scale=1.0, seed=0):
    rng = np.random.default_rng(seed)
    pts = []
    k = 2 * degree + 2
    for ring in range(1, degree + 2):
        ang = (np.arange(k) + rng.uniform(-0.2, 0.2, k) + 0.5 * ring) * 2 * np.pi / k
        pts.append(ring / (degree + 1) * np.stack([np.cos(ang), np.sin(ang)], 1))
    return np.concatenate(pts) * scale


def taylor_values(coef, degree, pts):
    return sum(c * pts[:, 0] ** a * pts[:, 1] ** b / (math.factorial(a) * math.factorial(b))
               for c, (a, b) in zip(coef, monomial_exponents(degree)))


# ------------------------------------------------------------------ fits


def test_planar_height_zero():
    m = planar_grid(9, 0.2)
    for k in (2, 3, 4):
        fit = fit_height(m, 40, k)
        assert np.abs(fit.coefficients).max() <= 1e-12
        assert fit.center_value == 0.0
        assert len(fit.coefficients) == n_coefficients(k)


def test_paraboloid_samples():
    pts = polar_points(2, 0.3)
    fit = fit_samples(pts, 0.5 * (pts ** 2).sum(1), 2)
    assert fit.derivative(2, 0) == pytest.approx(1.0, abs=1e-10)
    assert fit.derivative(0, 2) == pytest.approx(1.0, abs=1e-10)
    assert abs(fit.derivative(1, 1)) <= 1e-10
    assert abs(fit.derivative(1, 0)) <= 1e-10 and abs(fit.derivative(0, 1)) <= 1e-10
    assert fit.derivative(3, 0) == 0.0


def test_minimal_point_count():
    five = np.array([[1, 0], [0, 1], [-1, 0], [0, -1], [0.6, 0.7]]) * 0.1
    fit = fit_samples(five, 0.5 * (five ** 2).sum(1), 2)
    assert fit.derivative(2, 0) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(StencilError):
        fit_samples(five[:4], np.zeros(4), 2)


def test_fit_scalar_constant_and_linear():
    m = planar_grid(9, 0.2)
    fit = fit_scalar(m, 40, 3, np.full(m.n_vertices, 7.0))
    assert fit.center_value == 7.0 and np.abs(fit.coefficients).max() <= 1e-12
    # the frame of a flat star has e1 = x axis
    fit = fit_scalar(m, 40, 3, m.vertices[:, 0].copy())
    assert fit.frame.e1.tolist() == [1.0, 0.0, 0.0]
    expect = np.zeros(n_coefficients(3))
    expect[0] = 1.0
    assert np.abs(fit.coefficients - expect).max() <= 1e-12
    with pytest.raises(ValueError):
        fit_scalar(m, 40, 3, np.zeros(3))


@pytest.mark.parametrize("degree", [2, 3, 4, 5, 6])
def test_polynomial_reproduction(degree):
    rng = np.random.default_rng(degree)
    pts = polar_points(degree, 1.0, seed=degree)
    for _ in range(5):
        coef = rng.normal(size=n_coefficients(degree))
        c0 = rng.normal()
        fit = fit_samples(pts, c0 + taylor_values(coef, degree, pts), degree, c0)
        assert np.abs(fit.coefficients - coef).max() <= 1e-10 * np.abs(coef).max() * 10
        assert fit.residual <= 1e-10


def test_fit_samples_scale_handled():
    coef = np.arange(1, n_coefficients(3) + 1, dtype=float)
    for scale in (1e-2, 1.0, 10.0):
        pts = polar_points(3, scale)
        fit = fit_samples(pts, taylor_values(coef, 3, pts), 3)
        assert np.abs(fit.coefficients - coef).max() <= 1e-7 * np.abs(coef).max()


# ------------------------------------------------------------------ invariants


def test_flat_invariants():
    fit = fit_samples(polar_points(2), np.zeros(len(polar_points(2))), 2)
    inv = invariants_from_fit(fit)
    assert inv.gaussian == 0 and inv.mean == 0
    assert np.array_equal(inv.normal, fit.frame.normal)
    assert inv.first_form == (1.0, 0.0, 1.0)


def test_invariants_need_degree_two():
    fit = fit_samples(polar_points(1), np.zeros(len(polar_points(1))), 1)
    with pytest.raises(ValueError):
        invariants_from_fit(fit)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=5, max_size=5))
def test_gaussian_two_formulas(h):
    arr = curvature_arrays(np.array([h]), 2, np.eye(3)[None])
    assert arr["gaussian"][0] == pytest.approx(arr["gaussian_forms"][0], rel=1e-10, abs=1e-12)
    hu, hv = h[0], h[1]
    assert arr["E"][0] * arr["G"][0] - arr["F"][0] ** 2 == pytest.approx(1 + hu * hu + hv * hv, rel=1e-12)


def test_sphere_vertex_curvatures():
    errs = []
    for target in (0.16, 0.08):
        m = generate_mesh("sphere", {}, target)
        fit = fit_height(m, 5, 3)
        inv = invariants_from_fit(fit)
        errs.append(max(abs(inv.gaussian - 1), abs(abs(inv.mean) - 1)))
        assert abs(np.dot(inv.normal, m.vertices[5])) == pytest.approx(1.0, abs=1e-3)
    assert errs[1] < errs[0] < 0.05


def test_torus_outer_equator():
    m = generate_mesh("torus", {}, 0.05)
    v = int(np.argmax(np.hypot(m.vertices[:, 0], m.vertices[:, 1]) - 10 * np.abs(m.vertices[:, 2])))
    assert abs(m.vertices[v, 2]) < 1e-12
    inv = invariants_from_fit(fit_height(m, v, 4))
    ref = torus_reference(m.vertices[v:v + 1])
    assert ref["gaussian"][0] == pytest.approx(4.0, rel=1e-12)
    assert inv.gaussian == pytest.approx(4.0, rel=1e-3)
    assert abs(inv.mean) == pytest.approx(ref["mean"][0], rel=1e-3)


# ------------------------------------------------------------------ differential operators


@lru_cache(maxsize=None)
def _symbolic_graph_laplacian(degree):
    u, v = sympy.symbols("u v", real=True)
    hs = sympy.symbols(f"h0:{n_coefficients(degree)}", real=True)
    ps = sympy.symbols(f"p0:{n_coefficients(degree)}", real=True)
    mono = [u ** a * v ** b / (sympy.factorial(a) * sympy.factorial(b)) for a, b in monomial_exponents(degree)]
    height = sum(c * mm for c, mm in zip(hs, mono))
    field = sum(c * mm for c, mm in zip(ps, mono))
    lap = graph_laplacian_expr(height, field, u, v).subs({u: 0, v: 0})
    return sympy.lambdify((hs, ps), lap, "numpy")


@pytest.mark.parametrize("degree", [2, 3])
def test_laplacian_functional_sympy_oracle(degree):
    oracle = _symbolic_graph_laplacian(degree)
    rng = np.random.default_rng(degree)
    for _ in range(25):
        h = rng.normal(size=n_coefficients(degree))
        p = rng.normal(size=n_coefficients(degree))
        got = float(laplacian_functional(h[None], degree)[0] @ p)
        assert got == pytest.approx(float(oracle(h, p)), rel=1e-10, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-2, 2, allow_nan=False), min_size=5, max_size=5),
       st.lists(st.floats(-2, 2, allow_nan=False), min_size=3, max_size=3))
def test_gradient_of_ambient_linear_function(h, a):
    # phi = a . X(u, v) has surface gradient (I - n n^T) a
    h = np.array(h)
    a = np.array(a)
    hu, hv, huu, huv, hvv = h
    phi = np.array([a[0] + a[2] * hu, a[1] + a[2] * hv, a[2] * huu, a[2] * huv, a[2] * hvv])
    grad = gradient_arrays(h[None], phi[None], 2, np.eye(3)[None])[0]
    n = np.array([-hu, -hv, 1.0]) / math.sqrt(1 + hu * hu + hv * hv)
    assert np.abs(grad - (a - (a @ n) * n)).max() <= 1e-10 * max(1.0, np.abs(a).max())


def test_planar_differentials():
    pts = polar_points(3, 0.2)
    frame = LocalFrame(0, np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    hf = fit_samples(pts, np.zeros(len(pts)), 3, frame=frame)
    sf = fit_samples(pts, (pts ** 2).sum(1), 3, frame=frame)
    grad, lap = surface_differentials(hf, sf)
    assert np.abs(grad).max() <= 1e-12
    assert lap == pytest.approx(4.0, abs=1e-10)


def test_differentials_preconditions():
    pts = polar_points(3, 0.2)
    a = fit_samples(pts, np.zeros(len(pts)), 3)
    b = fit_samples(polar_points(2, 0.2), np.zeros(len(polar_points(2))), 2)
    with pytest.raises(ValueError):
        surface_differentials(a, b)
    other = LocalFrame(1, np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]))
    c = fit_samples(pts, np.zeros(len(pts)), 3, frame=other)
    with pytest.raises(ValueError):
        surface_differentials(a, c)
    d = fit_samples(polar_points(1), np.zeros(len(polar_points(1))), 1)
    with pytest.raises(ValueError):
        surface_differentials(d, d)


def test_sphere_field_differentials():
    m = generate_mesh("sphere", {"method": "geodesic", "frequency": 10}, 1.0)
    z = m.vertices[:, 2].copy()
    grad, lap = vertex_differentials(m, 4, z)
    assert np.abs(lap + 2 * z).max() < 1e-3
    exact = np.array([0, 0, 1.0])[None] - z[:, None] * m.vertices
    assert np.abs(grad - exact).max() < 1e-3
    # single-vertex path agrees with the batched one
    hf, sf = fit_height(m, 7, 4), fit_scalar(m, 7, 4, z)
    g7, l7 = surface_differentials(hf, sf)
    assert l7 == pytest.approx(lap[7], rel=1e-12)
    assert np.abs(g7 - grad[7]).max() <= 1e-12


@pytest.mark.parametrize("degree", [3, 4, 5])
def test_sphere_orders(degree):
    lap_err, n_err, k_err, sizes = [], [], [], []
    for freq in (8, 16):
        m = generate_mesh("sphere", {"method": "geodesic", "frequency": freq}, 1.0)
        z = m.vertices[:, 2].copy()
        _, lap = vertex_differentials(m, degree, z)
        inv = vertex_invariants(m, degree)
        lap_err.append(np.abs(lap + 2 * z).max())
        n_err.append(np.abs(np.abs(np.einsum("ij,ij->i", inv["normal"], m.vertices)) - 1).max() ** 0.5)
        k_err.append(np.abs(inv["gaussian"] - 1).max())
        sizes.append(mesh_size(m))
    rate = lambda e: math.log(e[0] / e[1]) / math.log(sizes[0] / sizes[1])
    assert rate(lap_err) >= degree - 2 - 0.5
    assert rate(k_err) >= degree - 2 - 0.5
    assert rate(n_err) >= degree - 1 - 0.5


def test_frame_invariance_under_rotation():
    m = generate_mesh("torus", {}, 0.15)
    q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    rot = TriMesh(m.vertices @ q.T, m.triangles)
    field = np.exp(0.5 * m.vertices[:, 0]) + m.vertices[:, 2] ** 2
    a, b = vertex_invariants(m, 4), vertex_invariants(rot, 4)
    assert np.abs(a["gaussian"] - b["gaussian"]).max() <= 1e-8
    assert np.abs(a["mean"] - b["mean"]).max() <= 1e-8
    assert np.abs(a["normal"] @ q.T - b["normal"]).max() <= 1e-8
    ga, la = vertex_differentials(m, 4, field)
    gb, lb = vertex_differentials(rot, 4, field)
    assert np.abs(la - lb).max() <= 1e-8 * max(1.0, np.abs(la).max())
    assert np.abs(ga @ q.T - gb).max() <= 1e-8 * max(1.0, np.abs(ga).max())


def test_vertex_invariants_subset():
    m = generate_mesh("torus", {}, 0.2)
    full = vertex_invariants(m, 3, NeighborhoodSpec(3, 5))
    sub = vertex_invariants(m, 3, NeighborhoodSpec(3, 5), vertices=[4, 9])
    assert sub["vertices"].tolist() == [4, 9]
    assert np.array_equal(sub["gaussian"], full["gaussian"][[4, 9]])
    assert np.all(full["ring"] >= 3)
    with pytest.raises(ValueError):
        vertex_invariants(m, 1)
