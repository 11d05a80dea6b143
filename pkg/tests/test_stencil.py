import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ltlsurf.stencil import (
    MomentTarget,
    StencilError,
    apply_laplace_stencil,
    apply_product_stencil,
    batch_pinv,
    configuration_matrix,
    laplace_stencil,
    moment_stencil,
    monomial_exponents,
    n_coefficients,
    product_stencil,
)


def full_pivot_solve(a, b):
    """Gaussian elimination with complete pivoting (independent of LAPACK)."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    n = len(a)
    perm = list(range(n))
    for k in range(n):
        sub = np.abs(a[k:, k:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        i += k
        j += k
        a[[k, i]] = a[[i, k]]
        b[[k, i]] = b[[i, k]]
        a[:, [k, j]] = a[:, [j, k]]
        perm[k], perm[j] = perm[j], perm[k]
        for r in range(k + 1, n):
            f = a[r, k] / a[k, k]
            a[r, k:] -= f * a[k, k:]
            b[r] -= f * b[k]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    out = np.zeros(n)
    out[perm] = x
    return out


def minimal_norm_oracle(m, t):
    """``M^T (M M^T)^-1 t`` for a full-row-rank M."""
    return m.T @ full_pivot_solve(m @ m.T, t)


def polar_config(rng, degree, scale):
    """Well-spread points on rings around the origin (conditioning stays modest)."""
    pts = []
    for ring in range(1, degree + 2):
        k = 2 * degree + 2
        ang = (np.arange(k) + rng.uniform(-0.2, 0.2, k) + 0.5 * ring) * 2 * np.pi / k
        pts.append(ring / (degree + 1) * np.stack([np.cos(ang), np.sin(ang)], 1))
    return np.concatenate(pts) * scale


def random_config(rng, n):
    ang = rng.uniform(0, 2 * np.pi, n)
    rad = rng.uniform(0.3, 1.0, n)
    return np.stack([rad * np.cos(ang), rad * np.sin(ang)], 1) * rng.uniform(0.01, 10)


def hexagon(s=1.0):
    a = np.arange(6) * np.pi / 3
    return s * np.stack([np.cos(a), np.sin(a)], 1)


CROSS = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])


# ------------------------------------------------------------------ first order


def test_four_point_cross():
    w = laplace_stencil(0.1 * CROSS)
    assert np.array_equal(w.weights, np.full(4, 0.25)) or np.abs(w.weights - 0.25).max() < 1e-15
    assert w.normalizer == pytest.approx(0.5 * 0.01, rel=1e-14)


def test_hexagon_one_sixth():
    w = laplace_stencil(hexagon(0.3))
    assert np.abs(w.weights - 1 / 6).max() < 1e-14
    m = configuration_matrix(hexagon(1.0))
    assert np.abs(minimal_norm_oracle(m, [0, 0, 0, 0, 1]) - 1 / 6).max() < 1e-14


def test_product_equals_laplace():
    rng = np.random.default_rng(3)
    for _ in range(20):
        c = random_config(rng, 8)
        a, b = laplace_stencil(c), product_stencil(c)
        assert np.array_equal(a.weights, b.weights)
        assert b.kind == "product_rule"
    assert np.abs(product_stencil(CROSS).weights - 0.25).max() < 1e-15
    assert np.abs(product_stencil(hexagon()).weights - 1 / 6).max() < 1e-14


@pytest.mark.parametrize("pts", [
    [[1, 0], [2, 0], [-1, 0], [-2, 0]],  # collinear through the origin
    [[1, 1], [2, 1], [3, 1], [4, 1]],  # collinear off the origin
    [[0, 0], [0, 0]],
    [],
])
def test_degenerate_first_order(pts):
    with pytest.raises(StencilError):
        laplace_stencil(np.array(pts, dtype=float).reshape(-1, 2))


def test_oracle_1000_configurations():
    rng = np.random.default_rng(2024)
    worst_rel, worst_res = 0.0, 0.0
    for _ in range(1000):
        n = int(rng.integers(5, 13))
        c = random_config(rng, n)
        w = laplace_stencil(c)
        r = np.sqrt((c * c).sum(1)).max()
        m = configuration_matrix(c / r)
        oracle = minimal_norm_oracle(m, np.array([0, 0, 0, 0, 1.0]))
        worst_rel = max(worst_rel, np.linalg.norm(w.weights - oracle) / np.linalg.norm(oracle))
        worst_res = max(worst_res, w.residual)
    assert worst_rel <= 1e-8
    assert worst_res <= 1e-10


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 2 * math.pi), st.floats(0.2, 1.0)), min_size=5, max_size=14),
       st.floats(1e-3, 1e3))
def test_moment_rows_property(polar, scale):
    c = np.array([[r * math.cos(a), r * math.sin(a)] for a, r in polar]) * scale
    r = np.sqrt((c * c).sum(1)).max()
    m = configuration_matrix(c / r)
    assume(np.linalg.svd(m, compute_uv=False)[-1] > 1e-3)
    try:
        w = laplace_stencil(c)
    except StencilError as exc:
        # a consistent system whose solution has sum(w x^2) = 0 is rejected by design
        assert "normalizer" in str(exc)
        assume(False)
    x, y = c[:, 0] / r, c[:, 1] / r
    assert abs(w.weights.sum() - 1) <= 1e-10
    for row in (x, y, x * y, x * x - y * y):
        assert abs(w.weights @ row) <= 1e-10
    # exactness on the quadratic Laplacian class; applying divides by the
    # scaled normalizer sum(w x^2), which amplifies the moment residual
    tol = 1e-9 * max(1.0, 1.0 / abs(w.weights @ (x * x)))
    ref = apply_laplace_stencil(w, (c * c).sum(1), 0.0)
    assert ref == pytest.approx(4.0, rel=tol)
    for vals in (x * x - y * y, x * y, x, y):
        assert abs(apply_laplace_stencil(w, vals * r * r, 0.0)) < tol
    assert apply_laplace_stencil(w, np.ones(len(c)), 1.0) == 0.0


def test_quadratic_exactness():
    rng = np.random.default_rng(11)
    for _ in range(200):
        c = random_config(rng, int(rng.integers(5, 10)))
        w = laplace_stencil(c)
        x, y = c[:, 0], c[:, 1]
        assert apply_laplace_stencil(w, x * x + y * y, 0.0) == pytest.approx(4.0, abs=1e-10)
        for vals, center in ((np.ones_like(x), 1.0), (x, 0.0), (y, 0.0), (x * y, 0.0), (x * x - y * y, 0.0)):
            assert abs(apply_laplace_stencil(w, vals, center)) < 1e-10 * max(1.0, np.abs(vals).max())


def test_scale_covariance():
    rng = np.random.default_rng(5)
    c = random_config(rng, 9)
    base = apply_laplace_stencil(laplace_stencil(c), (c * c).sum(1), 0.0)
    for s in (1e-3, 0.5, 7.0, 1e3):
        cs = c * s
        assert apply_laplace_stencil(laplace_stencil(cs), (cs * cs).sum(1), 0.0) == pytest.approx(base, rel=1e-10)


def test_apply_errors():
    w = laplace_stencil(hexagon())
    with pytest.raises(ValueError):
        apply_laplace_stencil(w, np.zeros(5), 0.0)
    with pytest.raises(ValueError):
        apply_product_stencil(w, np.zeros(6), 0.0, np.zeros(5), 0.0)
    assert apply_laplace_stencil(w, np.full(6, 3.0), 3.0) == 0.0


def test_product_stencil_values():
    for s in (0.1, 0.05):
        c = hexagon(s)
        w = product_stencil(c)
        x, y = c[:, 0], c[:, 1]
        f = x * x + y * y
        ones = np.ones(6)
        assert apply_product_stencil(w, f, 0.0, ones, 1.0) == pytest.approx(apply_laplace_stencil(w, f, 0.0), rel=1e-14)
        assert apply_product_stencil(w, np.full(6, 2.0), 2.0, 1 + x, 1.0) == 0.0
        # div((1 + x) grad f) at the origin = grad f . grad g + g lap f = 0 + 4
        assert abs(apply_product_stencil(w, f, 0.0, 1 + x, 1.0) - 4.0) <= 10 * s


# ------------------------------------------------------------------ moment systems


def test_moment_target_validation():
    assert len(MomentTarget.laplacian(4).target) == n_coefficients(4) == 14
    with pytest.raises(ValueError):
        MomentTarget(2, np.zeros(5))
    with pytest.raises(ValueError):
        MomentTarget(2, np.ones(4))


def test_degree2_cross_plus_laplacian():
    # 5 well-placed points suffice for degree 2
    c = np.array([[1, 0], [0, 1], [-1, 0], [0, -1], [0.7, 0.7]]) * 0.2
    w = moment_stencil(c, MomentTarget.laplacian(2))
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = rng.normal(size=6)
        f = lambda p: a[0] + a[1] * p[:, 0] + a[2] * p[:, 1] + a[3] * p[:, 0] ** 2 + a[4] * p[:, 0] * p[:, 1] + a[5] * p[:, 1] ** 2
        assert apply_laplace_stencil(w, f(c), a[0]) == pytest.approx(2 * a[3] + 2 * a[5], abs=1e-10)


def test_degree2_first_derivative():
    rng = np.random.default_rng(8)
    c = random_config(rng, 8)
    w = moment_stencil(c, MomentTarget.derivative(2, 1, 0))
    for _ in range(50):
        a = rng.normal(size=6)
        vals = a[0] + a[1] * c[:, 0] + a[2] * c[:, 1] + a[3] * c[:, 0] ** 2 + a[4] * c[:, 0] * c[:, 1] + a[5] * c[:, 1] ** 2
        assert float(w.weights @ (vals - a[0])) == pytest.approx(a[1], abs=1e-10 * max(1, np.abs(a).max()))


def test_degree3_nine_points():
    rng = np.random.default_rng(4)
    c = random_config(rng, 9)
    for i in range(n_coefficients(3)):
        t = np.zeros(9)
        t[i] = 1.0
        w = moment_stencil(c, MomentTarget(3, t))
        assert w.residual < 1e-9


@pytest.mark.parametrize("degree", [2, 3, 4, 5])
def test_polynomial_reproduction(degree):
    rng = np.random.default_rng(degree)
    ex = monomial_exponents(degree)
    c = polar_config(rng, degree, 1.0)
    for a, b in ex:
        w = moment_stencil(c, MomentTarget.derivative(degree, a, b))
        coef = rng.normal(size=len(ex))
        vals = sum(k * c[:, 0] ** p * c[:, 1] ** q / (math.factorial(p) * math.factorial(q)) for k, (p, q) in zip(coef, ex))
        expect = coef[ex.index((a, b))]
        assert float(w.weights @ vals) == pytest.approx(expect, rel=1e-8, abs=1e-8)


def test_moment_underdetermined_rejected():
    with pytest.raises(StencilError):
        moment_stencil(np.array([[1.0, 0], [0, 1], [-1, 0]]), MomentTarget.laplacian(2))


# ------------------------------------------------------------------ batched kernels


def test_batch_pinv_matches_numpy(backend):
    rng = np.random.default_rng(9)
    sizes = rng.integers(5, 12, size=40)
    coords = np.concatenate([random_config(rng, n) for n in sizes])
    indptr = np.concatenate([[0], np.cumsum(sizes)])
    for degree in (None, 2):
        if degree == 2:
            keep = sizes >= 5
            assert keep.all()
        p, radius, flags, scaled = batch_pinv(indptr, coords, degree, backend=backend)
        for b in range(len(sizes)):
            sl = slice(indptr[b], indptr[b + 1])
            m = configuration_matrix(coords[sl] / radius[b], degree)
            assert np.abs(p[sl] - np.linalg.pinv(m, rcond=1e-12)).max() < 1e-9
            assert np.allclose(scaled[sl], coords[sl] / radius[b])
        assert not flags.any()


def test_batch_pinv_rank_deficient(backend):
    coords = np.array([[1.0, 0], [2, 0], [-1, 0], [-2, 0], [3, 0], [1, 1], [0, 1], [-1, 0.5], [0, -1], [0.5, -0.5]])
    indptr = np.array([0, 5, 10])
    p, radius, flags, _ = batch_pinv(indptr, coords, None, backend=backend)
    assert flags.tolist() == [1, 0]
    m = configuration_matrix(coords[:5] / radius[0])
    assert np.abs(p[:5] - np.linalg.pinv(m, rcond=1e-12)).max() < 1e-10


def test_backends_agree():
    from ltlsurf._backend import available_backends
    if len(available_backends()) < 2:
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(17)
    sizes = rng.integers(14, 30, size=200)
    coords = np.concatenate([random_config(rng, n) for n in sizes])
    indptr = np.concatenate([[0], np.cumsum(sizes)])
    for degree in (None, 2, 4):
        a, _, _, cs = batch_pinv(indptr, coords, degree, backend="compiled")
        b = batch_pinv(indptr, coords, degree, backend="python")[0]
        for k in range(len(sizes)):
            sl = slice(indptr[k], indptr[k + 1])
            cond = np.linalg.cond(configuration_matrix(cs[sl], degree))
            # Householder QR and SVD agree to a few ulps times the condition number
            assert np.abs(a[sl] - b[sl]).max() <= 100 * cond * 2.2e-16 * np.abs(b[sl]).max()
