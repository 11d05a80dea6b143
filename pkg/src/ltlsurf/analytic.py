"""Closed-form reference quantities on the analytic test surfaces.

The wave-surface Laplacian is derived symbolically from the metric of the
parametrization, ``(1/sqrt g) d_i (sqrt g g^ij d_j F)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy

from .mesh import torus_radii

# ------------------------------------------------------------------- sphere


def sphere_harmonics(points, degree: int) -> np.ndarray:
    """Real basis of degree-`degree` spherical harmonics (harmonic homogeneous
    polynomials) sampled at unit-sphere `points`, shape (2*degree + 1, n)."""
    p = np.asarray(points, dtype=float)
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    if degree == 0:
        return np.ones((1, len(p)))
    if degree == 1:
        return np.stack([x, y, z])
    if degree == 2:
        return np.stack([x * y, y * z, x * z, x * x - y * y, 2 * z * z - x * x - y * y])
    if degree == 3:
        return np.stack([
            x * y * z,
            z * (x * x - y * y),
            x * (x * x - 3 * y * y),
            y * (3 * x * x - y * y),
            x * (4 * z * z - x * x - y * y),
            y * (4 * z * z - x * x - y * y),
            z * (2 * z * z - 3 * x * x - 3 * y * y),
        ])
    raise ValueError("spherical harmonic bases are tabulated for degrees 0..3")


def sphere_eigenvalue(n: int) -> float:
    return -float(n * (n + 1))


def hemisphere_dirichlet_eigenvalues(count: int = 6) -> np.ndarray:
    """Smallest Dirichlet eigenvalues of the unit upper hemisphere.

    These are ``-n(n+1)`` with one eigenfunction for each ``Y_n^m`` with
    ``n - m`` odd, i.e. multiplicity ``n``.
    """
    vals = []
    n = 1
    while len(vals) < count:
        vals.extend([sphere_eigenvalue(n)] * n)
        n += 1
    return np.array(vals[:count])


def hemisphere_dirichlet_basis(points, n: int) -> np.ndarray:
    """Degree-`n` harmonics vanishing on the equator ``z = 0``."""
    full = sphere_harmonics(points, n)
    eq = np.stack([np.cos(t) * np.array([1.0, 0, 0]) + np.sin(t) * np.array([0, 1.0, 0])
                   for t in np.linspace(0, 2 * np.pi, 4 * n + 3, endpoint=False)])
    on_eq = sphere_harmonics(eq, n)  # (2n+1, m)
    _, s, vt = np.linalg.svd(on_eq.T)
    rank = int((s > 1e-12 * s[0]).sum())
    null = vt[rank:]  # combinations vanishing on the equator
    return null @ full


# -------------------------------------------------------------------- torus


def torus_angles(points, params=None) -> tuple[np.ndarray, np.ndarray]:
    """Longitude ``u`` and tube angle ``v`` of torus `points`."""
    c, _ = torus_radii(params or {})
    p = np.asarray(points, dtype=float)
    rho = np.hypot(p[:, 0], p[:, 1])
    return np.arctan2(p[:, 1], p[:, 0]), np.arctan2(p[:, 2], rho - c)


def torus_reference(points, params=None) -> dict[str, np.ndarray]:
    """Outward normal, Gaussian curvature and (positive) mean curvature."""
    c, a = torus_radii(params or {})
    u, v = torus_angles(points, params)
    ring = c + a * np.cos(v)
    return {
        "normal": np.stack([np.cos(v) * np.cos(u), np.cos(v) * np.sin(u), np.sin(v)], axis=1),
        "gaussian": np.cos(v) / (a * ring),
        "mean": (c + 2 * a * np.cos(v)) / (2 * a * ring),
    }


def sphere_reference(points) -> dict[str, np.ndarray]:
    p = np.asarray(points, dtype=float)
    n = p / np.linalg.norm(p, axis=1)[:, None]
    return {"normal": n, "gaussian": np.ones(len(p)), "mean": np.ones(len(p))}


# --------------------------------------------------------------------- wave


def _surface_laplacian(X, F, u, v):
    Xu, Xv = X.diff(u), X.diff(v)
    E, Fm, G = Xu.dot(Xu), Xu.dot(Xv), Xv.dot(Xv)
    g = sympy.simplify(E * G - Fm * Fm)
    sg = sympy.sqrt(g)
    gi = sympy.Matrix([[G, -Fm], [-Fm, E]]) / g
    grad = sympy.Matrix([F.diff(u), F.diff(v)])
    flux = sg * gi * grad
    return (flux[0].diff(u) + flux[1].diff(v)) / sg


@lru_cache(maxsize=None)
def _wave_functions():
    u, v = sympy.symbols("u v", real=True)
    X = sympy.Matrix([u, v, sympy.sin(u) * sympy.cos(v)])
    F = sympy.exp(sympy.Rational(1, 2) * sympy.sin(u) + sympy.cos(v) ** 3)
    lap = _surface_laplacian(X, F, u, v)
    return sympy.lambdify((u, v), F, "numpy"), sympy.lambdify((u, v), lap, "numpy")


def wave_field(points) -> np.ndarray:
    """``F = exp(0.5 sin u + cos(v)**3)`` at wave-surface points ``(u, v, .)``."""
    p = np.asarray(points, dtype=float)
    return np.asarray(_wave_functions()[0](p[:, 0], p[:, 1]), dtype=float)


def wave_laplacian(points) -> np.ndarray:
    """Exact Laplace-Beltrami of :func:`wave_field` on ``z = sin u cos v``."""
    p = np.asarray(points, dtype=float)
    return np.asarray(_wave_functions()[1](p[:, 0], p[:, 1]), dtype=float)


def graph_laplacian_expr(height, field, u, v):
    """Symbolic Laplace-Beltrami of `field` on the graph ``z = height(u, v)``."""
    X = sympy.Matrix([u, v, height])
    return _surface_laplacian(X, field, u, v)
