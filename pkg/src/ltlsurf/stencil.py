"""Configuration equations: moment-matching weights over lifted coordinates.

All systems are solved for the minimal-norm (pseudo-inverse) solution after
scaling the coordinates by the largest neighbor radius. Singular values
below ``1e-12`` times the largest are treated as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend

RCOND = 1e-12
ACCEPT_RESIDUAL = 1e-6
LAPLACE_TARGET = np.array([0.0, 0.0, 0.0, 0.0, 1.0])


class StencilError(ValueError):
    """A configuration system has no acceptable solution.

    Callers treat this as a request to enlarge the neighborhood.
    """


@dataclass(frozen=True)
class StencilWeights:
    """Weights of one vertex stencil.

    ``normalizer`` is ``sum(w_j * x_j**2)`` in unscaled coordinates for the
    first-order kinds and 1 for ``moment_general``. ``residual`` is the
    largest violation of the moment rows in scaled coordinates.
    """

    weights: np.ndarray
    normalizer: float
    kind: str
    residual: float


def monomial_exponents(degree: int) -> list[tuple[int, int]]:
    """Exponents ``(d - m, m)`` for ``1 <= d <= degree``, ``0 <= m <= d``."""
    return [(d - m, m) for d in range(1, degree + 1) for m in range(d + 1)]


def n_coefficients(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2 - 1


@dataclass(frozen=True)
class MomentTarget:
    """Right-hand side of a degree-`degree` moment system.

    Entry ``i`` pairs with the monomial ``x**a * y**b / (a! b!)`` where
    ``(a, b) = monomial_exponents(degree)[i]``; the weights then estimate
    ``sum_i target[i] * d^(a+b) f / dx^a dy^b`` at the origin.
    """

    degree: int
    target: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.target, dtype=float)
        object.__setattr__(self, "target", t)
        if self.degree < 1:
            raise ValueError("degree must be at least 1")
        if t.shape != (n_coefficients(self.degree),):
            raise ValueError(
                f"degree {self.degree} needs {n_coefficients(self.degree)} target entries, got {t.shape}")
        if not np.any(t):
            raise ValueError("moment target must have a nonzero entry")

    @classmethod
    def derivative(cls, degree: int, a: int, b: int) -> MomentTarget:
        """Target selecting ``d^(a+b) f / dx^a dy^b``."""
        t = np.zeros(n_coefficients(degree))
        t[monomial_exponents(degree).index((a, b))] = 1.0
        return cls(degree, t)

    @classmethod
    def laplacian(cls, degree: int) -> MomentTarget:
        t = np.zeros(n_coefficients(degree))
        ex = monomial_exponents(degree)
        t[ex.index((2, 0))] = 1.0
        t[ex.index((0, 2))] = 1.0
        return cls(degree, t)


def configuration_matrix(coords, degree: int | None = None) -> np.ndarray:
    """Rows ``x, y, xy, x^2-y^2, 1`` (``degree=None``) or the degree-k monomials."""
    c = np.asarray(coords, dtype=float).reshape(-1, 2)
    if degree is None:
        return _backend._pykernels.build_rows(c[:, 0], c[:, 1], _backend.FIRST_ORDER, 0)
    return _backend._pykernels.build_rows(c[:, 0], c[:, 1], _backend.MONOMIAL, degree)


def monomial_scales(degree: int, radius: float) -> np.ndarray:
    return np.array([radius ** (a + b) for a, b in monomial_exponents(degree)])


def _scaled(coords):
    c = np.asarray(coords, dtype=float).reshape(-1, 2)
    if len(c) == 0:
        raise StencilError("empty stencil")
    radius = float(np.sqrt((c * c).sum(axis=1)).max())
    if radius == 0.0:
        raise StencilError("all neighbor coordinates coincide with the origin")
    return c, c / radius, radius


def _first_order(coords, kind):
    c, cs, _ = _scaled(coords)
    m = configuration_matrix(cs)
    w = np.linalg.pinv(m, rcond=RCOND) @ LAPLACE_TARGET
    residual = float(np.abs(m @ w - LAPLACE_TARGET).max())
    if residual > ACCEPT_RESIDUAL:
        raise StencilError(f"configuration system inconsistent (residual {residual:.3g})")
    scaled_norm = float(w @ cs[:, 0] ** 2)
    if abs(scaled_norm) < 1e-12:
        raise StencilError("vanishing normalizer sum(w x^2)")
    return StencilWeights(w, float(w @ c[:, 0] ** 2), kind, residual)


def laplace_stencil(coords) -> StencilWeights:
    """Weights for the first-order Laplacian at the origin.

    Solves ``sum w = 1`` together with vanishing ``x``, ``y``, ``xy`` and
    ``x^2 - y^2`` moments. Raises :class:`StencilError` when the system is
    inconsistent (e.g. collinear points) or ``sum(w x^2)`` vanishes.
    """
    return _first_order(coords, "laplace_first_order")


def product_stencil(coords) -> StencilWeights:
    """Weights for ``grad g . grad f + g lap f``; same system as :func:`laplace_stencil`."""
    return _first_order(coords, "product_rule")


def moment_stencil(coords, target: MomentTarget) -> StencilWeights:
    """Minimal-norm weights matching the degree-k moments to `target`."""
    c, cs, radius = _scaled(coords)
    m = configuration_matrix(cs, target.degree)
    t = target.target / monomial_scales(target.degree, radius)
    w = np.linalg.pinv(m, rcond=RCOND) @ t
    scale = float(np.abs(t).max())
    residual = float(np.abs(m @ w - t).max() / scale)
    if residual > ACCEPT_RESIDUAL:
        raise StencilError(f"moment system inconsistent (relative residual {residual:.3g})")
    return StencilWeights(w, 1.0, "moment_general", residual)


def apply_laplace_stencil(w: StencilWeights, values, center: float) -> float:
    values = np.asarray(values, dtype=float)
    if values.shape != w.weights.shape:
        raise ValueError("values and weights differ in length")
    s = float(w.weights @ (values - center))
    if w.kind == "moment_general":
        return s
    if w.normalizer == 0:
        raise StencilError("zero normalizer")
    return 2.0 * s / w.normalizer


def apply_product_stencil(w: StencilWeights, f_values, f_center: float, g_values, g_center: float) -> float:
    """``sum w_j (f_j - f_0)(g_j + g_0) / normalizer``."""
    f = np.asarray(f_values, dtype=float)
    g = np.asarray(g_values, dtype=float)
    if f.shape != w.weights.shape or g.shape != w.weights.shape:
        raise ValueError("values and weights differ in length")
    if w.normalizer == 0:
        raise StencilError("zero normalizer")
    return float(w.weights @ ((f - f_center) * (g + g_center)) / w.normalizer)


# ----------------------------------------------------------------- batched path


def batch_pinv(indptr, coords, degree: int | None, backend: str | None = None):
    """Scaled pseudo-inverses for many stencils at once.

    Parameters
    ----------
    indptr : (nb + 1,) int array
        Block boundaries into `coords`.
    coords : (N, 2) array
        Lifted coordinates of every block, concatenated.
    degree : int or None
        None for the first-order system, else the monomial degree.

    Returns
    -------
    pinv : (N, m) array
        Rows ``indptr[b]:indptr[b+1]`` hold ``pinv(M_b)`` of the scaled matrix.
    radius : (nb,) array
        Per-block scaling radius.
    flags : (nb,) int8 array
        Rank-deficiency flags.
    scaled : (N, 2) array
        `coords` divided by their block radius.
    """
    indptr = np.asarray(indptr, dtype=np.int64)
    coords = np.asarray(coords, dtype=float)
    sizes = np.diff(indptr)
    owner = np.repeat(np.arange(len(sizes)), sizes)
    r = np.sqrt((coords * coords).sum(axis=1))
    radius = np.zeros(len(sizes))
    np.maximum.at(radius, owner, r)
    safe = np.where(radius > 0, radius, 1.0)
    cs = coords / safe[owner][:, None]
    kind = _backend.FIRST_ORDER if degree is None else _backend.MONOMIAL
    p, flags = _backend.config_pinv(indptr, cs[:, 0], cs[:, 1], kind, degree or 0, backend=backend)
    return p, radius, flags, cs
