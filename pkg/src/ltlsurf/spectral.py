"""Eigenpairs of the (nonsymmetric) assembled operators, clustering of
eigenvalues into multiplicities and eigenfunction subspace errors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .operator import SparseOperator

RESIDUAL_BOUND = 1e-8
DENSE_LIMIT = 800


@dataclass(frozen=True)
class Cluster:
    value: float
    members: list[int]
    multiplicity: int


@dataclass
class EigenResult:
    """Eigenpairs sorted by ``|lambda|`` ascending.

    Attributes
    ----------
    eigenvalues : complex ndarray
    eigenvectors : (n, count) real ndarray
        Real parts after rotating each vector's phase so its largest entry
        is real; ``vector_imag`` records the discarded imaginary norm.
    residuals : ndarray
        ``|A x - lambda x| / |x|`` of the complex pairs, recomputed with a
        plain matrix-vector product.
    clusters : list of Cluster
    converged : bool
        False when the iterative solver stopped early (partial result).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    clusters: list[Cluster]
    vector_imag: np.ndarray
    converged: bool = True

    @property
    def values(self) -> np.ndarray:
        """Real parts of the eigenvalues."""
        return self.eigenvalues.real

    @property
    def residual_max(self) -> float:
        return float(self.residuals.max(initial=0.0))

    @property
    def im_leakage(self) -> np.ndarray:
        """``|Im lambda| / |lambda|`` per eigenvalue (0 for an exact zero)."""
        mag = np.abs(self.eigenvalues)
        return np.where(mag > 0, np.abs(self.eigenvalues.imag) / np.where(mag > 0, mag, 1.0), 0.0)

    @property
    def im_leakage_max(self) -> float:
        return float(self.im_leakage.max(initial=0.0))

    @property
    def certified(self) -> bool:
        return self.converged and self.residual_max <= RESIDUAL_BOUND

    def nonzero_clusters(self, zero_tol: float = 1e-6) -> list[Cluster]:
        """Clusters other than the zero mode (``|value| <= zero_tol``)."""
        return [c for c in self.clusters if abs(c.value) > zero_tol]

    def to_json(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.values],
            "clusters": [{"value": c.value, "multiplicity": c.multiplicity} for c in self.clusters],
            "residual_max": self.residual_max,
            "im_leakage_max": self.im_leakage_max,
        }


def cluster_eigenvalues(values, tol: float | None = None) -> list[Cluster]:
    """Greedy gap clustering of sorted real values.

    A value joins the current cluster when it lies within `tol` of the
    previous value. The default tolerance is ``max(0.05, 0.02 |mean|)`` of
    the current cluster. Representatives are cluster means.
    """
    vals = np.asarray(values, dtype=float)
    clusters: list[list[int]] = []
    for i, v in enumerate(vals):
        if clusters:
            cur = clusters[-1]
            t = tol if tol is not None else max(0.05, 0.02 * abs(float(vals[cur].mean())))
            if abs(v - vals[cur[-1]]) <= t:
                cur.append(i)
                continue
        clusters.append([i])
    return [Cluster(float(vals[c].mean()), c, len(c)) for c in clusters]


def _phase_real(x):
    k = np.argmax(np.abs(x), axis=0)
    piv = x[k, np.arange(x.shape[1])]
    x = x * (np.conj(piv) / np.abs(piv))[None, :]
    return x


def eigenpairs(op: SparseOperator, count: int, sigma: float = 1.0, seed: int = 0,
               tol_cluster: float | None = None, margin: int = 6) -> EigenResult:
    """The `count` eigenvalues of smallest magnitude and their eigenvectors.

    Small operators are solved densely; larger ones by shift-invert Arnoldi
    around `sigma` (positive, so that for a nonpositive spectrum the
    distance to `sigma` orders eigenvalues like their magnitude). A few
    extra eigenvalues are computed so that the `count` smallest are not
    cut off by the shift. Residuals are certified independently.
    """
    a = op.matrix
    n = a.shape[0]
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}]")
    converged = True
    if n <= DENSE_LIMIT or count + margin >= n - 1:
        w, v = scipy.linalg.eig(a.toarray())
    else:
        k = min(count + margin, n - 2)
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            w, v = spla.eigs(a.tocsc(), k=k, sigma=sigma, which="LM", v0=v0, tol=0)
        except spla.ArpackNoConvergence as exc:
            w, v = exc.eigenvalues, exc.eigenvectors
            converged = False
    order = np.lexsort((w.imag, w.real, np.round(np.abs(w), 12)))
    order = order[:count]
    w, v = w[order], v[:, order]
    v = _phase_real(v)
    norms = np.linalg.norm(v, axis=0)
    res = np.linalg.norm(a @ v - v * w[None, :], axis=0) / norms
    imag = np.linalg.norm(v.imag, axis=0) / norms
    vecs = v.real / np.linalg.norm(v.real, axis=0)[None, :]
    vals_sorted = w.real
    return EigenResult(w, vecs, res, cluster_eigenvalues(vals_sorted, tol_cluster), imag, converged)


# ----------------------------------------------------------- subspace error


@dataclass(frozen=True)
class SubspaceError:
    n: int
    value: float


def subspace_align_error(reference_basis, computed, n: int = 0) -> SubspaceError:
    """Largest l-infinity distance from a computed vector to the reference span.

    Each computed vector is scaled to unit max norm, projected onto the span
    of `reference_basis` by least squares, and the max-norm residual taken.

    Parameters
    ----------
    reference_basis : (k, nv) array_like
        Analytic eigenfunctions sampled at the vertices.
    computed : (m, nv) array_like
        Computed eigenvectors of the matching cluster.
    """
    ref = np.atleast_2d(np.asarray(reference_basis, dtype=float))
    comp = np.atleast_2d(np.asarray(computed, dtype=float))
    if ref.size == 0 or comp.size == 0:
        raise ValueError("reference and computed sets must be nonempty")
    if ref.shape[1] != comp.shape[1]:
        raise ValueError(f"vertex dimensions differ: {ref.shape[1]} vs {comp.shape[1]}")
    worst = 0.0
    for phi in comp:
        peak = np.abs(phi).max()
        if peak == 0:
            raise ValueError("computed vector is zero")
        phi = phi / peak
        coef, *_ = np.linalg.lstsq(ref.T, phi, rcond=None)
        worst = max(worst, float(np.abs(ref.T @ coef - phi).max()))
    return SubspaceError(n, worst)
