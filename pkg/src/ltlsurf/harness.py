"""Convergence studies: error metrics, experimental orders of convergence and
the study runner behind the ``converge`` command."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import analytic
from .highorder import vertex_differentials, vertex_invariants
from .mesh import NeighborhoodSpec, generate_mesh, mesh_size
from .operator import apply_operator, assemble_jet_laplacian, assemble_laplacian
from .spectral import eigenpairs, subspace_align_error

NEAR_ZERO = 1e-8


class StudyError(RuntimeError):
    """A ladder point failed; the message names the rung."""


# ------------------------------------------------------------------- metrics


def reference_mask(reference, exclude=None, threshold: float = NEAR_ZERO) -> np.ndarray:
    """Boolean mask of vertices with ``|ref| >= threshold * max|ref|``, minus `exclude`."""
    ref = np.asarray(reference, dtype=float)
    mask = np.abs(ref) >= threshold * np.abs(ref).max(initial=0.0)
    mask &= np.abs(ref) > 0
    if exclude is not None:
        ex = np.asarray(sorted(exclude) if isinstance(exclude, (set, frozenset)) else exclude)
        if ex.dtype == bool:
            mask &= ~ex
        else:
            mask[ex.astype(np.int64)] = False
    return mask


def linf_relative_error(numeric, reference, mask=None) -> float:
    """``max |num - ref| / |ref|`` over the masked vertices.

    `mask` may be a boolean array, an index sequence or a set of vertex ids;
    by default vertices with near-zero reference are excluded.
    """
    num = np.asarray(numeric, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if num.shape != ref.shape:
        raise ValueError("numeric and reference differ in shape")
    if mask is None:
        sel = np.flatnonzero(reference_mask(ref))
    else:
        m = np.asarray(sorted(mask) if isinstance(mask, (set, frozenset)) else mask)
        sel = np.flatnonzero(m) if m.dtype == bool else m.astype(np.int64)
    if len(sel) == 0:
        raise ValueError("empty mask")
    if np.any(ref[sel] == 0):
        raise ValueError("reference vanishes on a masked vertex")
    return float((np.abs(num[sel] - ref[sel]) / np.abs(ref[sel])).max())


def eoc(errors, sizes) -> np.ndarray:
    """Pairwise orders ``log(e1/e2) / log(h1/h2)``; a zero error gives +inf."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(sizes, dtype=float)
    if e.shape != h.shape or e.ndim != 1 or len(e) < 2:
        raise ValueError("errors and sizes must be matching sequences of length >= 2")
    if np.any(h <= 0) or np.any(np.diff(h) >= 0):
        raise ValueError("sizes must be positive and strictly decreasing")
    if np.any(e < 0):
        raise ValueError("errors must be nonnegative")
    out = np.empty(len(e) - 1)
    for i in range(len(e) - 1):
        if e[i + 1] == 0:
            out[i] = math.inf
        elif e[i] == 0:
            out[i] = -math.inf
        else:
            out[i] = math.log(e[i] / e[i + 1]) / math.log(h[i] / h[i + 1])
    return out


def mean_order(orders) -> float:
    """Average of the finite orders (infinite sentinels excluded)."""
    o = np.asarray(orders, dtype=float)
    o = o[np.isfinite(o)]
    return float(o.mean()) if len(o) else math.nan


# ------------------------------------------------------------------- studies


@dataclass
class StudyConfig:
    """Description of one convergence study.

    Attributes
    ----------
    model : str
        Mesh kind passed to :func:`generate_mesh`.
    metric : str
        ``eigenvalue``, ``subspace``, ``laplacian_field``, ``normal``,
        ``gaussian`` or ``mean``.
    sizes : list of float
        Target edge lengths, coarse to fine.
    degree : int or None
        Jet degree; None selects the first-order operator.
    index : int
        Eigenvalue cluster (sphere) or eigenvalue (hemisphere), 1-based.
    rung_params : list of dict, optional
        Per-rung generator parameters overriding `mesh_params`.
    """

    model: str
    metric: str
    sizes: list[float]
    degree: int | None = None
    ring: int = 2
    min_count: int = 5
    index: int = 1
    count: int = 20
    mesh_params: dict = field(default_factory=dict)
    rung_params: list[dict] | None = None
    study: str = ""

    def spec(self) -> NeighborhoodSpec:
        return NeighborhoodSpec(self.ring, self.min_count)


@dataclass
class ConvergenceReport:
    """Errors per rung (mesh sizes descending) and pairwise EOC."""

    study: str
    sizes: list[float]
    errors: list[float]
    eoc: list[float]
    metadata: dict
    details: list[dict] = field(default_factory=list)

    @property
    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.sizes, self.errors))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["size", "error", "eoc"])
        for i, (h, e) in enumerate(self.rows):
            w.writerow([repr(float(h)), repr(float(e)), "" if i == 0 else repr(float(self.eoc[i - 1]))])
        return buf.getvalue()

    def to_json(self) -> str:
        def clean(x):
            if isinstance(x, float) and not math.isfinite(x):
                return str(x)
            return x
        body = {
            "study": self.study,
            "metadata": self.metadata,
            "rows": [{"size": h, "error": e} for h, e in self.rows],
            "eoc": [clean(float(x)) for x in self.eoc],
            "details": self.details,
        }
        return json.dumps(body, indent=2, sort_keys=True)


def _sphere_eigen_error(mesh, op, cfg, detail):
    res = eigenpairs(op, cfg.count)
    nz = res.nonzero_clusters()
    detail["clusters"] = [(c.value, c.multiplicity) for c in nz[:4]]
    detail["residual_max"] = res.residual_max
    if len(nz) < cfg.index:
        raise StudyError(f"only {len(nz)} nonzero clusters found")
    c = nz[cfg.index - 1]
    if cfg.metric == "eigenvalue":
        return abs(c.value - analytic.sphere_eigenvalue(cfg.index))
    ref = analytic.sphere_harmonics(mesh.vertices, cfg.index)
    return subspace_align_error(ref, res.eigenvectors[:, c.members].T, cfg.index).value


def _hemisphere_eigen_error(mesh, op, cfg, detail):
    count = max(cfg.index, 6)
    res = eigenpairs(op, count)
    target = analytic.hemisphere_dirichlet_eigenvalues(count)
    detail["eigenvalues"] = [float(v) for v in res.values]
    detail["residual_max"] = res.residual_max
    return abs(float(res.values[cfg.index - 1]) - target[cfg.index - 1])


def _operator(mesh, cfg, boundary_mode="none"):
    if cfg.degree is None:
        return assemble_laplacian(mesh, cfg.spec(), boundary_mode=boundary_mode)
    return assemble_jet_laplacian(mesh, cfg.degree, cfg.spec(), boundary_mode=boundary_mode)


def _geometry_reference(model, mesh, params):
    if model == "torus":
        return analytic.torus_reference(mesh.vertices, params)
    if model == "sphere":
        return analytic.sphere_reference(mesh.vertices)
    raise StudyError(f"no analytic geometry for model {model!r}")


def _rung_error(mesh, cfg, params, detail) -> float:
    metric, model = cfg.metric, cfg.model
    if metric in ("eigenvalue", "subspace"):
        if model == "sphere":
            return _sphere_eigen_error(mesh, _operator(mesh, cfg), cfg, detail)
        if model == "hemisphere" and metric == "eigenvalue":
            return _hemisphere_eigen_error(mesh, _operator(mesh, cfg, "dirichlet_zero"), cfg, detail)
        raise StudyError(f"metric {metric!r} is not defined for model {model!r}")
    if metric == "laplacian_field":
        interior = np.flatnonzero(~mesh.boundary_flags)
        if model == "wave":
            field_, ref = analytic.wave_field(mesh.vertices), analytic.wave_laplacian(mesh.vertices)
        elif model == "sphere":
            field_, ref = mesh.vertices[:, 2].copy(), -2.0 * mesh.vertices[:, 2]
        else:
            raise StudyError(f"no analytic Laplacian for model {model!r}")
        if cfg.degree is None:
            num = apply_operator(assemble_laplacian(mesh, cfg.spec()), field_)[interior]
        else:
            num = vertex_differentials(mesh, cfg.degree, field_, cfg.spec(), vertices=interior)[1]
        ref = ref[interior]
        return linf_relative_error(num, ref, reference_mask(ref))
    if metric in ("normal", "gaussian", "mean"):
        if cfg.degree is None or cfg.degree < 2:
            raise StudyError("geometric metrics need a jet degree >= 2")
        inv = vertex_invariants(mesh, cfg.degree, cfg.spec())
        ref = _geometry_reference(model, mesh, params)
        if metric == "normal":
            n = inv["normal"]
            n = n * np.sign(np.einsum("ij,ij->i", n, ref["normal"]))[:, None]
            return float(np.linalg.norm(n - ref["normal"], axis=1).max())
        if metric == "gaussian":
            return linf_relative_error(inv["gaussian"], ref["gaussian"])
        return linf_relative_error(np.abs(inv["mean"]), ref["mean"])
    raise StudyError(f"unknown metric {metric!r}")


def convergence_study(cfg: StudyConfig) -> ConvergenceReport:
    """Run generate, assemble or fit, and measure on every rung of the ladder."""
    if len(cfg.sizes) < 2:
        raise ValueError("a study needs at least two sizes")
    if cfg.rung_params is not None and len(cfg.rung_params) != len(cfg.sizes):
        raise ValueError("rung_params must match sizes in length")
    hs, errs, details = [], [], []
    for i, target in enumerate(cfg.sizes):
        params = dict(cfg.mesh_params)
        if cfg.rung_params is not None:
            params.update(cfg.rung_params[i])
        try:
            mesh = generate_mesh(cfg.model, params, target)
            detail = {"target": target, "n_vertices": mesh.n_vertices}
            err = _rung_error(mesh, cfg, params, detail)
        except StudyError as exc:
            raise StudyError(f"size {target}: {exc}") from exc
        except Exception as exc:  # annotate with the rung
            raise StudyError(f"size {target}: {type(exc).__name__}: {exc}") from exc
        h = mesh_size(mesh)
        detail["mesh_size"] = h
        hs.append(h)
        errs.append(float(err))
        details.append(detail)
    order = np.argsort(hs)[::-1]
    hs = [hs[i] for i in order]
    errs = [errs[i] for i in order]
    details = [details[i] for i in order]
    meta = {k: v for k, v in asdict(cfg).items() if k not in ("sizes",)}
    return ConvergenceReport(cfg.study or f"{cfg.model}-{cfg.metric}", hs, errs,
                             [float(x) for x in eoc(errs, hs)], meta, details)


STUDIES: dict[str, dict] = {
    "sphere-eigen": {"model": "sphere", "metric": "eigenvalue", "index": 1},
    "sphere-eigen2": {"model": "sphere", "metric": "eigenvalue", "index": 2},
    "sphere-subspace": {"model": "sphere", "metric": "subspace", "index": 1},
    "sphere-laplacian": {"model": "sphere", "metric": "laplacian_field"},
    "hemisphere-eigen": {"model": "hemisphere", "metric": "eigenvalue", "index": 1},
    "torus-gaussian": {"model": "torus", "metric": "gaussian", "degree": 4},
    "torus-mean": {"model": "torus", "metric": "mean", "degree": 4},
    "torus-normal": {"model": "torus", "metric": "normal", "degree": 4},
    "sphere-gaussian": {"model": "sphere", "metric": "gaussian", "degree": 4},
    "wave-laplacian": {"model": "wave", "metric": "laplacian_field", "degree": 4},
}


def study_config(name: str, sizes, **overrides) -> StudyConfig:
    """Registered study `name` with `sizes` and keyword overrides."""
    if name not in STUDIES:
        raise KeyError(f"unknown study {name!r}; choose from {sorted(STUDIES)}")
    base = dict(STUDIES[name])
    base.update({k: v for k, v in overrides.items() if v is not None})
    return StudyConfig(sizes=list(sizes), study=name, **base)
