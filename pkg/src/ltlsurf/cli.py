"""Command-line interface: ``ltlsurf <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import analytic
from .harness import STUDIES, StudyError, convergence_study, study_config
from .highorder import vertex_invariants
from .mesh import NeighborhoodSpec, generate_mesh, load_mesh, mesh_size, write_off
from .operator import (
    DivergenceError,
    assemble_jet_laplacian,
    assemble_laplacian,
    diffusion_solve,
    read_operator,
    write_operator,
)
from .patches import build_patches
from .spectral import eigenpairs


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _read_column(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=1, dtype=float)


def _spec(args) -> NeighborhoodSpec:
    return NeighborhoodSpec(args.ring, args.min_count)


def cmd_generate(args) -> int:
    params = {}
    if args.method:
        params["method"] = args.method
    if args.inner is not None:
        params["inner"] = args.inner
    if args.outer is not None:
        params["outer"] = args.outer
    mesh = generate_mesh(args.kind, params, args.edge)
    write_off(mesh, args.out)
    print(f"{args.kind}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, size {mesh_size(mesh):.6g}")
    return 0


def cmd_laplacian(args) -> int:
    mesh = load_mesh(args.mesh)
    spec = _spec(args)
    mode = "dirichlet_zero" if args.dirichlet else "none"
    if args.degree is None:
        op = assemble_laplacian(mesh, spec, boundary_mode=mode)
    else:
        op = assemble_jet_laplacian(mesh, args.degree, spec, boundary_mode=mode)
    write_operator(op, args.out)
    if args.dump_frames or args.dump_stencils:
        ps = build_patches(mesh, spec, degree=args.degree, vertices=op.index_map)
        if args.dump_frames:
            rows = [[int(v), *ps.frames[b].ravel()] for b, v in enumerate(ps.vertices)]
            hdr = ["vertex"] + [f"{a}_{c}" for a in ("e1", "e2", "n") for c in "xyz"]
            _write_rows(args.dump_frames, hdr, rows)
        if args.dump_stencils:
            col = 4 if args.degree is None else None
            rows = []
            for b, v in enumerate(ps.vertices):
                sl = ps.block(b)
                for p in range(sl.start, sl.stop):
                    x, y = ps.coords[p]
                    w = ps.pinv[p, col] if col is not None else np.nan
                    rows.append([int(v), int(ps.neighbors[p]), x, y, float(w), int(ps.ring[b])])
            _write_rows(args.dump_stencils, ["vertex", "neighbor", "x", "y", "weight", "ring"], rows)
    print(f"operator {op.kind}: dim {op.dim}, nnz {op.matrix.nnz}, max residual {op.residual.max():.3g}")
    return 0


def cmd_eigen(args) -> int:
    op = read_operator(args.op)
    res = eigenpairs(op, args.count, sigma=args.sigma, tol_cluster=args.tol_cluster)
    body = res.to_json()
    body["certified"] = res.certified
    body["converged"] = res.converged
    Path(args.out).write_text(json.dumps(body, indent=2) + "\n")
    if args.vectors:
        np.savetxt(args.vectors, res.eigenvectors, delimiter=",", fmt="%.17g")
    for c in res.clusters:
        print(f"{c.value:.6f} x{c.multiplicity}")
    if not res.certified:
        print(f"warning: residual {res.residual_max:.3g} exceeds the certification bound", file=sys.stderr)
        return 2
    return 0


def cmd_curvature(args) -> int:
    mesh = load_mesh(args.mesh)
    inv = vertex_invariants(mesh, args.degree, _spec(args))
    hdr = ["vertex", "nx", "ny", "nz", "gaussian", "mean"]
    cols = [inv["vertices"], *inv["normal"].T, inv["gaussian"], inv["mean"]]
    if args.model:
        params = {k: getattr(args, k) for k in ("inner", "outer") if getattr(args, k) is not None}
        ref = (analytic.torus_reference(mesh.vertices, params) if args.model == "torus"
               else analytic.sphere_reference(mesh.vertices))
        hdr += ["gaussian_ref", "mean_ref"]
        cols += [ref["gaussian"], ref["mean"]]
    rows = [[int(r[0]), *r[1:]] for r in zip(*cols)]
    _write_rows(args.out, hdr, rows)
    print(f"{len(rows)} vertices written to {args.out}")
    return 0


def cmd_diffuse(args) -> int:
    op = read_operator(args.op)
    if args.u0 is not None:
        u0 = _read_column(args.u0)
    else:
        if args.mesh is None:
            raise SystemExit("--u0-coord needs --mesh")
        mesh = load_mesh(args.mesh)
        u0 = mesh.vertices[op.index_map, "xyz".index(args.u0_coord)]
    f = _read_column(args.source) if args.source else None
    try:
        u = diffusion_solve(op, u0, f, dt=args.dt, steps=args.steps, scheme=args.scheme)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    np.savetxt(args.out, u, fmt="%.17g")
    print(f"max |u| after {args.steps} steps: {np.abs(u).max():.6g}")
    return 0


def cmd_converge(args) -> int:
    cfg = study_config(args.study, _floats(args.sizes), degree=args.degree, index=args.index,
                       ring=args.ring, min_count=args.min_count)
    if args.first_order:
        cfg.degree = None
    try:
        report = convergence_study(cfg)
    except StudyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.write_text(report.to_csv())
    out.with_suffix(".json").write_text(report.to_json() + "\n")
    sys.stdout.write(report.to_csv())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ltlsurf", description="Tangential-lifting Laplace-Beltrami toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def ring_opts(sp):
        sp.add_argument("--ring", type=int, default=2, help="ring numerator j of the j/2-ring (default 2)")
        sp.add_argument("--min-count", type=int, default=5, help="minimum neighbors per stencil")

    g = sub.add_parser("generate", help="mesh an analytic test surface (OFF output)")
    g.add_argument("--kind", required=True, choices=["sphere", "hemisphere", "torus", "dumbbell", "wave"])
    g.add_argument("--edge", type=float, required=True, help="target edge length")
    g.add_argument("--method", choices=["subdivision", "geodesic"])
    g.add_argument("--inner", type=float)
    g.add_argument("--outer", type=float)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    lap = sub.add_parser("laplacian", help="assemble a Laplace-Beltrami operator (MatrixMarket output)")
    lap.add_argument("--mesh", required=True)
    ring_opts(lap)
    lap.add_argument("--degree", type=int, help="jet degree; omit for the first-order operator")
    lap.add_argument("--dirichlet", action="store_true", help="drop boundary rows and columns")
    lap.add_argument("--out", required=True)
    lap.add_argument("--dump-frames")
    lap.add_argument("--dump-stencils")
    lap.set_defaults(func=cmd_laplacian)

    e = sub.add_parser("eigen", help="smallest-magnitude eigenpairs of an operator")
    e.add_argument("--op", required=True)
    e.add_argument("--count", type=int, default=20)
    e.add_argument("--sigma", type=float, default=1.0)
    e.add_argument("--tol-cluster", type=float)
    e.add_argument("--out", required=True)
    e.add_argument("--vectors", help="CSV file for the eigenvectors (one column each)")
    e.set_defaults(func=cmd_eigen)

    c = sub.add_parser("curvature", help="normals and curvatures from jet fits")
    c.add_argument("--mesh", required=True)
    c.add_argument("--degree", type=int, default=4)
    ring_opts(c)
    c.add_argument("--model", choices=["sphere", "torus"], help="append analytic reference columns")
    c.add_argument("--inner", type=float)
    c.add_argument("--outer", type=float)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_curvature)

    d = sub.add_parser("diffuse", help="time-step u_t = L u + f")
    d.add_argument("--op", required=True)
    src = d.add_mutually_exclusive_group(required=True)
    src.add_argument("--u0", help="initial values, one per line")
    src.add_argument("--u0-coord", choices=["x", "y", "z"], help="use a vertex coordinate (needs --mesh)")
    d.add_argument("--mesh")
    d.add_argument("--source", help="source term f, one value per line")
    d.add_argument("--dt", type=float, required=True)
    d.add_argument("--steps", type=int, required=True)
    d.add_argument("--scheme", choices=["explicit", "implicit"], default="implicit")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_diffuse)

    cv = sub.add_parser("converge", help="run a convergence study (CSV plus JSON mirror)")
    cv.add_argument("--study", required=True, choices=sorted(STUDIES))
    cv.add_argument("--sizes", required=True, help="comma-separated target edge lengths")
    cv.add_argument("--degree", type=int)
    cv.add_argument("--first-order", action="store_true", help="use the first-order operator")
    cv.add_argument("--index", type=int, help="eigenvalue cluster (sphere) or eigenvalue (hemisphere)")
    ring_opts(cv)
    cv.add_argument("--out", required=True)
    cv.set_defaults(func=cmd_converge)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
