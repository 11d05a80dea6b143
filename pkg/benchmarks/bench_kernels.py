"""Compiled vs pure-Python kernel timings.

Run ``python3 benchmarks/bench_kernels.py``. Times the batched per-vertex
pseudo-inverse and full operator assembly on torus meshes with both
backends, and reports the largest relative difference between them.
"""

import argparse
import time

import numpy as np

from ltlsurf._backend import FIRST_ORDER, MONOMIAL, available_backends, config_pinv
from ltlsurf.mesh import generate_mesh
from ltlsurf.operator import assemble_jet_laplacian, assemble_laplacian
from ltlsurf.patches import build_patches


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="0.1,0.05,0.025")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available")
    print(f"{'edge':>6} {'verts':>7} {'kernel':<22} " + " ".join(f"{b:>10}" for b in backends) + "   speedup  max rel diff")
    for edge in (float(s) for s in args.sizes.split(",")):
        mesh = generate_mesh("torus", {}, edge)
        cases = []
        for degree in (None, 4):
            ps = build_patches(mesh, degree=degree)
            xs = ps.coords[:, 0] / np.repeat(ps.radius, np.diff(ps.indptr))
            ys = ps.coords[:, 1] / np.repeat(ps.radius, np.diff(ps.indptr))
            kind = FIRST_ORDER if degree is None else MONOMIAL
            label = "pinv first-order" if degree is None else f"pinv degree {degree}"
            cases.append((label, lambda b, xs=xs, ys=ys, kind=kind, d=degree, ip=ps.indptr:
                           config_pinv(ip, xs, ys, kind, d or 0, backend=b)[0]))
        cases.append(("assemble first-order", lambda b: assemble_laplacian(mesh, backend=b).matrix))
        cases.append(("assemble degree 4", lambda b: assemble_jet_laplacian(mesh, 4, backend=b).matrix))
        for label, fn in cases:
            res = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
            line = f"{edge:>6} {mesh.n_vertices:>7} {label:<22} " + " ".join(f"{res[b][0]:>9.4f}s" for b in backends)
            if len(backends) == 2:
                a, p = res["compiled"][1], res["python"][1]
                if hasattr(a, "toarray"):
                    diff = abs(a - p).max() / abs(p).max()
                else:
                    diff = np.abs(a - p).max() / np.abs(p).max()
                line += f"   {res['python'][0] / res['compiled'][0]:7.1f}x  {diff:.2g}"
            print(line)


if __name__ == "__main__":
    main()
