import numpy as np
import pytest

from ltlsurf._backend import available_backends
from ltlsurf.mesh import TriMesh

ICOSAHEDRON_OBJ = """\
v 0 1 1.618033988749895
v 0 -1 1.618033988749895
v 0 1 -1.618033988749895
v 0 -1 -1.618033988749895
v 1 1.618033988749895 0
v -1 1.618033988749895 0
v 1 -1.618033988749895 0
v -1 -1.618033988749895 0
v 1.618033988749895 0 1
v -1.618033988749895 0 1
v 1.618033988749895 0 -1
v -1.618033988749895 0 -1
f 1 2 9
f 1 10 2
f 1 9 5
f 1 5 6
f 1 6 10
f 2 7 9
f 2 8 7
f 2 10 8
f 3 4 12
f 3 11 4
f 3 5 11
f 3 6 5
f 3 12 6
f 4 11 7
f 4 7 8
f 4 8 12
f 5 9 11
f 6 12 10
f 7 11 9
f 8 10 12
"""


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


def planar_grid(n: int = 7, spacing: float = 1.0, diagonal: bool = True, z=None) -> TriMesh:
    """Regular n x n grid in the z=0 plane (or z = z(x, y)), split into triangles.

    With ``diagonal=False`` alternating diagonals give a 4-valent/8-valent pattern.
    """
    xs = np.arange(n) * spacing
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    Z = np.zeros_like(X) if z is None else z(X, Y)
    verts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    faces = []
    for i in range(n - 1):
        for j in range(n - 1):
            a, b, c, d = i * n + j, (i + 1) * n + j, (i + 1) * n + j + 1, i * n + j + 1
            if diagonal or (i + j) % 2 == 0:
                faces += [(a, b, c), (a, c, d)]
            else:
                faces += [(a, b, d), (b, c, d)]
    return TriMesh(verts, faces)


def grid_index(n, i, j):
    return i * n + j


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
