"""Compare the compiled and pure-Python kernels (Delaunay and CST assembly).

Usage: python benchmarks/bench_kernels.py [--sizes 20 50 100] [--repeat 3]

Prints wall-clock times per backend and checks that both give identical
triangulations and assembly results that agree to roundoff.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from mdem import _pykernels, kernels
from mdem.geometry import hilbert_order
from mdem.fem import FemMesh
from mdem.mechanics import MaterialParams

try:
    from mdem import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None


def best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def grid(n):
    xs = np.linspace(0.0, 1.0, n)
    X, Y = np.meshgrid(xs, xs)
    return np.column_stack([X.ravel(), Y.ravel()])


def cst_inputs(pts, tris, rng, h):
    mesh = FemMesh(pts, tris, np.array([0, 1]), np.zeros(2))
    keep = mesh.areas > 0.1 * h * h  # drop boundary slivers, as triangulate() does
    mesh = FemMesh(pts, tris[keep], np.array([0, 1]), np.zeros(2))
    # a 5% stretch plus noise small enough to keep every element uninverted
    u = np.column_stack([0.05 * pts[:, 0], np.zeros(len(pts))]) + 0.02 * h * rng.standard_normal((len(pts), 2))
    return mesh.grads, mesh.areas, mesh.elements, u


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[20, 50, 100])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; only the Python backend is available")
    mat = MaterialParams.from_engineering(1000.0, 0.3)
    lam, mu = mat.lam, mat.mu
    rng = np.random.default_rng(0)
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':>10} {'grid':>8} {'python [s]':>12} {'cython [s]':>12} {'speedup':>9}  agree")
    for n in args.sizes:
        pts = grid(n) + 1e-3 * rng.standard_normal((n * n, 2)) / n
        order = hilbert_order(pts)
        tp, tri_py = best_of(lambda: _pykernels.delaunay(pts, order), args.repeat)
        if _ckernels is not None:
            tc, tri_c = best_of(lambda: _ckernels.delaunay(pts, order), args.repeat)
            same = np.array_equal(tri_py, tri_c)
            print(f"{'delaunay':>10} {n:>4}x{n:<3} {tp:12.4f} {tc:12.4f} {tp / tc:9.1f}  {same}")
        else:
            print(f"{'delaunay':>10} {n:>4}x{n:<3} {tp:12.4f} {'-':>12} {'-':>9}  -")
        grads, areas, elems, u = cst_inputs(pts, tri_py, rng, 1.0 / (n - 1))
        tp, out_py = best_of(lambda: _pykernels.assemble_cst(grads, areas, elems, u, lam, mu), args.repeat)
        if _ckernels is not None:
            tc, out_c = best_of(lambda: _ckernels.assemble_cst(grads, areas, elems, u, lam, mu), args.repeat)
            same = all(np.linalg.norm(a - b) <= 1e-12 * max(np.linalg.norm(a), 1.0) for a, b in zip(out_py, out_c))
            print(f"{'cst':>10} {n:>4}x{n:<3} {tp:12.4f} {tc:12.4f} {tp / tc:9.1f}  {same}")
        else:
            print(f"{'cst':>10} {n:>4}x{n:<3} {tp:12.4f} {'-':>12} {'-':>9}  -")


if __name__ == "__main__":
    main()
