"""Time the jitted kernels against their numpy versions.

    python benchmarks/bench_kernels.py [--triangles 50000] [--repeat 5]

Inputs come from a real reference-cable mesh when ``--mesh-h`` is given,
otherwise from random triangles of similar size.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np
import scipy.sparse as sp

from helicable import kernels


def random_triangles(n, seed=0):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(-0.04, 0.04, (n, 1, 2)) + rng.uniform(-5e-4, 5e-4, (n, 3, 2))
    d1, d2 = xy[:, 1] - xy[:, 0], xy[:, 2] - xy[:, 0]
    cw = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    xy[cw] = xy[cw][:, [0, 2, 1]]
    return xy


def mesh_triangles(h):
    from helicable import pipeline, section
    from helicable.mesher import generate_mesh

    plan = pipeline.reference_plan()
    m = generate_mesh(section.build_symmetry_cell(plan, section.samples_for_spacing(plan, h)), h)
    return m.nodes[m.triangles]


def best(fn, repeat):
    fn()  # warm-up, includes jit compilation on first call
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--triangles", type=int, default=50_000)
    ap.add_argument("--mesh-h", type=float, help="use the reference cable mesh at this size")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    xy = mesh_triangles(args.mesh_h) if args.mesh_h else random_triangles(args.triangles)
    T = len(xy)
    rho = np.full(T, 1.72e-8)
    k, mu = 1 / 0.0318, 4e-7 * np.pi

    ang = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    poly = np.column_stack([0.03 + 0.005 * np.cos(ang), 0.005 * np.sin(ang)])
    pts = np.random.default_rng(1).uniform(-0.04, 0.04, (T, 2))

    # about twelve entries per row, like the assembled cable matrix
    n = 8 * T
    rng = np.random.default_rng(2)
    rows = np.repeat(np.arange(n), 12)
    cols = rng.integers(0, n, rows.size)
    A = sp.csr_matrix((rng.standard_normal(rows.size) + 1j, (rows, cols)), shape=(n, n))
    ip, ix, data = A.indptr, A.indices.astype(np.int64), A.data
    x = np.random.default_rng(3).standard_normal(n) + 0j

    cases = [
        ("element_matrices", lambda: kernels.element_matrices_numpy(xy, k, mu, rho),
         lambda: kernels.element_matrices_numba(xy, k, mu, rho)),
        ("points_in_polygon", lambda: kernels.points_in_polygon_numpy(pts, poly),
         lambda: kernels.points_in_polygon_numba(pts, poly)),
        ("csr_matvec", lambda: kernels.csr_matvec_numpy(ip, ix, data, x),
         lambda: kernels.csr_matvec_numba(ip, ix, data, x)),
    ]
    print(f"{T} triangles, {n} matrix rows, best of {args.repeat}")
    print(f"{'kernel':<20}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}  agree")
    for name, f_np, f_nb in cases:
        a, b = f_np(), f_nb()
        same = all(np.abs(u.astype(complex) - v).max() <= 1e-12 * np.abs(u).max() for u, v in
                   zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)))
        t_np, t_nb = best(f_np, args.repeat), best(f_nb, args.repeat)
        print(f"{name:<20}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}  {same}")


if __name__ == "__main__":
    main()
