"""Hot inner loops, each in a jitted and a vectorised-numpy flavour.

The public names at the bottom dispatch on ``_accel.USE_NUMBA``; the
``*_numba`` / ``*_numpy`` variants stay importable for tests and benchmarks.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit, prange

# 3-point rule, exact for quadratics: barycentric coordinates and weights / area
QUAD_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
QUAD_W = np.full(3, 1 / 3)


# ------------------------------------------------------------ point in polygon

def points_in_polygon_numpy(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    lo, hi = poly.min(0), poly.max(0)
    out = np.zeros(len(pts), dtype=np.bool_)
    cand = np.nonzero((pts >= lo).all(1) & (pts <= hi).all(1))[0]
    if len(cand) == 0:
        return out
    x, y = pts[cand, 0:1], pts[cand, 1:2]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    cond = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    out[cand] = ((cond & (x < xc)).sum(axis=1) % 2).astype(np.bool_)
    return out


@njit
def points_in_polygon_numba(pts, poly):
    n = pts.shape[0]
    m = poly.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    xmin = poly[:, 0].min()
    xmax = poly[:, 0].max()
    ymin = poly[:, 1].min()
    ymax = poly[:, 1].max()
    for i in range(n):
        x = pts[i, 0]
        y = pts[i, 1]
        if x < xmin or x > xmax or y < ymin or y > ymax:
            continue
        inside = False
        for j in range(m):
            x0 = poly[j, 0]
            y0 = poly[j, 1]
            x1 = poly[(j + 1) % m, 0]
            y1 = poly[(j + 1) % m, 1]
            if (y0 > y) != (y1 > y):
                xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
                if x < xc:
                    inside = not inside
        out[i] = inside
    return out


# ------------------------------------------------------------ element matrices
#
# Local unknowns per triangle: three edge circulations (local edges 0-1, 1-2,
# 2-0, oriented by local node order) followed by three nodal values of H_w.
# Mass uses the permeability tensor mu * (J^T J)^-1, curl-curl uses
# rho * J^T J; both tensors are evaluated at the quadrature points.

def element_matrices_numpy(xy: np.ndarray, k: float, mu: float, rho: np.ndarray):
    """Return ``(M, K)`` of shape (T, 6, 6) for triangle vertex coords ``xy`` (T, 3, 2).

    ``rho`` holds one resistivity per triangle; zero disables the curl term.
    """
    T = xy.shape[0]
    d1 = xy[:, 1] - xy[:, 0]
    d2 = xy[:, 2] - xy[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    # gradients of barycentric coordinates, (T, 3, 2)
    g = np.empty((T, 3, 2))
    for a in range(3):
        p, q = xy[:, (a + 1) % 3], xy[:, (a + 2) % 3]
        g[:, a, 0] = (p[:, 1] - q[:, 1]) / (2 * area)
        g[:, a, 1] = (q[:, 0] - p[:, 0]) / (2 * area)

    M = np.zeros((T, 6, 6))
    K = np.zeros((T, 6, 6))
    curl = np.zeros((T, 6, 3))
    for e, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
        curl[:, e, 2] = 2 * (g[:, a, 0] * g[:, b, 1] - g[:, a, 1] * g[:, b, 0])
    for n in range(3):
        curl[:, 3 + n, 0] = g[:, n, 1]
        curl[:, 3 + n, 1] = -g[:, n, 0]

    kk = k * k
    for lam, wq in zip(QUAD_BARY, QUAD_W):
        pos = np.einsum("a,tac->tc", lam, xy)
        u, v = pos[:, 0], pos[:, 1]
        Tinv = np.zeros((T, 3, 3))
        Tinv[:, 0, 0] = 1 + kk * v * v
        Tinv[:, 1, 1] = 1 + kk * u * u
        Tinv[:, 0, 1] = Tinv[:, 1, 0] = -kk * u * v
        Tinv[:, 0, 2] = Tinv[:, 2, 0] = k * v
        Tinv[:, 1, 2] = Tinv[:, 2, 1] = -k * u
        Tinv[:, 2, 2] = 1.0
        Tm = np.zeros((T, 3, 3))
        Tm[:, 0, 0] = Tm[:, 1, 1] = 1.0
        Tm[:, 0, 2] = Tm[:, 2, 0] = -k * v
        Tm[:, 1, 2] = Tm[:, 2, 1] = k * u
        Tm[:, 2, 2] = 1 + kk * (u * u + v * v)

        phi = np.zeros((T, 6, 3))
        for e, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
            phi[:, e, :2] = lam[a] * g[:, b] - lam[b] * g[:, a]
        for n in range(3):
            phi[:, 3 + n, 2] = lam[n]
        w = (wq * area)[:, None, None]
        M += w * np.einsum("tic,tcd,tjd->tij", phi, Tinv, phi)
        K += w * np.einsum("tic,tcd,tjd->tij", curl, Tm, curl)
    M *= mu
    K *= rho[:, None, None]
    # exact symmetry
    M = 0.5 * (M + M.transpose(0, 2, 1))
    K = 0.5 * (K + K.transpose(0, 2, 1))
    return M, K


@njit(parallel=True)
def element_matrices_numba(xy, k, mu, rho):
    T = xy.shape[0]
    M = np.zeros((T, 6, 6))
    K = np.zeros((T, 6, 6))
    bary = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
    ea = np.array([0, 1, 2])
    eb = np.array([1, 2, 0])
    kk = k * k
    for t in prange(T):
        x0, y0 = xy[t, 0, 0], xy[t, 0, 1]
        area = 0.5 * ((xy[t, 1, 0] - x0) * (xy[t, 2, 1] - y0) - (xy[t, 1, 1] - y0) * (xy[t, 2, 0] - x0))
        g = np.empty((3, 2))
        for a in range(3):
            p = (a + 1) % 3
            q = (a + 2) % 3
            g[a, 0] = (xy[t, p, 1] - xy[t, q, 1]) / (2 * area)
            g[a, 1] = (xy[t, q, 0] - xy[t, p, 0]) / (2 * area)
        curl = np.zeros((6, 3))
        for e in range(3):
            a = ea[e]
            b = eb[e]
            curl[e, 2] = 2 * (g[a, 0] * g[b, 1] - g[a, 1] * g[b, 0])
        for n in range(3):
            curl[3 + n, 0] = g[n, 1]
            curl[3 + n, 1] = -g[n, 0]
        phi = np.zeros((6, 3))
        Ti = np.zeros((3, 3))
        Tm = np.zeros((3, 3))
        Mt = np.zeros((6, 6))
        Kt = np.zeros((6, 6))
        for qp in range(3):
            u = 0.0
            v = 0.0
            for a in range(3):
                u += bary[qp, a] * xy[t, a, 0]
                v += bary[qp, a] * xy[t, a, 1]
            Ti[0, 0] = 1 + kk * v * v
            Ti[1, 1] = 1 + kk * u * u
            Ti[0, 1] = -kk * u * v
            Ti[1, 0] = Ti[0, 1]
            Ti[0, 2] = k * v
            Ti[2, 0] = Ti[0, 2]
            Ti[1, 2] = -k * u
            Ti[2, 1] = Ti[1, 2]
            Ti[2, 2] = 1.0
            Tm[0, 0] = 1.0
            Tm[1, 1] = 1.0
            Tm[0, 1] = 0.0
            Tm[1, 0] = 0.0
            Tm[0, 2] = -k * v
            Tm[2, 0] = Tm[0, 2]
            Tm[1, 2] = k * u
            Tm[2, 1] = Tm[1, 2]
            Tm[2, 2] = 1 + kk * (u * u + v * v)
            for e in range(3):
                a = ea[e]
                b = eb[e]
                phi[e, 0] = bary[qp, a] * g[b, 0] - bary[qp, b] * g[a, 0]
                phi[e, 1] = bary[qp, a] * g[b, 1] - bary[qp, b] * g[a, 1]
            for n in range(3):
                phi[3 + n, 2] = bary[qp, n]
            w = area / 3.0
            for i in range(6):
                for j in range(6):
                    sm = 0.0
                    sk = 0.0
                    for c in range(3):
                        for d in range(3):
                            sm += phi[i, c] * Ti[c, d] * phi[j, d]
                            sk += curl[i, c] * Tm[c, d] * curl[j, d]
                    Mt[i, j] += w * sm
                    Kt[i, j] += w * sk
        for i in range(6):
            for j in range(6):
                M[t, i, j] = mu * 0.5 * (Mt[i, j] + Mt[j, i])
                K[t, i, j] = rho[t] * 0.5 * (Kt[i, j] + Kt[j, i])
    return M, K


# ------------------------------------------------------------ CSR mat-vec

def csr_matvec_numpy(indptr, indices, data, x):
    rows = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    return np.bincount(rows, weights=(data * x[indices]).real, minlength=len(indptr) - 1) + 1j * np.bincount(
        rows, weights=(data * x[indices]).imag, minlength=len(indptr) - 1
    )


@njit
def csr_matvec_numba(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    y = np.zeros(n, dtype=np.complex128)
    for i in range(n):
        acc = 0j
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        y[i] = acc
    return y


if USE_NUMBA:
    points_in_polygon = points_in_polygon_numba
    element_matrices = element_matrices_numba
    csr_matvec = csr_matvec_numba
else:
    points_in_polygon = points_in_polygon_numpy
    element_matrices = element_matrices_numpy
    csr_matvec = csr_matvec_numpy
