"""Fields, losses, line samples and VTK output from a solved system.

Inside each triangle the in-plane field is the Whitney interpolant of the
three edge circulations and ``H_w`` the linear interpolant of the nodal
values; the reduced curl, and therefore ``J_uvw``, is constant per triangle.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .fem import DofMap, Excitation, barycentric_gradients, curl_uvw
from .geometry import HelixParams, MaterialSpec, metric_uv, pullback_current, pullback_field
from .kernels import QUAD_BARY, QUAD_W
from .mesh import INSULATOR, LOCAL_EDGES, Mesh2D
from .solver import SolveReport


class PointOutsideMesh(ValueError):
    pass


@dataclass
class SolveResult:
    """Solution at one frequency. Losses are time averages in W/m."""

    mesh: Mesh2D
    dofmap: DofMap
    helix: HelixParams
    material: MaterialSpec
    excitation: Excitation
    x: np.ndarray  # free dofs
    y: np.ndarray = field(init=False, repr=False)  # entity values: E circulations then N nodal H_w
    report: SolveReport | None = None
    loss_per_length: float = field(init=False)
    conductor_losses: np.ndarray = field(init=False)

    def __post_init__(self):
        self.y = self.dofmap.expand(self.x, self.excitation.currents)
        self.conductor_losses = conductor_losses(self)
        self.loss_per_length = float(self.conductor_losses.sum())

    @property
    def frequency(self) -> float:
        return self.excitation.frequency

    @property
    def shield_hw(self) -> complex:
        return self.dofmap.shield_hw(self.x)

    @cached_property
    def local_circulations(self) -> np.ndarray:
        """(T, 3) circulations along local edges 0->1, 1->2, 2->0."""
        m = self.mesh
        return self.y[m.tri_edges] * m.tri_edge_signs

    @cached_property
    def nodal_hw(self) -> np.ndarray:
        return self.y[len(self.mesh.edges):]

    @cached_property
    def triangle_curl(self) -> np.ndarray:
        """Reduced curl of H on every triangle, (T, 3)."""
        m = self.mesh
        return curl_uvw(m.nodes[m.triangles], self.local_circulations, self.nodal_hw[m.triangles])

    @cached_property
    def triangle_current(self) -> np.ndarray:
        """``J_uvw`` per triangle; exactly zero in the insulator."""
        J = self.triangle_curl.copy()
        J[self.mesh.tri_region == INSULATOR] = 0
        return J

    @cached_property
    def _locator(self):
        return _Locator(self.mesh)


def conductor_losses(res: SolveResult) -> np.ndarray:
    """Ohmic loss per conductor, ``1/2 int Re(rho T c . conj c) dA``.

    ``T = J^T J`` is sampled at the same three points used for assembly.
    """
    m = res.mesh
    k = res.helix.twist
    xy = m.nodes[m.triangles]
    c = res.triangle_curl
    area = np.abs(m.signed_areas)
    dens = np.zeros(m.n_triangles)
    for lam, wq in zip(QUAD_BARY, QUAD_W):
        uv = np.einsum("a,tac->tc", lam, xy)
        T = metric_uv(uv[:, 0], uv[:, 1], k)
        dens += wq * np.einsum("ti,tij,tj->t", c.conj(), T, c).real
    per_tri = 0.5 * res.material.resistivity * area * dens
    out = np.zeros(m.n_conductors)
    cond = m.tri_region >= 0
    np.add.at(out, m.tri_region[cond], per_tri[cond])
    return out


def conductor_currents(res: SolveResult) -> np.ndarray:
    """``int J_w dA`` over each conductor."""
    m = res.mesh
    out = np.zeros(m.n_conductors, dtype=complex)
    cond = m.tri_region >= 0
    np.add.at(out, m.tri_region[cond], res.triangle_current[cond, 2] * np.abs(m.signed_areas[cond]))
    return out


def losses(res: SolveResult) -> tuple[float, np.ndarray]:
    return res.loss_per_length, res.conductor_losses.copy()


# ------------------------------------------------------------ point location


class _Locator:
    """Walk through neighbouring triangles from the nearest centroid."""

    def __init__(self, m: Mesh2D):
        self.m = m
        self.xy = m.nodes[m.triangles]
        self.tree = cKDTree(self.xy.mean(axis=1))
        self.max_steps = 4 * int(np.sqrt(m.n_triangles)) + 16

    def bary(self, t: int, p) -> np.ndarray:
        a, b, c = self.xy[t]
        d = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / d
        l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / d
        return np.array([1 - l1 - l2, l1, l2])

    def locate(self, p, tol: float = 1e-10) -> int:
        p = np.asarray(p, dtype=float)
        _, t = self.tree.query(p)
        t = int(t)
        for _ in range(self.max_steps):
            lam = self.bary(t, p)
            worst = int(np.argmin(lam))
            if lam[worst] >= -tol:
                return t
            # the edge opposite node ``worst`` is local edge (worst + 1) % 3
            nb = self.m.neighbors[t, (worst + 1) % 3]
            if nb < 0:
                break
            t = int(nb)
        return self._brute(p, tol)

    def _brute(self, p, tol) -> int:
        a, b, c = self.xy[:, 0], self.xy[:, 1], self.xy[:, 2]
        d = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        l1 = ((p[0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (p[1] - a[:, 1]) * (c[:, 0] - a[:, 0])) / d
        l2 = ((b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0])) / d
        lo = np.minimum(np.minimum(l1, l2), 1 - l1 - l2)
        t = int(np.argmax(lo))
        if lo[t] < -tol:
            raise PointOutsideMesh(f"point ({p[0]:.6g}, {p[1]:.6g}) lies outside the mesh")
        return t


def locate(res: SolveResult, pts) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    return np.array([res._locator.locate(p) for p in pts], dtype=np.int64)


def _as_points(p):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 2:
        raise ValueError("points must have two coordinates (u, v)")
    return p.reshape(-1, 2), p.ndim == 1


def eval_H_uvw(res: SolveResult, p) -> np.ndarray:
    """``(H_u, H_v, H_w)`` at one point (2,) or many (n, 2)."""
    pts, single = _as_points(p)
    tris = locate(res, pts)
    m = res.mesh
    xy = m.nodes[m.triangles[tris]]
    g, _ = barycentric_gradients(xy)
    lam = np.array([res._locator.bary(t, q) for t, q in zip(tris, pts)])
    circ = res.local_circulations[tris]
    out = np.zeros((len(pts), 3), dtype=complex)
    for e, (a, b) in enumerate(LOCAL_EDGES):
        w = lam[:, a, None] * g[:, b] - lam[:, b, None] * g[:, a]
        out[:, :2] += circ[:, e, None] * w
    out[:, 2] = (lam * res.nodal_hw[m.triangles[tris]]).sum(axis=1)
    return out[0] if single else out


def eval_J_uvw(res: SolveResult, p) -> np.ndarray:
    pts, single = _as_points(p)
    out = res.triangle_current[locate(res, pts)]
    return out[0] if single else out


def to_cartesian_fields(res: SolveResult, p):
    """``(H_xyz, J_xyz)`` in the plane z = 0, where (x, y) = (u, v)."""
    pts, single = _as_points(p)
    H = eval_H_uvw(res, pts)
    J = eval_J_uvw(res, pts)
    q = np.column_stack([pts, np.zeros(len(pts))])
    Hx = pullback_field(H, q, res.helix)
    Jx = pullback_current(J, q, res.helix)
    return (Hx[0], Jx[0]) if single else (Hx, Jx)


# ------------------------------------------------------------ line samples


@dataclass(frozen=True)
class LineSample:
    s: np.ndarray  # distance from p0 in metres, increasing
    points: np.ndarray  # (n, 2)
    H: np.ndarray  # (n, 3) complex, Cartesian
    J: np.ndarray  # (n, 3) complex, Cartesian

    @property
    def abs_J(self) -> np.ndarray:
        return np.sqrt((np.abs(self.J) ** 2).sum(axis=1))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["s", "re_hx", "im_hx", "re_hy", "im_hy", "re_hz", "im_hz", "abs_j"])
            for s, H, j in zip(self.s, self.H, self.abs_J):
                row = [s]
                for c in H:
                    row += [c.real, c.imag]
                row.append(j)
                w.writerow([f"{v:.12e}" for v in row])


def sample_line(res: SolveResult, p0, p1, n: int) -> LineSample:
    if n < 2:
        raise ValueError("need at least two samples")
    p0, p1 = np.asarray(p0, dtype=float), np.asarray(p1, dtype=float)
    L = float(np.linalg.norm(p1 - p0))
    if L == 0:
        raise ValueError("line endpoints coincide")
    s = np.linspace(0.0, L, n)
    pts = p0 + (s / L)[:, None] * (p1 - p0)
    H, J = to_cartesian_fields(res, pts)
    return LineSample(s, pts, H, J)


# ------------------------------------------------------------ VTK


def nodal_H_uvw(res: SolveResult) -> np.ndarray:
    """Area-weighted average of the element fields at every node."""
    m = res.mesh
    g, area = barycentric_gradients(m.nodes[m.triangles])
    area = np.abs(area)
    circ = res.local_circulations
    acc = np.zeros((m.n_nodes, 2), dtype=complex)
    wsum = np.zeros(m.n_nodes)
    for a in range(3):
        # at vertex a only the two edges touching it contribute
        val = np.zeros((m.n_triangles, 2), dtype=complex)
        for e, (i, j) in enumerate(LOCAL_EDGES):
            if i == a:
                val += circ[:, e, None] * g[:, j]
            elif j == a:
                val -= circ[:, e, None] * g[:, i]
        np.add.at(acc, m.triangles[:, a], area[:, None] * val)
        np.add.at(wsum, m.triangles[:, a], area)
    out = np.zeros((m.n_nodes, 3), dtype=complex)
    out[:, :2] = acc / wsum[:, None]
    out[:, 2] = res.nodal_hw
    return out


def export_vtk(res: SolveResult, path) -> None:
    """Legacy ASCII unstructured grid with Cartesian H at nodes and J_w per cell."""
    m = res.mesh
    q = np.column_stack([m.nodes, np.zeros(m.n_nodes)])
    H = pullback_field(nodal_H_uvw(res), q, res.helix)
    Jw = res.triangle_current[:, 2]
    T = m.n_triangles
    lines = [
        "# vtk DataFile Version 3.0",
        f"helicable field at {res.frequency:g} Hz",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {m.n_nodes} double",
    ]
    lines += [f"{x:.12e} {y:.12e} 0" for x, y in m.nodes]
    lines.append(f"CELLS {T} {4 * T}")
    lines += [f"3 {a} {b} {c}" for a, b, c in m.triangles]
    lines.append(f"CELL_TYPES {T}")
    lines += ["5"] * T
    lines.append(f"CELL_DATA {T}")
    lines += _scalars("region", m.tri_region, "int")
    for name, arr in (("abs_Jw", np.abs(Jw)), ("re_Jw", Jw.real), ("im_Jw", Jw.imag)):
        lines += _scalars(name, arr)
    lines.append(f"POINT_DATA {m.n_nodes}")
    for i, comp in enumerate("xyz"):
        lines += _scalars(f"re_H{comp}", H[:, i].real)
        lines += _scalars(f"im_H{comp}", H[:, i].imag)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _scalars(name, arr, kind="double"):
    fmt = "{:d}" if kind == "int" else "{:.12e}"
    return [f"SCALARS {name} {kind} 1", "LOOKUP_TABLE default"] + [fmt.format(v) for v in arr]
