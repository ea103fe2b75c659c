"""Reduced H-phi eddy-current system in helicoidal coordinates.

Unknowns
--------
The field is tracked on mesh entities: one circulation per edge for the
in-plane part ``(H_u, H_v)`` (Whitney edge functions) and one nodal value per
node for ``H_w`` (linear Lagrange functions). Free dofs are mapped onto those
entity values by a sparse matrix ``P`` plus a fixed offset ``y0``:

* edges inside a conductor carry their own circulation dof;
* every edge touching the insulator gets ``phi_b - phi_a`` from the nodal
  scalar potential, plus ``sum_i I_i c_i(e)`` from the cut cochains (fixed);
* ``phi`` lives on every insulator node except one gauge node on the shield;
* ``H_w`` is free on nodes interior to a conductor and equals the insulator
  constant on every other node, so it stays continuous across conductor
  surfaces. By default that constant is one more free dof whose equation
  states that the net axial flux inside the PEC shield vanishes; passing a
  value to ``build_dof_map(hw_shield=...)`` fixes it instead.

The system matrix is ``A(w) = j w Pt M P + Pt K P`` with ``M`` the
permeability-weighted mass and ``K`` the resistivity-weighted curl-curl form,
both assembled over entity space.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import HelixParams, MaterialSpec
from .kernels import element_matrices
from .mesh import INSULATOR, LOCAL_EDGES, Mesh2D
from .topology import CohomologyBasis


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class Excitation:
    """Current amplitudes (phasor amplitude, not RMS) at angular frequency ``omega``."""

    currents: np.ndarray
    omega: float

    def __post_init__(self):
        cur = np.atleast_1d(np.asarray(self.currents, dtype=complex))
        object.__setattr__(self, "currents", cur)
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not np.any(cur != 0):
            raise ValueError("at least one conductor current must be non-zero")

    @classmethod
    def at_frequency(cls, currents, f_hz: float) -> "Excitation":
        return cls(currents, 2 * np.pi * f_hz)

    @property
    def frequency(self) -> float:
        return self.omega / (2 * np.pi)


@dataclass
class DofMap:
    mesh: Mesh2D
    basis: CohomologyBasis | None
    edge_dof: np.ndarray  # (E,) free index or -1
    phi_dof: np.ndarray  # (N,) free index or -1
    hw_dof: np.ndarray  # (N,) free index or -1
    gauge_node: int
    P: sp.csr_matrix  # (E + N, n_free), real
    cut_fields: np.ndarray  # (n_cond, E) integer cochains, dense
    hw_shield: complex | None = None  # None: floating constant (last free dof)
    n_edge_dofs: int = 0
    n_phi_dofs: int = 0
    n_hw_dofs: int = 0

    @property
    def n_free(self) -> int:
        return self.P.shape[1]

    @property
    def floating_shield(self) -> bool:
        return self.hw_shield is None

    @property
    def n_fixed(self) -> int:
        # phi gauge, one coefficient per generator, the H_w constant if pinned
        return 1 + len(self.cut_fields) + (0 if self.floating_shield else 1)

    def shield_hw(self, x) -> complex:
        """Value of the insulator H_w constant for solution ``x``."""
        return complex(x[-1]) if self.floating_shield else complex(self.hw_shield)

    @property
    def n_total(self) -> int:
        return self.n_free + self.n_fixed

    def offset(self, currents) -> np.ndarray:
        """Entity values of the fixed part for the given conductor currents."""
        m = self.mesh
        E = len(m.edges)
        currents = np.asarray(currents, dtype=complex)
        y0 = np.zeros(E + m.n_nodes, dtype=complex)
        if len(self.cut_fields):
            y0[:E] = currents @ self.cut_fields
        if not self.floating_shield:
            y0[E:][self.hw_dof < 0] = self.hw_shield
        return y0

    def expand(self, x, currents) -> np.ndarray:
        return self.P @ x + self.offset(currents)


def build_dof_map(m: Mesh2D, basis: CohomologyBasis | None, exc: Excitation | None = None,
                  hw_shield: complex | None = None) -> DofMap:
    n_cond = m.n_conductors
    if n_cond and (basis is None or len(basis.generators) != n_cond):
        raise ValueError("one cohomology generator per conductor is required")
    if exc is not None and len(exc.currents) != n_cond:
        raise ValueError(f"excitation has {len(exc.currents)} currents for {n_cond} conductors")
    E, N = len(m.edges), m.n_nodes
    et = m.edge_triangles
    touches_ins = ((et >= 0) & (m.tri_region[np.maximum(et, 0)] == INSULATOR)).any(axis=1)
    if not touches_ins.any():
        raise ValueError("mesh has no insulator region")
    ins_nodes = m.insulator_nodes_mask()

    edge_dof = -np.ones(E, dtype=np.int64)
    cond_edges = np.nonzero(~touches_ins)[0]
    edge_dof[cond_edges] = np.arange(len(cond_edges))
    n_e = len(cond_edges)

    outer_nodes = np.unique(m.outer_edges) if len(m.outer_edges) else np.nonzero(ins_nodes)[0]
    gauge = int(outer_nodes.min())
    phi_dof = -np.ones(N, dtype=np.int64)
    phi_nodes = np.nonzero(ins_nodes)[0]
    phi_nodes = phi_nodes[phi_nodes != gauge]
    phi_dof[phi_nodes] = n_e + np.arange(len(phi_nodes))
    n_p = len(phi_nodes)

    hw_dof = -np.ones(N, dtype=np.int64)
    hw_nodes = np.nonzero(~ins_nodes)[0]
    hw_dof[hw_nodes] = n_e + n_p + np.arange(len(hw_nodes))
    n_w = len(hw_nodes)
    n_free = n_e + n_p + n_w + (1 if hw_shield is None else 0)

    rows, cols, vals = [cond_edges], [edge_dof[cond_edges]], [np.ones(n_e)]
    ins_edges = np.nonzero(touches_ins)[0]
    for end, sgn in ((1, 1.0), (0, -1.0)):
        nodes = m.edges[ins_edges, end]
        ok = phi_dof[nodes] >= 0
        rows.append(ins_edges[ok])
        cols.append(phi_dof[nodes[ok]])
        vals.append(np.full(ok.sum(), sgn))
    rows.append(E + hw_nodes)
    cols.append(hw_dof[hw_nodes])
    vals.append(np.ones(n_w))
    if hw_shield is None:
        shared = np.nonzero(hw_dof < 0)[0]
        rows.append(E + shared)
        cols.append(np.full(len(shared), n_free - 1))
        vals.append(np.ones(len(shared)))
    P = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(E + N, n_free)
    )
    cuts = np.array([g.dense(E) for g in basis.generators], dtype=np.int64) if n_cond else np.zeros((0, E), np.int64)
    if n_cond and (cuts[:, ~touches_ins] != 0).any():
        raise ValueError("cut cochains must live on insulator edges")
    return DofMap(m, basis, edge_dof, phi_dof, hw_dof, gauge, P, cuts, hw_shield, n_e, n_p, n_w)


# --------------------------------------------------------------- assembly


@dataclass
class EntityForms:
    """Mass and curl-curl matrices over entity space (E edges + N nodes)."""

    M: sp.csr_matrix
    K: sp.csr_matrix
    Me: np.ndarray = field(repr=False)
    Ke: np.ndarray = field(repr=False)


def _local_map(m: Mesh2D):
    E = len(m.edges)
    loc = np.concatenate([m.tri_edges, E + m.triangles], axis=1)
    sgn = np.concatenate([m.tri_edge_signs, np.ones((m.n_triangles, 3), dtype=np.int64)], axis=1)
    return loc, sgn.astype(float)


def entity_forms(m: Mesh2D, h: HelixParams, mat: MaterialSpec) -> EntityForms:
    xy = np.ascontiguousarray(m.nodes[m.triangles])
    rho = np.where(m.tri_region >= 0, mat.resistivity, 0.0)
    Me, Ke = element_matrices(xy, float(h.twist), float(mat.permeability), rho)
    bad = ~(np.isfinite(Me).all(axis=(1, 2)) & np.isfinite(Ke).all(axis=(1, 2)))
    if bad.any():
        raise AssemblyError(f"non-finite element matrix on triangle {int(np.nonzero(bad)[0][0])}")
    loc, sgn = _local_map(m)
    n = len(m.edges) + m.n_nodes
    S = sgn[:, :, None] * sgn[:, None, :]
    r = np.broadcast_to(loc[:, :, None], S.shape)
    c = np.broadcast_to(loc[:, None, :], S.shape)
    M = sp.coo_matrix(((S * Me).ravel(), (r.ravel(), c.ravel())), shape=(n, n)).tocsr()
    cond = m.tri_region >= 0
    K = sp.coo_matrix(
        ((S * Ke)[cond].ravel(), (r[cond].ravel(), c[cond].ravel())), shape=(n, n)
    ).tocsr()
    return EntityForms(M, K, Me, Ke)


def _sym(X: sp.spmatrix) -> sp.csr_matrix:
    X = ((X + X.T) * 0.5).tocsr()
    X.sum_duplicates()
    X.sort_indices()
    return X


@dataclass
class AssembledSystem:
    """``A x = b`` with ``A = j omega M + K`` complex symmetric."""

    A: sp.csr_matrix
    b: np.ndarray
    dofmap: DofMap
    excitation: Excitation
    M: sp.csr_matrix
    K: sp.csr_matrix
    forms: EntityForms = field(repr=False)


@dataclass
class ReducedForms:
    M: sp.csr_matrix
    K: sp.csr_matrix
    bM: np.ndarray  # -Pt M_y y0 per unit current, (n_free, n_cond)
    bK: np.ndarray
    bM0: np.ndarray  # contribution of the H_w constant
    bK0: np.ndarray
    forms: EntityForms


def reduce_forms(forms: EntityForms, dm: DofMap) -> ReducedForms:
    P = dm.P
    Pt = P.T.tocsr()
    Mr = _sym(Pt @ forms.M @ P)
    Kr = _sym(Pt @ forms.K @ P)
    E = len(dm.mesh.edges)
    n_cond = len(dm.cut_fields)
    Y = np.zeros((E + dm.mesh.n_nodes, n_cond))
    Y[:E] = dm.cut_fields.T
    y_c = np.zeros(E + dm.mesh.n_nodes, dtype=complex)
    if not dm.floating_shield:
        y_c[E:][dm.hw_dof < 0] = dm.hw_shield
    return ReducedForms(
        Mr, Kr,
        -(Pt @ (forms.M @ Y)), -(Pt @ (forms.K @ Y)),
        -(Pt @ (forms.M @ y_c)), -(Pt @ (forms.K @ y_c)),
        forms,
    )


def system_at(red: ReducedForms, dm: DofMap, exc: Excitation) -> AssembledSystem:
    jw = 1j * exc.omega
    A = (jw * red.M + red.K).tocsr()
    A.sort_indices()
    b = jw * (red.bM @ exc.currents + red.bM0) + red.bK @ exc.currents + red.bK0
    return AssembledSystem(A, np.asarray(b), dm, exc, red.M, red.K, red.forms)


def assemble(m: Mesh2D, h: HelixParams, mat: MaterialSpec, dm: DofMap, exc: Excitation) -> AssembledSystem:
    red = reduce_forms(entity_forms(m, h, mat), dm)
    return system_at(red, dm, exc)


def apply_frequency_sweep(m: Mesh2D, h: HelixParams, mat: MaterialSpec, dm: DofMap, currents,
                          frequencies) -> list[AssembledSystem]:
    """Assemble once, then rescale the mass block for every frequency."""
    red = reduce_forms(entity_forms(m, h, mat), dm)
    return [system_at(red, dm, Excitation.at_frequency(currents, f)) for f in frequencies]


# --------------------------------------------------------------- local curl


def barycentric_gradients(xy: np.ndarray):
    """Gradients (…, 3, 2) and areas of triangles with vertices ``xy`` (…, 3, 2)."""
    d1 = xy[..., 1, :] - xy[..., 0, :]
    d2 = xy[..., 2, :] - xy[..., 0, :]
    area = 0.5 * (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0])
    g = np.empty(xy.shape)
    for a in range(3):
        p, q = xy[..., (a + 1) % 3, :], xy[..., (a + 2) % 3, :]
        g[..., a, 0] = (p[..., 1] - q[..., 1]) / (2 * area)
        g[..., a, 1] = (q[..., 0] - p[..., 0]) / (2 * area)
    return g, area


def curl_uvw(xy, circulations, hw) -> np.ndarray:
    """Reduced curl ``(d_v H_w, -d_u H_w, d_u H_v - d_v H_u)`` on triangles.

    ``circulations`` are the three local edge values (local orientation
    0->1, 1->2, 2->0) and ``hw`` the nodal ``H_w`` values; all arrays may
    carry leading batch axes. The result is constant over each triangle.
    """
    xy = np.asarray(xy, dtype=float)
    g, _ = barycentric_gradients(xy)
    circulations = np.asarray(circulations)
    hw = np.asarray(hw)
    out = np.zeros(np.broadcast_shapes(circulations.shape[:-1], xy.shape[:-2]) + (3,),
                   dtype=np.result_type(circulations, hw, float))
    for e, (a, b) in enumerate(LOCAL_EDGES):
        out[..., 2] += circulations[..., e] * 2 * (g[..., a, 0] * g[..., b, 1] - g[..., a, 1] * g[..., b, 0])
    out[..., 0] = (hw * g[..., :, 1]).sum(axis=-1)
    out[..., 1] = -(hw * g[..., :, 0]).sum(axis=-1)
    return out
