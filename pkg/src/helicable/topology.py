"""Homology loops around conductors and a dual basis of insulator cuts.

Each conductor hole of the insulator gets one cut: a chain of insulator
triangles from the conductor boundary to the shield found by breadth-first
search in the dual graph. The cochain puts +-1 on every primal edge the chain
crosses, which makes it closed on every insulator triangle. All pairing
algebra is done with Python integers.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from .mesh import INSULATOR, Mesh2D, _chain_loops, boundary_directed_edges


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class HomologyLoop:
    """Closed edge cycle with the conductor on its left (counter-clockwise).

    ``conductor`` is -1 for the outer (shield) loop.
    """

    conductor: int
    edges: np.ndarray
    directions: np.ndarray  # +1 where the loop runs along the edge orientation
    nodes: np.ndarray  # start node of each traversed edge

    def signed_area(self, m: Mesh2D) -> float:
        x, y = m.nodes[self.nodes].T
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class Cochain1:
    """Integer 1-cochain stored sparsely, edge ids ascending."""

    edges: np.ndarray
    coeffs: np.ndarray

    @classmethod
    def from_dict(cls, d: dict[int, int]) -> "Cochain1":
        items = sorted((e, c) for e, c in d.items() if c != 0)
        e = np.array([k for k, _ in items], dtype=np.int64)
        c = np.array([v for _, v in items], dtype=np.int64)
        return cls(e, c)

    def as_dict(self) -> dict[int, int]:
        return {int(e): int(c) for e, c in zip(self.edges, self.coeffs)}

    def dense(self, n_edges: int) -> np.ndarray:
        out = np.zeros(n_edges, dtype=np.int64)
        out[self.edges] = self.coeffs
        return out

    def circulation(self, loop: HomologyLoop) -> int:
        d = self.as_dict()
        return sum(int(s) * d.get(int(e), 0) for e, s in zip(loop.edges, loop.directions))

    def coboundary(self, m: Mesh2D) -> np.ndarray:
        """Signed sum around every triangle (zero where the cochain is closed)."""
        dense = self.dense(len(m.edges))
        return (dense[m.tri_edges] * m.tri_edge_signs).sum(axis=1)


@dataclass(frozen=True)
class CohomologyBasis:
    generators: list[Cochain1]
    loops: list[HomologyLoop]
    pairing: list[list[int]]


def _loop_from_region(m: Mesh2D, mask: np.ndarray, conductor: int) -> HomologyLoop:
    eids, signs, directed = boundary_directed_edges(m, mask)
    loops = _chain_loops(directed)
    if loops is None or len(loops) != 1:
        what = "outer boundary" if conductor < 0 else f"conductor {conductor}"
        raise TopologyError(f"{what}: boundary is not one closed loop")
    order = loops[0]
    return HomologyLoop(conductor, eids[order], signs[order], directed[order, 0])


def boundary_loops(m: Mesh2D) -> list[HomologyLoop]:
    """One counter-clockwise loop per conductor, in conductor order."""
    if m.n_conductors == 0:
        raise TopologyError("mesh has no conductors")
    return [_loop_from_region(m, m.tri_region == c, c) for c in range(m.n_conductors)]


def outer_loop(m: Mesh2D) -> HomologyLoop:
    return _loop_from_region(m, np.ones(m.n_triangles, dtype=bool), -1)


def _insulator_dual(m: Mesh2D):
    ins = np.nonzero(m.tri_region == INSULATOR)[0]
    local = -np.ones(m.n_triangles, dtype=np.int64)
    local[ins] = np.arange(len(ins))
    nb = m.neighbors[ins]
    src = np.repeat(np.arange(len(ins)), 3)
    dst = local[np.maximum(nb.ravel(), 0)]
    ok = (nb.ravel() >= 0) & (dst >= 0)
    return ins, local, src[ok], dst[ok]


def raw_cohomology(m: Mesh2D) -> list[Cochain1]:
    """One closed cut cochain per conductor, running from its boundary to the shield."""
    ins, local, src, dst = _insulator_dual(m)
    n = len(ins)
    if n == 0:
        raise TopologyError("mesh has no insulator")
    er = m.edge_regions()
    outer_edge = m.edge_triangles[:, 1] < 0
    tri_outer = outer_edge[m.tri_edges[ins]]  # (n, 3)
    is_target = tri_outer.any(axis=1)
    cuts = []
    for c in range(m.n_conductors):
        # insulator triangles with an edge on conductor c
        iface = ((er[:, 0] == c) & (er[:, 1] == INSULATOR)) | ((er[:, 1] == c) & (er[:, 0] == INSULATOR))
        tri_iface = iface[m.tri_edges[ins]]
        starts = np.nonzero(tri_iface.any(axis=1))[0]
        if len(starts) == 0:
            raise TopologyError(f"conductor {c} has no insulator neighbour")
        # virtual root n links to every start triangle
        s = np.concatenate([src, np.full(len(starts), n)])
        d = np.concatenate([dst, starts])
        g = coo_matrix((np.ones(len(s)), (s, d)), shape=(n + 1, n + 1)).tocsr()
        order, pred = breadth_first_order(g, n, directed=True, return_predecessors=True)
        hit = order[1:][is_target[order[1:]]]
        if len(hit) == 0:
            raise TopologyError(f"no insulator path from conductor {c} to the shield")
        path = [int(hit[0])]
        while pred[path[-1]] != n:
            path.append(int(pred[path[-1]]))
        path.reverse()
        cuts.append(_cut_cochain(m, ins[np.array(path)], c, iface, outer_edge))
    return cuts


def _cut_cochain(m: Mesh2D, path: np.ndarray, conductor: int, iface: np.ndarray, outer_edge: np.ndarray) -> Cochain1:
    """Cochain crossed by a triangle path; the conductor loop sees +1."""
    coeff: dict[int, int] = {}
    first = path[0]
    k0 = [k for k in range(3) if iface[m.tri_edges[first, k]]]
    k0 = min(k0, key=lambda k: m.tri_edges[first, k])
    # the conductor's loop runs opposite to the insulator triangle's own orientation
    coeff[int(m.tri_edges[first, k0])] = -int(m.tri_edge_signs[first, k0])
    for i, t in enumerate(path):
        if i + 1 < len(path):
            nxt = path[i + 1]
            k = int(np.nonzero(m.neighbors[t] == nxt)[0][0])
        else:
            ks = [k for k in range(3) if outer_edge[m.tri_edges[t, k]]]
            k = min(ks, key=lambda k: m.tri_edges[t, k])
        e = int(m.tri_edges[t, k])
        coeff[e] = coeff.get(e, 0) + int(m.tri_edge_signs[t, k])
    return Cochain1.from_dict(coeff)


def pairing_matrix(loops: list[HomologyLoop], cochains: list[Cochain1]) -> list[list[int]]:
    return [[c.circulation(l) for c in cochains] for l in loops]


def integer_inverse(P: list[list[int]]) -> tuple[list[list[int]], int]:
    """Exact inverse of an integer matrix and its determinant.

    Raises ``TopologyError`` unless the matrix is unimodular.
    """
    n = len(P)
    A = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(P)]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            raise TopologyError("pairing matrix is singular")
        if piv != col:
            A[col], A[piv] = A[piv], A[col]
            det = -det
        p = A[col][col]
        det *= p
        A[col] = [v / p for v in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * b for a, b in zip(A[r], A[col])]
    if abs(det) != 1:
        raise TopologyError(f"pairing matrix is not unimodular (det = {det})")
    inv = [[int(v) for v in row[n:]] for row in A]
    return inv, int(det)


def align_basis(loops: list[HomologyLoop], raw: list[Cochain1]) -> CohomologyBasis:
    """Recombine ``raw`` so that generator j circulates 1 around conductor j only."""
    if len(loops) != len(raw):
        raise TopologyError(f"{len(loops)} loops but {len(raw)} cochains")
    P0 = pairing_matrix(loops, raw)
    inv, _ = integer_inverse(P0)
    n = len(raw)
    gens = []
    for j in range(n):
        acc: dict[int, int] = {}
        for k in range(n):
            f = inv[k][j]
            if f:
                for e, c in zip(raw[k].edges, raw[k].coeffs):
                    acc[int(e)] = acc.get(int(e), 0) + f * int(c)
        gens.append(Cochain1.from_dict(acc))
    P = pairing_matrix(loops, gens)
    if P != [[int(i == j) for j in range(n)] for i in range(n)]:  # pragma: no cover
        raise TopologyError("alignment failed to produce the identity pairing")
    return CohomologyBasis(gens, loops, P)


def cohomology_basis(m: Mesh2D) -> CohomologyBasis:
    return align_basis(boundary_loops(m), raw_cohomology(m))


def write_generators_csv(basis: CohomologyBasis, path) -> None:
    with open(path, "w") as f:
        f.write("generator_id,edge_id,coefficient\n")
        for j, g in enumerate(basis.generators):
            for e, c in zip(g.edges, g.coeffs):
                f.write(f"{j},{e},{c}\n")
