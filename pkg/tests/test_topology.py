import numpy as np
import pytest
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from helicable.mesh import INSULATOR, make_mesh
from helicable.topology import (Cochain1, TopologyError, align_basis, boundary_loops, cohomology_basis,
                                integer_inverse, outer_loop, pairing_matrix, raw_cohomology,
                                write_generators_csv)


def test_ring_loop(ring):
    loops = boundary_loops(ring)
    assert len(loops) == 1
    (lp,) = loops
    er = ring.edge_regions()
    iface = ((er == 0).any(axis=1) & (er == INSULATOR).any(axis=1)).sum()
    assert len(lp.edges) == iface == 8
    assert lp.signed_area(ring) > 0


def test_ring_generator(ring):
    (g,) = raw_cohomology(ring)
    lp = boundary_loops(ring)[0]
    assert g.circulation(lp) == 1
    assert not g.coboundary(ring)[ring.tri_region == INSULATOR].any()
    assert g.circulation(outer_loop(ring)) == 1


def test_reference_mesh_basis(ref_mesh_coarse):
    m = ref_mesh_coarse
    basis = cohomology_basis(m)
    n = m.n_conductors
    assert n == 13 and len(basis.loops) == 13 and len(basis.generators) == 13
    assert basis.pairing == [[int(i == j) for j in range(n)] for i in range(n)]
    assert all(lp.signed_area(m) > 0 for lp in basis.loops)
    outer = outer_loop(m)
    ins = m.tri_region == INSULATOR
    for g in basis.generators:
        assert not g.coboundary(m)[ins].any()
        assert abs(g.circulation(outer)) == 1


def test_raw_pairing_is_unimodular(ref_mesh_coarse):
    m = ref_mesh_coarse
    P = pairing_matrix(boundary_loops(m), raw_cohomology(m))
    _, det = integer_inverse(P)
    assert abs(det) == 1


def test_thick_cut_support(ref_mesh_coarse):
    # each generator lives on a connected band from one conductor to the shield
    m = ref_mesh_coarse
    basis = cohomology_basis(m)
    er = m.edge_regions()
    outer = m.edge_triangles[:, 1] < 0
    for j, g in enumerate(basis.generators):
        e = g.edges
        touched = set(er[e].ravel()) - {INSULATOR, -2}
        assert touched == {j}
        assert outer[e].any()
        tris = np.unique(m.edge_triangles[e])
        tris = tris[(tris >= 0)]
        tris = tris[m.tri_region[tris] == INSULATOR]
        local = -np.ones(m.n_triangles, dtype=int)
        local[tris] = np.arange(len(tris))
        nb = m.neighbors[tris]
        src = np.repeat(np.arange(len(tris)), 3)
        dst = local[np.maximum(nb.ravel(), 0)]
        ok = (nb.ravel() >= 0) & (dst >= 0)
        graph = coo_matrix((np.ones(ok.sum()), (src[ok], dst[ok])), shape=(len(tris),) * 2)
        assert connected_components(graph, directed=False)[0] == 1


def _combine(a: Cochain1, b: Cochain1, fa=1, fb=1) -> Cochain1:
    d = {k: fa * v for k, v in a.as_dict().items()}
    for k, v in b.as_dict().items():
        d[k] = d.get(k, 0) + fb * v
    return Cochain1.from_dict(d)


def test_alignment_of_crossing_cuts(ref_mesh_coarse):
    m = ref_mesh_coarse
    loops = boundary_loops(m)[:2]
    g0, g1 = raw_cohomology(m)[:2]
    # cuts that each wind around both conductors
    raw = [_combine(g0, g1), _combine(g0, g1, 1, 2)]
    assert pairing_matrix(loops, raw) == [[1, 1], [1, 2]]
    basis = align_basis(loops, raw)
    assert basis.pairing == [[1, 0], [0, 1]]
    assert basis.generators[0].as_dict() == g0.as_dict()
    assert basis.generators[1].as_dict() == g1.as_dict()


def test_aligned_basis_unchanged(ring):
    raw = raw_cohomology(ring)
    basis = align_basis(boundary_loops(ring), raw)
    assert basis.generators[0].as_dict() == raw[0].as_dict()


def test_singular_pairing_rejected(ref_mesh_coarse):
    m = ref_mesh_coarse
    loops = boundary_loops(m)[:2]
    g0, g1 = raw_cohomology(m)[:2]
    with pytest.raises(TopologyError):
        align_basis(loops, [_combine(g0, g1, 2, 0), g1])
    with pytest.raises(TopologyError):
        align_basis(loops, [g0, g0])


def test_integer_inverse_exact():
    inv, det = integer_inverse([[2, 1], [1, 1]])
    assert inv == [[1, -1], [-1, 2]] and det == 1


def _three_ring_mesh():
    n = 8
    ang = 2 * np.pi * np.arange(n) / n
    rings = [np.column_stack([r * np.cos(ang), r * np.sin(ang)]) for r in (1.0, 2.0, 3.0)]
    nodes = np.vstack([[0.0, 0.0]] + rings)
    tris, reg = [], []
    for i in range(n):
        tris.append([0, 1 + i, 1 + (i + 1) % n])
        reg.append(INSULATOR)
    for k, tag in ((0, 0), (1, INSULATOR)):
        for i in range(n):
            a, b = 1 + k * n + i, 1 + k * n + (i + 1) % n
            tris += [[a, a + n, b + n], [a, b + n, b]]
            reg += [tag, tag]
    return make_mesh(nodes, np.array(tris), np.array(reg), validate=False)


def test_conductor_with_two_boundaries():
    with pytest.raises(TopologyError):
        boundary_loops(_three_ring_mesh())


def test_no_conductors(ring):
    m = make_mesh(ring.nodes, ring.triangles, np.full(ring.n_triangles, INSULATOR))
    with pytest.raises(TopologyError):
        boundary_loops(m)


def test_generators_csv(tmp_path, ring):
    basis = cohomology_basis(ring)
    p = tmp_path / "g.csv"
    write_generators_csv(basis, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "generator_id,edge_id,coefficient"
    assert len(lines) - 1 == len(basis.generators[0].edges)
