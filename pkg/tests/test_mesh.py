import io

import numpy as np
import pytest

from helicable.geometry import HelixParams
from helicable.mesh import (INSULATOR, DanglingNodeError, MeshError, MeshSyntaxError, MshVersionError,
                            NonConformingMeshError, NonzeroZError, UnknownPhysicalNameError, make_mesh,
                            mesh_stats, parse_msh, read_msh_file, write_msh, write_msh_file)
from helicable.mesher import MesherError, generate_mesh
from helicable.section import CablePlan, LayerSpec, build_symmetry_cell

SQUARE = """$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
2
1 1 "outer_boundary"
2 2 "insulator"
$EndPhysicalNames
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
6
1 1 2 1 1 1 2
2 1 2 1 1 2 3
3 1 2 1 1 3 4
4 1 2 1 1 4 1
5 2 2 2 2 1 2 3
6 2 2 2 2 1 3 4
$EndElements
"""


def test_minimal_file():
    m = parse_msh(io.StringIO(SQUARE))
    assert m.n_triangles == 2 and m.n_nodes == 4
    assert (m.tri_region == INSULATOR).all()
    assert len(m.outer_edges) == 4
    assert len(m.edges) == 5
    st = mesh_stats(m)
    assert (st.n_triangles, st.n_nodes, st.n_edges) == (2, 4, 5)
    assert st.region_counts == {INSULATOR: 2}
    assert abs(st.min_angle_deg - 45) < 1e-9


def _err(text):
    with pytest.raises(MeshError) as info:
        parse_msh(text)
    return info


def test_dangling_node_names_the_element_line():
    info = _err(SQUARE.replace("6 2 2 2 2 1 3 4", "6 2 2 2 2 1 3 99"))
    assert info.type is DanglingNodeError
    assert info.value.lineno == 23
    assert "line 23" in str(info.value)


def test_version_mismatch():
    info = _err(SQUARE.replace("2.2 0 8", "4.1 0 8"))
    assert info.type is MshVersionError and info.value.lineno == 2


def test_unknown_physical_name():
    info = _err(SQUARE.replace('"insulator"', '"copper"'))
    assert info.type is UnknownPhysicalNameError and info.value.lineno == 7


def test_nonzero_z():
    info = _err(SQUARE.replace("3 1 1 0", "3 1 1 0.5"))
    assert info.type is NonzeroZError and info.value.lineno == 13


def test_non_conforming_mesh():
    # a hanging node on the diagonal splits one side only
    text = SQUARE.replace("4\n1 0 0 0", "5\n1 0 0 0").replace("4 0 1 0\n", "4 0 1 0\n5 0.5 0.5 0\n")
    text = text.replace("6\n1 1 2", "7\n1 1 2").replace(
        "6 2 2 2 2 1 3 4", "6 2 2 2 2 1 5 4\n7 2 2 2 2 5 3 4")
    info = _err(text)
    assert info.type is NonConformingMeshError


def test_syntax_error():
    info = _err(SQUARE.replace("$EndNodes", "$EndNode"))
    assert info.type is MeshSyntaxError


def test_point_elements_are_ignored():
    text = SQUARE.replace("6\n1 1 2", "7\n1 1 2").replace("$EndElements", "7 15 2 1 1 1\n$EndElements")
    assert parse_msh(text).n_triangles == 2


def _canonical(m):
    tags = m.node_tags
    tri = {tuple(sorted(tags[t])) + (int(r),) for t, r in zip(m.triangles, m.tri_region)}
    xy = {int(t): tuple(p) for t, p in zip(tags, m.nodes)}
    return tri, xy


def test_round_trip_minimal():
    m = parse_msh(SQUARE)
    m2 = parse_msh(write_msh(m))
    assert _canonical(m) == _canonical(m2)


def test_round_trip_with_permuted_ids(tmp_path, ring):
    rng = np.random.default_rng(0)
    perm = rng.permutation(ring.n_nodes)
    tags = 1000 + perm
    m = make_mesh(ring.nodes, ring.triangles, ring.tri_region, node_tags=tags)
    p = tmp_path / "ring.msh"
    write_msh_file(m, p)
    m2 = read_msh_file(p)
    assert _canonical(m) == _canonical(m2)
    assert m2.n_conductors == 1


def test_round_trip_generated(ref_mesh_coarse):
    m2 = parse_msh(write_msh(ref_mesh_coarse))
    assert np.array_equal(m2.nodes, ref_mesh_coarse.nodes)
    assert np.array_equal(m2.tri_region, ref_mesh_coarse.tri_region)
    assert m2.n_conductors == 13


def test_validator_rejects_conductor_on_boundary(ring):
    region = np.zeros(ring.n_triangles, dtype=int)
    with pytest.raises(NonConformingMeshError):
        make_mesh(ring.nodes, ring.triangles, region)


def test_edges_sorted_and_oriented(ring):
    e = ring.edges
    assert (e[:, 0] < e[:, 1]).all()
    key = e[:, 0] * ring.n_nodes + e[:, 1]
    assert (np.diff(key) > 0).all()


def test_euler_formula_single_circle():
    plan = CablePlan(HelixParams(0.0, 1.0), [LayerSpec(0.0, 1, 0.005)], 0.0075)
    cell = build_symmetry_cell(plan, 48)
    m = generate_mesh(cell, 1e-3)
    V, E, F = m.n_nodes, len(m.edges), m.n_triangles
    assert V - E + F == 1  # disk, outer face not counted
    cond = m.tri_region == 0
    assert cond.any() and (~cond).any()
    st = mesh_stats(m)
    assert sum(st.region_counts.values()) == F


def test_euler_formula_with_holes(ref_mesh_coarse):
    m = ref_mesh_coarse
    ins = m.tri_region == INSULATOR
    tri = m.triangles[ins]
    nodes = np.unique(tri)
    e = np.unique(np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1), axis=0)
    # insulator alone is a disk with 13 holes
    assert len(nodes) - len(e) + len(tri) == 1 - 13


def test_mesher_quality(ref_mesh_coarse):
    st = mesh_stats(ref_mesh_coarse)
    assert st.min_angle_deg > 20.0
    assert st.region_counts[INSULATOR] > 0
    assert len(st.region_counts) == 14


def test_refinement_monotonicity(ref_cell):
    _, cell = ref_cell
    n1 = generate_mesh(cell, 3e-3).n_triangles
    n2 = generate_mesh(cell, 1.5e-3).n_triangles
    assert n2 >= 2 * n1


@pytest.mark.slow
def test_full_scale_triangle_count():
    from helicable import pipeline, section

    plan = pipeline.reference_plan()
    cell = section.build_symmetry_cell(plan, section.samples_for_spacing(plan, 5e-4))
    m = generate_mesh(cell, 5e-4)
    assert 1e4 <= m.n_triangles <= 1e5


def test_mesher_rejects_bad_size(ref_cell):
    with pytest.raises(ValueError):
        generate_mesh(ref_cell[1], 0.0)


def test_mesher_round_limit(ref_cell):
    with pytest.raises(MesherError):
        generate_mesh(ref_cell[1], 2e-4, max_rounds=2)


def test_centroid_clearance_check():
    from helicable.mesher import _centroids_near_segments

    P = np.array([[0.0, 0.0], [1.0, 0.0]])
    S = np.array([[0, 1]])
    c = np.array([[0.5, 0.0], [0.5, 1e-13], [0.5, 1e-6], [2.0, 0.0]])
    assert _centroids_near_segments(P, S, c, 1e-12).tolist() == [0, 1]


def test_generated_centroids_clear_of_constraints(ref_mesh_coarse):
    from helicable.mesher import _centroids_near_segments

    m = ref_mesh_coarse
    er = m.edge_regions()
    iface = er[:, 0] != er[:, 1]
    c = m.nodes[m.triangles].mean(axis=1)
    assert len(_centroids_near_segments(m.nodes, m.edges[iface], c, 1e-12)) == 0
