import numpy as np
import pytest
import scipy.sparse as sp

from helicable import fem, pipeline, post, section
from helicable.geometry import HelixParams, MaterialSpec
from helicable.mesh import INSULATOR, make_mesh
from helicable.mesher import generate_mesh
from helicable.topology import boundary_loops, cohomology_basis

from conftest import wire_mesh, wire_plan

H = HelixParams(1.0, 0.0318)
MAT = MaterialSpec()
UNIT = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


# ---------------------------------------------------------------- local curl


def test_curl_of_constant_hw_vanishes():
    c = fem.curl_uvw(UNIT, np.zeros(3), np.full(3, 2.5))
    assert np.allclose(c, 0)


def test_curl_of_gradient_vanishes():
    rng = np.random.default_rng(0)
    phi = rng.standard_normal(3)
    circ = np.array([phi[1] - phi[0], phi[2] - phi[1], phi[0] - phi[2]])
    xy = rng.standard_normal((3, 2))
    assert np.allclose(fem.curl_uvw(xy, circ, np.zeros(3)), 0, atol=1e-14)


def test_unit_edge_curl_by_hand():
    # w = l0 grad l1 - l1 grad l0 = (1 - y, x) on the unit triangle, curl = 2 = 1 / area
    for e in range(3):
        circ = np.zeros(3)
        circ[e] = 1.0
        assert np.allclose(fem.curl_uvw(UNIT, circ, np.zeros(3)), [0, 0, 2.0])
    # clockwise vertex order flips the sign
    cw = UNIT[[0, 2, 1]]
    assert np.allclose(fem.curl_uvw(cw, np.array([1.0, 0, 0]), np.zeros(3)), [0, 0, -2.0])


def test_in_plane_curl_from_hw_gradient():
    hw = np.array([0.0, 3.0, 5.0])  # H_w = 3u + 5v
    assert np.allclose(fem.curl_uvw(UNIT, np.zeros(3), hw), [5.0, -3.0, 0.0])


# ---------------------------------------------------------------- dof maps


def test_two_triangle_insulator_dofs():
    nodes = UNIT.tolist() + [[1.0, 1.0]]
    m = make_mesh(nodes, [[0, 1, 2], [1, 3, 2]], [INSULATOR, INSULATOR])
    assert fem.build_dof_map(m, None, hw_shield=0.0).n_free == m.n_nodes - 1
    assert fem.build_dof_map(m, None).n_free == m.n_nodes  # plus the floating constant


def test_ring_dof_count_by_hand(ring):
    # 17 nodes: centre, inner ring 1..8, outer ring 9..16; 40 edges.
    # free: 8 spokes (edges touching no insulator triangle)
    #       + 16 insulator nodes - 1 gauge
    #       + 1 interior conductor node for H_w
    #       + 1 floating shield constant
    dm = fem.build_dof_map(ring, cohomology_basis(ring))
    assert len(ring.edges) == 40
    assert (dm.n_edge_dofs, dm.n_phi_dofs, dm.n_hw_dofs) == (8, 15, 1)
    assert dm.n_free == 25
    assert dm.n_fixed == 2
    assert dm.n_total == 27
    pinned = fem.build_dof_map(ring, cohomology_basis(ring), hw_shield=0.0)
    assert pinned.n_free == 24 and pinned.n_fixed == 3


def test_full_scale_dof_ratio(ref_mesh_coarse):
    # reported: 39.9 k dofs on 42.47 k triangles
    dm = fem.build_dof_map(ref_mesh_coarse, cohomology_basis(ref_mesh_coarse))
    ratio = dm.n_free / ref_mesh_coarse.n_triangles
    assert abs(ratio / (39.9 / 42.47) - 1) < 0.15


def test_missing_generator(ring):
    with pytest.raises(ValueError):
        fem.build_dof_map(ring, None)
    with pytest.raises(ValueError):
        fem.build_dof_map(ring, cohomology_basis(ring), fem.Excitation.at_frequency([1.0, 1.0], 50))


def test_excitation_validation():
    with pytest.raises(ValueError):
        fem.Excitation([1.0], 0.0)
    with pytest.raises(ValueError):
        fem.Excitation([0.0, 0.0], 1.0)
    assert fem.Excitation.at_frequency([1.0], 50.0).frequency == pytest.approx(50.0)


# ---------------------------------------------------------------- assembly


@pytest.fixture(scope="module")
def small():
    plan = pipeline.reference_plan()
    plan = section.CablePlan(plan.helix, plan.layers[:2], 0.025)
    m = generate_mesh(section.build_symmetry_cell(plan, 48), 2.5e-3)
    prob = pipeline.prepare(m, plan.helix, plan.materials)
    return plan, m, prob


CUR = np.array([1.0, 0.5, -0.3 + 0.2j, 0.7j, -1.0])


def test_exact_symmetry(small):
    plan, m, prob = small
    sys_ = fem.system_at(prob.reduced, prob.dofmap, fem.Excitation.at_frequency(CUR, 50))
    A = sys_.A
    assert (A - A.T).count_nonzero() == 0
    pat = A.copy()
    pat.data[:] = 1
    assert (pat - pat.T).count_nonzero() == 0
    assert np.all(A.diagonal() != 0)


def test_gradients_in_curl_kernel(small):
    _, m, prob = small
    K = prob.reduced.forms.K
    rng = np.random.default_rng(1)
    for _ in range(3):
        phi = rng.standard_normal(m.n_nodes)
        y = np.zeros(len(m.edges) + m.n_nodes)
        y[:len(m.edges)] = phi[m.edges[:, 1]] - phi[m.edges[:, 0]]
        assert np.abs(K @ y).max() <= 1e-12 * sp.linalg.norm(K, np.inf) * np.abs(y).max()


def test_currents_imposed_on_loops(small):
    plan, m, prob = small
    res = pipeline.solve_frequency(prob, CUR, 50.0)
    E = len(m.edges)
    for i, lp in enumerate(boundary_loops(m)):
        circ = np.sum(res.y[lp.edges] * lp.directions)
        assert abs(circ - CUR[i]) <= 1e-12 * abs(CUR).max()
    assert np.allclose(post.conductor_currents(res), CUR, rtol=0, atol=1e-12)
    assert len(res.y) == E + m.n_nodes


def test_energy_balance(small):
    plan, m, prob = small
    f = 50.0
    res = pipeline.solve_frequency(prob, CUR, f, tol=1e-13)
    w = 2 * np.pi * f
    F = prob.reduced.forms
    y = res.y
    mag = np.vdot(y, F.M @ y)
    ohm = np.vdot(y, F.K @ y)
    assert abs(mag.imag) <= 1e-12 * abs(mag) and abs(ohm.imag) <= 1e-12 * abs(ohm)
    total = np.vdot(y, (1j * w * F.M + F.K) @ y)
    # power enters only through the imposed currents
    y0 = res.dofmap.offset(CUR)
    supplied = np.vdot(y0, (1j * w * F.M + F.K) @ y)
    assert abs(total - supplied) <= 1e-10 * abs(total)
    assert abs(total.real - ohm.real) <= 1e-10 * abs(total)
    assert abs(total.imag - w * mag.real) <= 1e-10 * abs(total)
    assert np.isclose(0.5 * ohm.real, res.loss_per_length, rtol=1e-10)


def test_twist_limit(small):
    _, m, prob = small
    dm = prob.dofmap
    A0 = fem.reduce_forms(fem.entity_forms(m, HelixParams(0.0, 0.0318), MAT), dm)
    A1 = fem.reduce_forms(fem.entity_forms(m, HelixParams(1e-8 * 0.0318, 0.0318), MAT), dm)
    for X0, X1 in ((A0.M, A1.M), (A0.K, A1.K)):
        assert sp.linalg.norm(X1 - X0) <= 1e-7 * sp.linalg.norm(X0)
    A2 = fem.reduce_forms(fem.entity_forms(m, HelixParams(1.0, 0.0318), MAT), dm)
    assert sp.linalg.norm(A2.K - A0.K) > 1e-3 * sp.linalg.norm(A0.K)


def test_frequency_sweep(small):
    plan, m, prob = small
    f = 40.0
    s1, s2, s3 = fem.apply_frequency_sweep(m, plan.helix, plan.materials, prob.dofmap, CUR, [f, 2 * f, 3 * f])
    w = 2 * np.pi * f
    diff = (s2.A - s1.A - 1j * w * s1.M)
    assert abs(diff).max() <= 1e-14 * abs(s1.A).max()
    for s in (s2, s3):
        assert np.array_equal(s.A.indptr, s1.A.indptr) and np.array_equal(s.A.indices, s1.A.indices)


def test_dc_limit_uniform_current():
    plan = wire_plan(0.0, 0.0)
    m = wire_mesh(plan, 1e-3)
    I = 2.0
    res = pipeline.solve_problem(m, plan.helix, plan.materials, [I], [1e-3])[0]
    area = np.abs(m.signed_areas[m.tri_region == 0]).sum()
    Jw = res.triangle_current[m.tri_region == 0, 2]
    assert np.abs(Jw.real - I / area).max() < 1e-9 * I / area
    # leftover inductive part scales like (rc / skin depth)^2, about 6e-6 here
    assert np.abs(Jw.imag).max() < 1e-5 * I / area
    assert np.isclose(res.loss_per_length, 0.5 * I**2 * MAT.resistivity / area, rtol=1e-6)


@pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning", "ignore:overflow:RuntimeWarning")
def test_nan_element_reports_triangle(ring):
    nodes = ring.nodes.copy()
    m = make_mesh(nodes, ring.triangles, ring.tri_region)
    bad = HelixParams(1.0, 1e-300)  # k overflows to inf
    with pytest.raises(fem.AssemblyError, match="triangle"):
        fem.entity_forms(m, bad, MAT)


def test_pinned_shield_constant(small):
    plan, m, _ = small
    prob = pipeline.prepare(m, plan.helix, plan.materials, shield_hw=0.0)
    res = pipeline.solve_frequency(prob, CUR, 50.0)
    assert res.shield_hw == 0
    outer = np.unique(m.outer_edges)
    assert np.all(res.nodal_hw[outer] == 0)
