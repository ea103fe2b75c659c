import numpy as np
import pytest

from helicable import pipeline, section
from helicable.geometry import HelixParams
from helicable.mesh import INSULATOR, make_mesh
from helicable.mesher import generate_mesh


def ring_mesh(n=8, r_in=1.0, r_out=2.0):
    """Conductor fan of ``n`` triangles inside an insulating ring of ``2n``.

    Node 0 is the centre, nodes 1..n the inner ring, n+1..2n the outer ring.
    """
    ang = 2 * np.pi * np.arange(n) / n
    nodes = np.vstack([[0.0, 0.0],
                       np.column_stack([r_in * np.cos(ang), r_in * np.sin(ang)]),
                       np.column_stack([r_out * np.cos(ang), r_out * np.sin(ang)])])
    tris, region = [], []
    for i in range(n):
        a, b = 1 + i, 1 + (i + 1) % n
        tris.append([0, a, b])
        region.append(0)
    for i in range(n):
        a, b = 1 + i, 1 + (i + 1) % n
        A, B = a + n, b + n
        tris += [[a, A, B], [a, B, b]]
        region += [INSULATOR, INSULATOR]
    return make_mesh(nodes, np.array(tris), np.array(region))


@pytest.fixture(scope="session")
def ring():
    return ring_mesh()


@pytest.fixture(scope="session")
def ref_cell():
    plan = pipeline.reference_plan()
    return plan, section.build_symmetry_cell(plan, section.samples_for_spacing(plan, 1.5e-3))


@pytest.fixture(scope="session")
def ref_mesh_coarse(ref_cell):
    plan, cell = ref_cell
    return generate_mesh(cell, 1.5e-3)


@pytest.fixture(scope="session")
def ref_result(ref_mesh_coarse):
    plan = pipeline.reference_plan()
    return pipeline.solve_problem(ref_mesh_coarse, plan.helix, plan.materials,
                                  pipeline.reference_currents(), [50.0])[0]


def wire_plan(alpha=0.0, r=0.0, rc=0.005, shield=None, beta=0.0318):
    shield = shield if shield is not None else r + 1.5 * rc if r else 1.5 * rc
    return section.CablePlan(HelixParams(alpha, beta), [section.LayerSpec(r, 1, rc)], shield)


def wire_mesh(plan, h):
    cell = section.build_symmetry_cell(plan, section.samples_for_spacing(plan, h))
    return generate_mesh(cell, h)
