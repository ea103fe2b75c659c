import numpy as np
import pytest
import scipy.sparse as sp
from scipy.io import mmread

from helicable import fem, pipeline, solver
from helicable.geometry import HelixParams, MaterialSpec
from helicable.mesh import make_mesh


def laplacian_2d(n):
    T = sp.diags([-1, 2, -1], [-1, 0, 1], shape=(n, n))
    I = sp.identity(n)
    return (sp.kron(T, I) + sp.kron(I, T)).tocsr()


def complex_test_matrix(n=10, seed=0):
    L = laplacian_2d(n).astype(complex)
    rng = np.random.default_rng(seed)
    return (L + 0.3j * sp.identity(n * n)).tocsr(), rng.standard_normal(n * n) + 1j * rng.standard_normal(n * n)


def test_two_by_two_exact():
    A = sp.csr_matrix(np.array([[2, 1j], [1j, 3]]))
    b = np.array([1.0, 2.0 + 1j])
    # by Cramer's rule
    det = 2 * 3 - 1j * 1j
    ref = np.array([(1 * 3 - 1j * (2 + 1j)) / det, (2 * (2 + 1j) - 1j * 1) / det])
    for m in ("direct", "iterative"):
        x, rep = solver.solve(A, b, method=m, tol=1e-14)
        assert np.allclose(x, ref, rtol=0, atol=1e-14)
        assert rep.method == m


@pytest.mark.parametrize("ordering", ["amd", "rcm"])
def test_laplacian_against_dense(ordering):
    A, b = complex_test_matrix()
    x, rep = solver.factor_solve(A, b, ordering=ordering)
    ref = np.linalg.solve(A.toarray(), b)
    assert np.abs(x - ref).max() <= 1e-12 * np.abs(ref).max()
    assert rep.residual <= 1e-12 and rep.factor_nnz > A.shape[0]


def test_iterative_matches_direct():
    A, b = complex_test_matrix(12, 1)
    xd, _ = solver.factor_solve(A, b)
    xi, rep = solver.iterative_solve(A, b, tol=1e-12)
    assert np.abs(xi - xd).max() <= 1e-10 * np.abs(xd).max()
    assert rep.iterations > 1


def test_diagonal_converges_immediately():
    d = np.arange(1, 51) * (1 + 0.5j)
    b = np.ones(50, dtype=complex)
    x, rep = solver.iterative_solve(sp.diags(d), b, tol=1e-14)
    assert rep.iterations == 1
    assert np.allclose(x, b / d, rtol=1e-14)


def test_rcm_is_permutation_and_narrows_band():
    A = laplacian_2d(15)
    rng = np.random.default_rng(2)
    q = rng.permutation(A.shape[0])
    S = A[q][:, q]
    perm = solver.reorder(S)
    assert np.array_equal(np.sort(perm), np.arange(A.shape[0]))
    assert solver.bandwidth(S[perm][:, perm]) < solver.bandwidth(S)
    assert solver.bandwidth(S[perm][:, perm]) <= 2 * 15


def test_singular_matrix():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(solver.SingularMatrixError):
        solver.factor_solve(A, np.ones(2))
    empty = sp.diags([1.0, 0.0, 1.0]).tocsr()
    empty.eliminate_zeros()
    with pytest.raises(solver.SingularMatrixError) as info:
        solver.factor_solve(empty, np.ones(3))
    assert info.value.dof == 1


def test_iterative_gives_up():
    A, b = complex_test_matrix(12, 3)
    with pytest.raises(solver.ConvergenceError):
        solver.iterative_solve(A, b, tol=1e-14, max_it=3)


def test_zero_diagonal_rejected_by_iterative():
    A = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(solver.SingularMatrixError):
        solver.iterative_solve(A, np.ones(2))


def test_auto_switches_on_memory_cap():
    A, b = complex_test_matrix(8)
    assert solver.solve(A, b)[1].method == "direct"
    assert solver.solve(A, b, memory_cap=1)[1].method == "iterative"
    with pytest.raises(ValueError):
        solver.solve(A, b, method="cholesky")


def test_matrix_market_export(tmp_path):
    A, _ = complex_test_matrix(5)
    p = tmp_path / "A.mtx"
    solver.export_matrix_market(A, p)
    head = p.read_text().splitlines()[0]
    assert head.startswith("%%MatrixMarket matrix coordinate complex general")
    B = sp.csr_matrix(mmread(str(p)))
    assert abs(B - A).max() == 0


def test_cable_system_direct_vs_iterative(ring):
    # the tiny ring keeps BiCGSTAB cheap; scaled to a 5 mm wire
    m = make_mesh(ring.nodes * 5e-3, ring.triangles, ring.tri_region)
    prob = pipeline.prepare(m, HelixParams(0.5, 0.0318), MaterialSpec())
    s = fem.system_at(prob.reduced, prob.dofmap, fem.Excitation.at_frequency([1.0], 50.0))
    xd, _ = solver.solve(s.A, s.b, method="direct", tol=1e-12)
    xi, _ = solver.solve(s.A, s.b, method="iterative", tol=1e-12)
    # forward error is bounded by condition number times residual
    cond = np.linalg.cond(s.A.toarray())
    assert np.linalg.norm(xi - xd) <= 2 * cond * 1e-12 * np.linalg.norm(xd)
    ld = pipeline.solve_frequency(prob, [1.0], 50.0, method="direct").loss_per_length
    li = pipeline.solve_frequency(prob, [1.0], 50.0, method="iterative").loss_per_length
    assert abs(li - ld) <= 1e-8 * ld
