"""Built-in acceptance checks.

Every check returns ``CheckResult`` rows. ``run_all(quick=True)`` uses
coarser meshes so the whole report finishes in well under a minute;
``quick=False`` uses the full-resolution settings.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem, post, section, solver, topology
from .analytic import analytic_round_wire, dc_helix_loss
from .geometry import (HelixParams, MaterialSpec, from_helicoidal, jacobian_inverse_map,
                       metric_product, permeability_tensor, resistivity_tensor, to_helicoidal)
from .mesher import generate_mesh
from .pipeline import reference_currents, reference_plan, prepare, solve_frequency


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    reference: float
    rel_error: float
    passed: bool
    note: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        s = f"{tag}  {self.name:<44} value={self.value:.6g} ref={self.reference:.6g} err={self.rel_error:.3g}"
        return s + (f"  ({self.note})" if self.note else "")


@dataclass
class ValidationReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def format(self) -> str:
        lines = [c.line() for c in self.checks]
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} ({sum(c.passed for c in self.checks)}"
                     f"/{len(self.checks)})")
        return "\n".join(lines)


def _row(name, value, ref, tol, note="", absolute=False):
    err = abs(value - ref) if absolute or ref == 0 else abs(value - ref) / abs(ref)
    return CheckResult(name, float(value), float(ref), float(err), bool(err < tol), note)


def _mesh(plan, h, samples=None):
    cell = section.build_symmetry_cell(plan, samples or section.samples_for_spacing(plan, h))
    return generate_mesh(cell, h)


# ------------------------------------------------------------------ A1


def check_transforms(n: int = 10_000, seed: int = 0, rho_tensor=resistivity_tensor,
                     mu_tensor=permeability_tensor) -> list[CheckResult]:
    """det J, w-independence, round trip and tensor symmetry/definiteness."""
    rng = np.random.default_rng(seed)
    h = HelixParams(1.0, 0.0318)
    mat = MaterialSpec()
    q = np.column_stack([rng.uniform(-0.05, 0.05, (n, 2)), rng.uniform(-0.2, 0.2, n)])
    q2 = q.copy()
    q2[:, 2] = rng.uniform(-0.2, 0.2, n)
    out = []
    det = np.linalg.det(jacobian_inverse_map(q, h))
    out.append(_row("A1 det J = 1", np.abs(det - 1).max(), 0.0, 1e-12, absolute=True))
    dT = np.abs(metric_product(q, h) - metric_product(q2, h)).max()
    R1, R2 = rho_tensor(q, h, mat), rho_tensor(q2, h, mat)
    dR = np.abs(R1 - R2).max() / mat.resistivity
    M1, M2 = mu_tensor(q, h, mat), mu_tensor(q2, h, mat)
    dM = np.abs(M1 - M2).max() / mat.permeability
    out.append(_row("A1 metric/tensors independent of w", max(dT, dR, dM), 0.0, 1e-12, absolute=True))
    p = rng.uniform(-0.05, 0.05, (n, 3))
    rt = max(np.abs(from_helicoidal(to_helicoidal(p, h), h) - p).max(),
             np.abs(to_helicoidal(from_helicoidal(p, h), h) - p).max())
    out.append(_row("A1 round-trip maps [m]", rt, 0.0, 1e-12, absolute=True))
    asym = max(np.abs(R1 - np.swapaxes(R1, -1, -2)).max() / mat.resistivity,
               np.abs(M1 - np.swapaxes(M1, -1, -2)).max() / mat.permeability)
    lam_min = min(np.linalg.eigvalsh(R1 / mat.resistivity).min(), np.linalg.eigvalsh(M1 / mat.permeability).min())
    ok = asym < 1e-12 and lam_min > 0
    out.append(CheckResult("A1 rho/mu tensors symmetric SPD", float(asym), 0.0, float(asym), bool(ok),
                           f"min eigenvalue {lam_min:.3g}"))
    return out


# ------------------------------------------------------------------ A2


def check_reference_loss(target_h: float = 5e-4, min_triangles: int = 20_000) -> list[CheckResult]:
    plan = reference_plan()
    m = _mesh(plan, target_h)
    I = reference_currents()
    res = solve_frequency(prepare(m, plan.helix, plan.materials), I, 50.0)
    P = res.loss_per_length
    dc = dc_helix_loss(I, plan.materials.resistivity, 0.005, plan.conductor_radii(), plan.helix)
    note = f"{m.n_triangles} triangles, {res.dofmap.n_free} dofs"
    out = [_row("A2 loss vs 21.9 uW/m", P * 1e6, 21.9, 0.05, note)]
    inside = dc <= P <= 1.1 * dc
    out.append(CheckResult("A2 loss within [DC, 1.1 DC]", P / dc, 1.0, P / dc - 1, bool(inside),
                           f"DC bound {dc * 1e6:.4f} uW/m"))
    out.append(CheckResult("A2 mesh size", m.n_triangles, min_triangles, 0.0, m.n_triangles >= min_triangles))
    return out


# ------------------------------------------------------------------ A3


def single_wire_plan(alpha: float, layer_radius: float, rc: float = 0.005, shield: float | None = None):
    h = HelixParams(alpha, 0.0318)
    shield = shield if shield is not None else max(layer_radius + 1.5 * rc, 1.5 * rc)
    return section.CablePlan(h, [section.LayerSpec(layer_radius, 1, rc)], shield)


def check_skin_effect(divisions: int = 40, freqs=(50.0, 500.0, 5000.0), tol: float = 5e-3) -> list[CheckResult]:
    rc = 0.005
    plan = single_wire_plan(0.0, 0.0, rc)
    h = rc / divisions
    m = _mesh(plan, h)
    prob = prepare(m, plan.helix, plan.materials)
    I = np.array([1.0 + 0j])
    p_dc = solve_frequency(prob, I, 1e-3).loss_per_length
    out = []
    for f in freqs:
        p = solve_frequency(prob, I, f).loss_per_length
        ref = analytic_round_wire(rc, plan.materials.resistivity, plan.materials.permeability, f).ratio
        out.append(_row(f"A3 R_AC/R_DC at {f:g} Hz", p / p_dc, ref, tol, f"h = rc/{divisions}"))
    return out


# ------------------------------------------------------------------ A4


def check_helix_factor(target_h: float = 5e-4, tol: float = 0.01) -> list[CheckResult]:
    r = 0.03
    I = np.array([1.0 + 0j])
    losses = []
    for alpha in (1.0, 0.0):
        plan = single_wire_plan(alpha, r, shield=0.04)
        m = _mesh(plan, target_h)
        losses.append(solve_frequency(prepare(m, plan.helix, plan.materials), I, 1e-3).loss_per_length)
    ref = np.sqrt(1 + (r / 0.0318) ** 2)
    return [_row("A4 DC twisted/straight loss ratio", losses[0] / losses[1], ref, tol)]


# ------------------------------------------------------------------ A5


def check_topology(target_h: float = 1e-3) -> list[CheckResult]:
    plan = reference_plan()
    m = _mesh(plan, target_h)
    basis = topology.cohomology_basis(m)
    n = len(basis.generators)
    ident = basis.pairing == [[int(i == j) for j in range(n)] for i in range(n)]
    closed = all(not np.any(g.coboundary(m)[m.tri_region == -1]) for g in basis.generators)
    return [
        CheckResult("A5 generators found", n, 13, abs(n - 13) / 13, n == 13),
        CheckResult("A5 pairing is exactly the identity", float(ident), 1.0, float(not ident), bool(ident and closed),
                    "cuts closed on the insulator" if closed else "a cut is not closed"),
    ]


# ------------------------------------------------------------------ A6


def structure_case(target_h: float = 2.5e-3):
    """Small twisted 1+4 cable, roughly a thousand dofs."""
    h = HelixParams(1.0, 0.0318)
    rc = 0.005
    plan = section.CablePlan(h, [section.LayerSpec(0.0, 1, rc), section.LayerSpec(0.015, 4, rc)], 0.025)
    m = _mesh(plan, target_h)
    return plan, m


def check_structure(target_h: float = 2.5e-3, f: float = 50.0, seed: int = 1) -> list[CheckResult]:
    plan, m = structure_case(target_h)
    prob = prepare(m, plan.helix, plan.materials)
    I = np.array([1.0, 0.5, -0.3 + 0.2j, 0.7j, -1.0], dtype=complex)
    exc = fem.Excitation.at_frequency(I, f)
    sys_ = fem.system_at(prob.reduced, prob.dofmap, exc)
    A = sys_.A
    asym = abs(A - A.T).max() if (A - A.T).nnz else 0.0
    out = [CheckResult("A6 A complex symmetric (exact)", float(asym), 0.0, float(asym), asym == 0.0,
                       f"{A.shape[0]} dofs")]

    rng = np.random.default_rng(seed)
    phi = rng.standard_normal(m.n_nodes)
    E = len(m.edges)
    y = np.zeros(E + m.n_nodes)
    y[:E] = phi[m.edges[:, 1]] - phi[m.edges[:, 0]]
    K = prob.reduced.forms.K
    kn = sp.linalg.norm(K, 1) * np.abs(y).max()
    rel = np.abs(K @ y).max() / kn
    out.append(_row("A6 gradients in curl-curl kernel", rel, 0.0, 1e-12, absolute=True))

    x_d, _ = solver.factor_solve(A, sys_.b, tol=1e-12)
    res = post.SolveResult(m, prob.dofmap, plan.helix, plan.materials, exc, x_d)
    got = post.conductor_currents(res)
    out.append(_row("A6 current recovery int J_w dA = I_i", np.abs(got - I).max() / np.abs(I).max(), 0.0, 1e-10,
                    absolute=True))
    x_i, rep = solver.iterative_solve(A, sys_.b, tol=1e-13, max_it=50_000)
    diff = np.abs(x_i - x_d).max() / np.abs(x_d).max()
    out.append(_row("A6 direct vs iterative", diff, 0.0, 1e-8, f"{rep.iterations} BiCGSTAB iterations",
                    absolute=True))
    return out


# ------------------------------------------------------------------ driver


QUICK = dict(a2_h=1e-3, a2_min=10_000, a3_div=20, a3_tol=1e-2, a4_h=1e-3, a5_h=1.5e-3)
FULL = dict(a2_h=5e-4, a2_min=20_000, a3_div=40, a3_tol=5e-3, a4_h=5e-4, a5_h=1e-3)


def run_all(quick: bool = True, echo=None) -> ValidationReport:
    s = QUICK if quick else FULL
    steps = [
        ("A1", lambda: check_transforms()),
        ("A2", lambda: check_reference_loss(s["a2_h"], s["a2_min"])),
        ("A3", lambda: check_skin_effect(s["a3_div"], tol=s["a3_tol"])),
        ("A4", lambda: check_helix_factor(s["a4_h"])),
        ("A5", lambda: check_topology(s["a5_h"])),
        ("A6", lambda: check_structure()),
    ]
    checks = []
    for name, fn in steps:
        t0 = time.perf_counter()
        rows = fn()
        checks += rows
        if echo:
            for r in rows:
                echo(r.line())
            echo(f"      {name} took {time.perf_counter() - t0:.1f} s")
    return ValidationReport(checks)
