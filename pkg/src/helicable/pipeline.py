"""Section -> mesh -> topology -> assembly -> solve -> post, in one place."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fem, mesh as mesh_mod, post, section, solver, topology
from .config import RunConfig
from .geometry import HelixParams, MaterialSpec
from .mesher import generate_mesh

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """Wraps a failure with the name of the stage that raised it."""

    def __init__(self, stage: str, exc: Exception):
        self.stage = stage
        self.cause = exc
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except PipelineError:
        raise
    except (ValueError, RuntimeError, OSError, ArithmeticError) as exc:
        raise PipelineError(name, exc) from exc


def cell_for(cfg: RunConfig) -> section.SymmetryCell:
    samples = cfg.section_samples
    if samples is None:
        samples = section.samples_for_spacing(cfg.plan, cfg.target_h or cfg.plan.shield_radius / 40)
    return _stage("section", section.build_symmetry_cell, cfg.plan, samples)


def mesh_for(cfg: RunConfig, cell: section.SymmetryCell | None = None) -> mesh_mod.Mesh2D:
    if cfg.mesh_path is not None:
        return _stage("mesh", mesh_mod.read_msh_file, cfg.mesh_path)
    cell = cell or cell_for(cfg)
    return _stage("mesh", generate_mesh, cell, cfg.target_h, cfg.min_angle)


@dataclass
class Problem:
    """Mesh-level data shared by every frequency of a sweep."""

    mesh: mesh_mod.Mesh2D
    helix: HelixParams
    material: MaterialSpec
    basis: topology.CohomologyBasis
    dofmap: fem.DofMap
    reduced: fem.ReducedForms


def prepare(m: mesh_mod.Mesh2D, helix: HelixParams, material: MaterialSpec,
            shield_hw: complex | None = None) -> Problem:
    basis = _stage("topology", topology.cohomology_basis, m)
    dm = _stage("fem", fem.build_dof_map, m, basis, None, shield_hw)
    red = _stage("fem", lambda: fem.reduce_forms(fem.entity_forms(m, helix, material), dm))
    return Problem(m, helix, material, basis, dm, red)


def solve_frequency(prob: Problem, currents, f_hz: float, method: str = "auto",
                    tol: float = solver.DEFAULT_TOL, memory_cap: int = solver.MEMORY_CAP,
                    max_it: int = 20000, ordering: str = "amd") -> post.SolveResult:
    exc = _stage("fem", fem.Excitation.at_frequency, currents, f_hz)
    if len(exc.currents) != prob.mesh.n_conductors:
        raise PipelineError("fem", ValueError(
            f"{len(exc.currents)} currents given for {prob.mesh.n_conductors} conductors"))
    sys_ = fem.system_at(prob.reduced, prob.dofmap, exc)
    x, rep = _stage("solver", solver.solve, sys_.A, sys_.b, tol, method, memory_cap, max_it, ordering)
    return post.SolveResult(prob.mesh, prob.dofmap, prob.helix, prob.material, exc, x, report=rep)


def solve_problem(m, helix, material, currents, frequencies, shield_hw=None, **solver_kw):
    prob = prepare(m, helix, material, shield_hw)
    return [solve_frequency(prob, currents, f, **solver_kw) for f in frequencies]


def write_loss_table(results: list[post.SolveResult], path) -> None:
    n = results[0].mesh.n_conductors if results else 0
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["frequency_hz", "loss_w_per_m"] + [f"loss_c{i}_w_per_m" for i in range(n)])
        for r in results:
            w.writerow([f"{r.frequency:.12g}", f"{r.loss_per_length:.12e}"]
                       + [f"{v:.12e}" for v in r.conductor_losses])


def run(cfg: RunConfig, frequencies=None) -> list[post.SolveResult]:
    """Full pipeline; writes whichever outputs the config names."""
    for path in cfg.outputs.values():
        Path(path).parent.mkdir(parents=True, exist_ok=True)
    cell = None
    if cfg.mesh_path is None:
        cell = cell_for(cfg)
        if "section_csv" in cfg.outputs:
            _stage("section", section.write_section_csv, cell, cfg.outputs["section_csv"])
    m = mesh_for(cfg, cell)
    if m.n_conductors != cfg.plan.n_conductors:
        raise PipelineError("mesh", ValueError(
            f"mesh has {m.n_conductors} conductors, plan has {cfg.plan.n_conductors}"))
    if "mesh" in cfg.outputs:
        _stage("mesh", mesh_mod.write_msh_file, m, cfg.outputs["mesh"])
    prob = prepare(m, cfg.helix, cfg.material, cfg.shield_hw)
    if "generators" in cfg.outputs:
        _stage("topology", topology.write_generators_csv, prob.basis, cfg.outputs["generators"])
    freqs = cfg.frequencies if frequencies is None else list(frequencies)
    results = [solve_frequency(prob, cfg.currents, f, cfg.solver_method, cfg.solver_tol,
                               cfg.memory_cap, cfg.max_it, cfg.ordering) for f in freqs]
    for r in results:
        log.info("f=%g Hz loss=%.6e W/m", r.frequency, r.loss_per_length)
    out = cfg.outputs
    if "loss_table" in out:
        _stage("post", write_loss_table, results, out["loss_table"])
    if "matrix" in out:
        sys_ = fem.system_at(prob.reduced, prob.dofmap, results[0].excitation)
        _stage("solver", solver.export_matrix_market, sys_.A, out["matrix"])
    if "vtk" in out:
        _stage("post", post.export_vtk, results[0], out["vtk"])
    if cfg.line is not None and "line_csv" in out:
        ls = _stage("post", post.sample_line, results[0], cfg.line.p0, cfg.line.p1, cfg.line.n)
        _stage("post", ls.write_csv, out["line_csv"])
    return results


def reference_plan(shield_radius: float = 0.04) -> section.CablePlan:
    """The 13-wire reference cable: 1 + 4 + 8 wires on radii 0, 1.5 and 3 cm."""
    h = HelixParams(1.0, 0.0318)
    rc = 0.005
    layers = [section.LayerSpec(0.0, 1, rc), section.LayerSpec(0.015, 4, rc), section.LayerSpec(0.03, 8, rc)]
    return section.CablePlan(h, layers, shield_radius)


def reference_currents(n: int = 13) -> np.ndarray:
    return np.full(n, np.sqrt(2) / 13, dtype=complex)
