"""Run configuration read from a TOML file of dotted keys.

Recognised keys (SI units, frequencies in Hz)::

    helix.alpha, helix.beta, helix.handedness
    layers.radii, layers.counts, layers.phase_offsets
    conductor.radius
    shield.radius, shield.hw              # "floating" (default) or a number
    material.resistivity, material.permeability
    excitation.current | excitation.currents
    excitation.phases_deg
    excitation.frequency | excitation.frequencies
    section.samples
    mesh.target_h | mesh.path, mesh.min_angle
    solver.method, solver.tol, solver.memory_cap, solver.max_it, solver.ordering
    output.loss_table, output.section_csv, output.mesh, output.generators,
    output.vtk, output.matrix, output.line_csv,
    output.line.p0, output.line.p1, output.line.n

Relative output and mesh paths are taken relative to the config file.
"""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import MU0, RHO_COPPER, HelixParams, MaterialSpec
from .section import CablePlan, LayerSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


_KEYS = {
    "helix.alpha", "helix.beta", "helix.handedness",
    "layers.radii", "layers.counts", "layers.phase_offsets",
    "conductor.radius",
    "shield.radius", "shield.hw",
    "material.resistivity", "material.permeability",
    "excitation.current", "excitation.currents", "excitation.phases_deg",
    "excitation.frequency", "excitation.frequencies",
    "section.samples",
    "mesh.target_h", "mesh.path", "mesh.min_angle",
    "solver.method", "solver.tol", "solver.memory_cap", "solver.max_it", "solver.ordering",
    "output.loss_table", "output.section_csv", "output.mesh", "output.generators",
    "output.vtk", "output.matrix", "output.line_csv",
    "output.line.p0", "output.line.p1", "output.line.n",
}


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


@dataclass
class LineSpec:
    p0: tuple[float, float]
    p1: tuple[float, float]
    n: int = 200


@dataclass
class RunConfig:
    plan: CablePlan
    currents: np.ndarray
    frequencies: list[float]
    target_h: float | None = None
    mesh_path: Path | None = None
    min_angle: float = 20.0
    section_samples: int | None = None
    shield_hw: complex | None = None
    solver_method: str = "auto"
    solver_tol: float = 1e-10
    memory_cap: int = 2 * 1024**3
    max_it: int = 20000
    ordering: str = "amd"
    outputs: dict[str, Path] = field(default_factory=dict)
    line: LineSpec | None = None

    @property
    def helix(self) -> HelixParams:
        return self.plan.helix

    @property
    def material(self) -> MaterialSpec:
        return self.plan.materials


def check_writable(path, what: str = "output") -> None:
    """Fail early unless ``path`` can be created; missing parents are made on write."""
    d = Path(path).absolute().parent
    while not d.exists():
        d = d.parent
    if not d.is_dir() or not os.access(d, os.W_OK):
        raise ConfigError(f"{what}: directory {d} is not writable")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw, base=path.parent)


def config_from_dict(raw: dict, base=".") -> RunConfig:
    base = Path(base)
    flat = _flatten(raw)
    unknown = sorted(set(flat) - _KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    def need(key):
        if key not in flat:
            raise ConfigError(f"missing required key {key}")
        return flat[key]

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    try:
        helix = HelixParams(float(need("helix.alpha")), float(need("helix.beta")),
                            int(flat.get("helix.handedness", 1)))
        radii = [float(r) for r in need("layers.radii")]
        counts = [int(c) for c in need("layers.counts")]
        if len(radii) != len(counts):
            raise ConfigError("layers.radii and layers.counts differ in length")
        offsets = [float(p) for p in flat.get("layers.phase_offsets", [0.0] * len(radii))]
        if len(offsets) != len(radii):
            raise ConfigError("layers.phase_offsets has the wrong length")
        rc = float(need("conductor.radius"))
        layers = [LayerSpec(r, c, rc, o) for r, c, o in zip(radii, counts, offsets)]
        mat = MaterialSpec(float(flat.get("material.resistivity", RHO_COPPER)),
                           float(flat.get("material.permeability", MU0)))
        plan = CablePlan(helix, layers, float(need("shield.radius")), mat)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    n = plan.n_conductors
    if ("excitation.current" in flat) == ("excitation.currents" in flat):
        raise ConfigError("give exactly one of excitation.current and excitation.currents")
    if "excitation.current" in flat:
        mags = np.full(n, float(flat["excitation.current"]))
    else:
        mags = np.asarray(flat["excitation.currents"], dtype=float)
        if len(mags) != n:
            raise ConfigError(f"excitation.currents has {len(mags)} entries for {n} conductors")
    phases = np.radians(np.asarray(flat.get("excitation.phases_deg", np.zeros(n)), dtype=float))
    if len(phases) != n:
        raise ConfigError("excitation.phases_deg has the wrong length")
    currents = mags * np.exp(1j * phases)

    if ("excitation.frequency" in flat) == ("excitation.frequencies" in flat):
        raise ConfigError("give exactly one of excitation.frequency and excitation.frequencies")
    freqs = flat.get("excitation.frequencies", [flat.get("excitation.frequency")])
    freqs = [float(f) for f in freqs]
    if not freqs or any(not f > 0 for f in freqs):
        raise ConfigError("frequencies must be positive")

    if ("mesh.target_h" in flat) == ("mesh.path" in flat):
        raise ConfigError("give exactly one mesh source: mesh.target_h or mesh.path")
    target_h = float(flat["mesh.target_h"]) if "mesh.target_h" in flat else None
    if target_h is not None and not target_h > 0:
        raise ConfigError("mesh.target_h must be positive")
    mesh_path = resolve(flat["mesh.path"]) if "mesh.path" in flat else None

    hw = flat.get("shield.hw", "floating")
    if isinstance(hw, str):
        if hw != "floating":
            raise ConfigError('shield.hw must be "floating" or a number')
        hw = None
    else:
        hw = complex(hw)

    method = str(flat.get("solver.method", "auto"))
    if method not in ("auto", "direct", "iterative"):
        raise ConfigError(f"unknown solver.method {method!r}")
    ordering = str(flat.get("solver.ordering", "amd"))
    if ordering not in ("amd", "rcm"):
        raise ConfigError(f"unknown solver.ordering {ordering!r}")

    outputs = {k.split(".", 1)[1]: resolve(v) for k, v in flat.items()
               if k.startswith("output.") and not k.startswith("output.line.")}
    for key, p in outputs.items():
        check_writable(p, f"output.{key}")

    line = None
    if any(k.startswith("output.line.") for k in flat):
        try:
            line = LineSpec(tuple(map(float, flat["output.line.p0"])), tuple(map(float, flat["output.line.p1"])),
                            int(flat.get("output.line.n", 200)))
        except KeyError as exc:
            raise ConfigError(f"missing required key {exc.args[0]}") from None

    samples = flat.get("section.samples")
    return RunConfig(
        plan=plan, currents=currents, frequencies=freqs, target_h=target_h, mesh_path=mesh_path,
        min_angle=float(flat.get("mesh.min_angle", 20.0)),
        section_samples=int(samples) if samples is not None else None,
        shield_hw=hw, solver_method=method, solver_tol=float(flat.get("solver.tol", 1e-10)),
        memory_cap=int(flat.get("solver.memory_cap", 2 * 1024**3)),
        max_it=int(flat.get("solver.max_it", 20000)), ordering=ordering,
        outputs=outputs, line=line,
    )
