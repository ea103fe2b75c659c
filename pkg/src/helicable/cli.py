"""Command-line entry point: ``helicable <command> --config run.toml``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import mesh as mesh_mod, pipeline, post, section, topology
from .config import ConfigError, check_writable, load_config


def _pair(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from None
    return x, y


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="helicable", description="2D eddy-current solver for helically twisted cables")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=name != "validate", type=Path, help="TOML run configuration")
        return s

    s = cmd("section", "write the symmetry-cell polygons as CSV")
    s.add_argument("--out", type=Path, help="CSV path (default: output.section_csv)")

    s = cmd("mesh", "generate or import the mesh and write it as MSH 2.2")
    s.add_argument("--from-section", type=Path, help="section CSV to mesh instead of the cable plan")
    s.add_argument("--target-h", type=float, help="override mesh.target_h")
    s.add_argument("--out", type=Path, help="MSH path (default: output.mesh)")

    s = cmd("topology", "compute the cut generators and write them as CSV")
    s.add_argument("--out", type=Path, help="CSV path (default: output.generators)")

    s = cmd("solve", "solve at one frequency and write the loss table")
    s.add_argument("--frequency", type=float, help="override the configured frequency")
    s.add_argument("--out", type=Path, help="loss table path (default: output.loss_table)")

    s = cmd("sweep", "solve at every configured frequency")
    s.add_argument("--frequencies", type=_floats, help="comma-separated list overriding the config")
    s.add_argument("--out", type=Path, help="loss table path (default: output.loss_table)")

    s = cmd("line", "sample Cartesian H and |J| along a segment")
    s.add_argument("--p0", type=_pair, help="start point 'x,y' in metres")
    s.add_argument("--p1", type=_pair, help="end point 'x,y' in metres")
    s.add_argument("--n", type=int, help="number of samples")
    s.add_argument("--out", type=Path, help="CSV path (default: output.line_csv)")

    s = cmd("export", "write the field as a legacy VTK file")
    s.add_argument("--out", type=Path, help="VTK path (default: output.vtk)")
    s.add_argument("--matrix", type=Path, help="also write the system matrix (Matrix Market)")

    s = cmd("validate", "run the built-in acceptance checks")
    s.add_argument("--full", action="store_true", help="full resolution instead of the quick settings")
    return p


def _out(args, cfg, key):
    path = getattr(args, "out", None) or cfg.outputs.get(key)
    if path is None:
        raise ConfigError(f"no output path: pass --out or set output.{key}")
    check_writable(path, f"output.{key}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return Path(path)


def _print_losses(results):
    for r in results:
        per = " ".join(f"{v:.6e}" for v in r.conductor_losses)
        print(f"f = {r.frequency:g} Hz  loss = {r.loss_per_length:.6e} W/m  per conductor: {per}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
    except pipeline.PipelineError as exc:
        print(f"error {exc}", file=sys.stderr)
    return 1


def _dispatch(args) -> int:
    if args.command == "validate":
        from .validation import run_all

        report = run_all(quick=not args.full, echo=print)
        print(report.format().splitlines()[-1])
        return 0 if report.passed else 1

    cfg = load_config(args.config)
    if getattr(args, "target_h", None):
        cfg.target_h, cfg.mesh_path = args.target_h, None

    if args.command == "section":
        if cfg.mesh_path is not None and cfg.section_samples is None:
            raise ConfigError("section needs mesh.target_h or section.samples")
        cell = pipeline.cell_for(cfg)
        path = _out(args, cfg, "section_csv")
        section.write_section_csv(cell, path)
        for p in cell.conductors:
            print(f"conductor {p.conductor_id}: {len(p.points)} vertices, area {p.area:.6e} m^2")
        return 0

    if args.command == "mesh":
        if args.from_section:
            if cfg.target_h is None:
                raise ConfigError("meshing a section needs mesh.target_h or --target-h")
            cell = pipeline._stage("section", section.read_section_csv, args.from_section)
            m = pipeline._stage("mesh", pipeline.generate_mesh, cell, cfg.target_h, cfg.min_angle)
        else:
            m = pipeline.mesh_for(cfg)
        path = _out(args, cfg, "mesh")
        mesh_mod.write_msh_file(m, path)
        st = mesh_mod.mesh_stats(m)
        print(f"{st.n_nodes} nodes, {st.n_triangles} triangles, min angle {st.min_angle_deg:.2f} deg")
        return 0

    if args.command == "topology":
        m = pipeline.mesh_for(cfg)
        basis = pipeline._stage("topology", topology.cohomology_basis, m)
        path = _out(args, cfg, "generators")
        topology.write_generators_csv(basis, path)
        print(f"{len(basis.generators)} generators, pairing is identity: "
              f"{basis.pairing == np.eye(len(basis.generators), dtype=int).tolist()}")
        return 0

    if args.command in ("solve", "sweep"):
        if args.command == "solve":
            freqs = [args.frequency] if args.frequency else cfg.frequencies[:1]
        else:
            freqs = args.frequencies or cfg.frequencies
        if args.out:
            cfg.outputs["loss_table"] = args.out
        results = pipeline.run(cfg, freqs)
        _print_losses(results)
        return 0

    if args.command == "line":
        spec = cfg.line
        p0 = args.p0 or (spec.p0 if spec else None)
        p1 = args.p1 or (spec.p1 if spec else None)
        n = args.n or (spec.n if spec else 200)
        if p0 is None or p1 is None:
            raise ConfigError("line needs --p0/--p1 or output.line.p0/p1")
        path = _out(args, cfg, "line_csv")
        res = pipeline.run(_only(cfg), cfg.frequencies[:1])[0]
        ls = pipeline._stage("post", post.sample_line, res, p0, p1, n)
        ls.write_csv(path)
        print(f"{n} samples written to {path}")
        return 0

    if args.command == "export":
        path = _out(args, cfg, "vtk")
        extra = {"matrix": args.matrix} if args.matrix else {}
        res = pipeline.run(_only(cfg, **extra), cfg.frequencies[:1])[0]
        pipeline._stage("post", post.export_vtk, res, path)
        print(f"wrote {path}")
        return 0
    raise AssertionError(args.command)  # pragma: no cover


def _only(cfg, **outputs):
    """Copy of ``cfg`` that writes nothing but ``outputs``."""
    from dataclasses import replace

    return replace(cfg, outputs=dict(outputs), line=None)


if __name__ == "__main__":
    sys.exit(main())
