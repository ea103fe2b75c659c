from pathlib import Path

import numpy as np
import pytest

from helicable.config import ConfigError, config_from_dict, load_config

BASE = {
    "helix": {"alpha": 1.0, "beta": 0.0318},
    "layers": {"radii": [0.0, 0.015], "counts": [1, 4]},
    "conductor": {"radius": 0.005},
    "shield": {"radius": 0.025},
    "excitation": {"current": 1.0, "frequency": 50.0},
    "mesh": {"target_h": 2.5e-3},
}


def _with(**changes):
    raw = {k: dict(v) for k, v in BASE.items()}
    for dotted, v in changes.items():
        sec, key = dotted.split("__", 1)
        raw.setdefault(sec, {})
        if v is None:
            raw[sec].pop(key, None)
        else:
            raw[sec][key] = v
    return raw


def test_minimal(tmp_path):
    cfg = config_from_dict(BASE, tmp_path)
    assert cfg.plan.n_conductors == 5
    assert np.array_equal(cfg.currents, np.ones(5))
    assert cfg.frequencies == [50.0] and cfg.target_h == 2.5e-3
    assert cfg.shield_hw is None and cfg.solver_method == "auto"
    assert cfg.material.resistivity == 1.72e-8


def test_phases_and_explicit_currents():
    cfg = config_from_dict(_with(excitation__current=None, excitation__currents=[1, 2, 2, 2, 2],
                                 excitation__phases_deg=[0, 90, 180, 270, 0]))
    assert np.allclose(cfg.currents, [1, 2j, -2, -2j, 2])


def test_pinned_shield():
    assert config_from_dict(_with(shield__hw=0.0)).shield_hw == 0
    with pytest.raises(ConfigError, match="shield.hw"):
        config_from_dict(_with(shield__hw="grounded"))


@pytest.mark.parametrize("raw, msg", [
    (_with(helix__bogus=1), "unknown config keys: helix.bogus"),
    (_with(conductor__radius=None), "missing required key conductor.radius"),
    (_with(layers__counts=[1]), "differ in length"),
    (_with(excitation__currents=[1.0]), "exactly one of excitation.current"),
    (_with(excitation__current=None, excitation__currents=[1.0, 2.0]), "2 entries for 5 conductors"),
    (_with(excitation__frequency=-5.0), "positive"),
    (_with(excitation__frequencies=[50.0]), "exactly one of excitation.frequency"),
    (_with(mesh__path="m.msh"), "exactly one mesh source"),
    (_with(mesh__target_h=0.0), "mesh.target_h must be positive"),
    (_with(solver__method="magic"), "solver.method"),
    (_with(solver__ordering="metis"), "solver.ordering"),
    (_with(helix__beta=0.0), "beta"),
    (_with(shield__radius=0.01), "does not clear conductors"),
    (_with(output__line={"p0": [0, 0]}), "output.line.p1"),
])
def test_rejections(raw, msg):
    with pytest.raises(ConfigError, match=msg.replace(".", r"\.")):
        config_from_dict(raw)


def test_unwritable_output(tmp_path):
    # a regular file where a directory should be
    (tmp_path / "blocker").write_text("")
    with pytest.raises(ConfigError, match="not writable"):
        config_from_dict(_with(output__loss_table="blocker/sub/l.csv"), tmp_path)


def test_paths_relative_to_file(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('helix.alpha = 1.0\nhelix.beta = 0.0318\nlayers.radii = [0.0]\nlayers.counts = [1]\n'
                 'conductor.radius = 0.005\nshield.radius = 0.0075\nexcitation.current = 1.0\n'
                 'excitation.frequency = 50.0\nmesh.path = "m.msh"\noutput.loss_table = "out/l.csv"\n')
    cfg = load_config(p)
    assert cfg.mesh_path == tmp_path / "m.msh"
    assert cfg.outputs["loss_table"] == tmp_path / "out" / "l.csv"


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("helix.alpha = = 1\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_shipped_reference_config():
    cfg = load_config(Path(__file__).parents[1] / "configs" / "reference_cable.toml")
    assert cfg.plan.n_conductors == 13
    assert np.allclose(cfg.currents, np.sqrt(2) / 13)
    assert cfg.frequencies == [16.7, 50.0, 60.0]
