from pathlib import Path

import numpy as np
import pytest

from core.config import Config, SimulationConfig, load_config, parse_platoon
from core.defs import BoundingBoxMode, ControllerMode, GradientMethod
from core.exceptions import ConfigMalformedExc

EXAMPLE_CONFIG = Path(__file__).resolve().parents[2] / "config.yml.example"


def test_defaults():
    conf = Config(data={})
    sim = conf.simulation
    assert sim.controller_mode == ControllerMode.ASIF
    assert sim.horizon == 4.0 and sim.dt == 0.01 and sim.dt_embed == 0.01
    assert sim.x0 == (-0.25, 0.0, 0.5, 0.25, 0.5)
    assert sim.gradient_method == GradientMethod.DIRECT
    assert sim.rows == 401
    assert sim.platoon.delta == 2.25
    assert conf.verification.falsification_samples == 10_000
    assert conf.final_statistics_table is True
    assert conf.progress_bar is False
    assert conf.path is None


def test_example_file_loads():
    conf = load_config(EXAMPLE_CONFIG)
    sim = conf.simulation
    assert conf.path == EXAMPLE_CONFIG
    assert sim.platoon.sb_bound == BoundingBoxMode.EIGEN
    np.testing.assert_array_equal(sim.platoon.A, [[-1, 0], [1, -1], [0, 1]])
    np.testing.assert_allclose(sim.platoon.W.lower, [-0.1, -0.1, -0.1])
    assert sim.desired_input == {"name": "reference"}
    assert conf.progress_bar is True


def test_missing_file(tmp_path):
    with pytest.raises(ConfigMalformedExc, match="not found or malformed"):
        Config(tmp_path / "absent.yml")


def test_empty_file_means_defaults(tmp_path):
    path = tmp_path / "empty.yml"
    path.write_text("", encoding="utf-8")
    assert Config(path).simulation.horizon == 4.0


def test_yaml_file(tmp_path):
    path = tmp_path / "config.yml"
    path.write_text(
        "horizon: 1.5\ncontroller_mode: vanilla-cbf\nplatoon:\n  delta: 2.0\n  sb_bound: ellipsoid\n"
        "logging:\n  debug: true\n",
        encoding="utf-8",
    )
    conf = Config(path)
    assert conf.simulation.horizon == 1.5
    assert conf.simulation.controller_mode == ControllerMode.VANILLA_CBF
    assert conf.simulation.platoon.delta == 2.0
    assert conf.simulation.platoon.sb_bound == BoundingBoxMode.ELLIPSOID
    assert conf.debug is True


@pytest.mark.parametrize(
    "data",
    [
        {"horizont": 4.0},
        {"platoon": {"gamma": 1.0}},
        {"logging": {"verbose": True}},
        {"verification": {"samples": 10}},
        {"platoon": {"W": {"lower": [0, 0, 0]}}},
        {"platoon": {"W": {"lower": [0, 0, 0], "upper": [1, 1, 1], "mid": [0, 0, 0]}}},
    ],
)
def test_unknown_or_partial_keys_fail_closed(data):
    with pytest.raises(ConfigMalformedExc):
        Config(data=data)


@pytest.mark.parametrize(
    "data",
    [
        {"dt": 0.0},
        {"dt_embed": -0.01},
        {"horizon": -1.0},
        {"x0": [0.0, 0.0]},
        {"controller_mode": "autopilot"},
        {"gradient_method": "adjoint"},
        {"desired_input": {"name": "joystick"}},
        {"platoon": {"A": [[1, 0], [1, -1], [0, 1]]}},
        {"platoon": {"kappa": -2.0}},
        {"verification": {"seed": 0, "shell_samples": 10, "monte_carlo_samples": 5, "bogus": 1}},
    ],
)
def test_invalid_values(data):
    with pytest.raises(ConfigMalformedExc):
        Config(data=data)


def test_non_mapping_root():
    with pytest.raises(ConfigMalformedExc):
        Config(data=[1, 2, 3])


def test_larger_platoon_gets_matching_disturbance_box():
    A = [[-1, 0, 0], [1, -1, 0], [0, 1, -1], [0, 0, 1]]
    cfg = parse_platoon({"A": A})
    assert (cfg.N, cfg.K) == (4, 3)
    assert cfg.W.n == 4


class TestOverride:

    def test_apply(self):
        conf = Config(data={}).override(mode="backup-only", seed=7, out="/tmp/run")
        assert conf.simulation.controller_mode == ControllerMode.BACKUP_ONLY
        assert conf.simulation.seed == 7
        assert conf.simulation.output_path == Path("/tmp/run")

    def test_none_keeps_values(self):
        conf = Config(data={"seed": 3}).override()
        assert conf.simulation.seed == 3
        assert conf.simulation.controller_mode == ControllerMode.ASIF

    def test_invalid_mode(self):
        with pytest.raises(ConfigMalformedExc):
            Config(data={}).override(mode="manual")


def test_rows_count():
    assert SimulationConfig(horizon=0.05, dt=0.01).rows == 6
    assert SimulationConfig(horizon=0.0).rows == 1
