from unittest.mock import MagicMock, patch

import numpy as np
import pytest

from assurance.intervals import IntervalVector
from assurance.systems.platoon import PlatoonConfig, build_platoon
from core.config import SimulationConfig
from core.defs import ControllerMode, FilterStatus
from core.exceptions import SimulationCancelledExc
from core.simulator import Simulator, TrajectoryRecord, run_simulation
from core.stat_tracker import FilterStatTracker

PLATOON = build_platoon()


def make_cfg(**kwargs) -> SimulationConfig:
    kwargs.setdefault("horizon", 1.0)
    return SimulationConfig(**kwargs)


@pytest.fixture(scope="module")
def reference_records():
    return [run_simulation(make_cfg(horizon=4.0, seed=seed), PLATOON) for seed in range(100)]


class TestRecord:

    def test_row_count(self):
        record = run_simulation(make_cfg(horizon=0.2), PLATOON, mode=ControllerMode.DESIRED_ONLY)
        assert isinstance(record, TrajectoryRecord)
        assert len(record) == 21
        assert record.states.shape == (21, 5)
        assert record.u_applied.shape == record.u_desired.shape == (21, 2)
        assert record.disturbances.shape == (21, 3)
        assert record.x.shape == (21, 3) and record.z.shape == (21, 2)
        np.testing.assert_array_equal(record.states[0], (-0.25, 0.0, 0.5, 0.25, 0.5))
        assert record.mode == ControllerMode.DESIRED_ONLY

    def test_desired_only_is_raw(self):
        record = run_simulation(make_cfg(horizon=0.1), PLATOON, mode=ControllerMode.DESIRED_ONLY)
        assert set(record.status) == {FilterStatus.RAW}
        assert np.isnan(record.psi).all()
        np.testing.assert_array_equal(record.u_applied, record.u_desired)

    def test_deterministic(self):
        cfg = make_cfg(horizon=0.5, seed=4)
        a = run_simulation(cfg, PLATOON)
        b = run_simulation(cfg, PLATOON)
        np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(a.u_applied, b.u_applied)
        assert a.status == b.status


class TestModes:

    def test_passivity_end_to_end(self):
        # deep inside S_b the zero input always satisfies the constraint
        cfg = make_cfg(x0=(0.1, 0.0, -0.1, 0.1, 0.0), desired_input={"name": "zero"})
        asif = run_simulation(cfg, PLATOON, mode=ControllerMode.ASIF)
        raw = run_simulation(cfg, PLATOON, mode=ControllerMode.DESIRED_ONLY)
        assert asif.status_share(FilterStatus.PASSED_DESIRED) == 1.0
        np.testing.assert_array_equal(asif.states, raw.states)
        assert np.isfinite(asif.psi).all()

    @pytest.mark.slow
    def test_reference_runs_stay_safe(self, reference_records):
        for record in reference_records:
            assert not record.unsafe
            assert record.error is None
            assert record.max_abs_z < 8.0
            assert len(record) == 401

    @pytest.mark.slow
    def test_reference_run_leaves_sb(self, reference_records):
        assert any(r.exited_sb for r in reference_records)

    def test_desired_only_decays_without_disturbance(self):
        cfg = make_cfg(
            horizon=3.0,
            x0=(0.2, -0.1, 0.1, 0.0, 0.0),
            desired_input={"name": "zero"},
            platoon=PlatoonConfig(W=IntervalVector.degenerate([0.0, 0.0, 0.0])),
        )
        record = run_simulation(cfg, mode=ControllerMode.DESIRED_ONLY)
        assert np.abs(record.x[-1]).max() < np.abs(record.x[0]).max()
        np.testing.assert_array_equal(record.disturbances, 0.0)

    def test_backup_only_stays_near_sb(self):
        record = run_simulation(make_cfg(horizon=3.0), PLATOON, mode=ControllerMode.BACKUP_ONLY)
        assert set(record.status) == {FilterStatus.BACKUP_FALLBACK}
        assert record.h[record.times >= 1.0].min() >= -0.05
        assert not record.unsafe

    def test_large_desired_input_goes_unsafe(self):
        cfg = make_cfg(horizon=3.0, desired_input={"name": "constant", "value": [5.0, -5.0]})
        record = run_simulation(cfg, PLATOON, mode=ControllerMode.DESIRED_ONLY)
        assert record.unsafe
        assert record.max_abs_z >= 8.0

    def test_vanilla_cbf_differs_from_asif(self):
        cfg = make_cfg(horizon=1.0)
        asif = run_simulation(cfg, PLATOON, mode=ControllerMode.ASIF)
        vanilla = run_simulation(cfg, PLATOON, mode=ControllerMode.VANILLA_CBF)
        assert not np.array_equal(asif.u_applied, vanilla.u_applied)
        assert np.isnan(vanilla.psi).all()


class TestTracking:

    def test_tracker_counts_every_step(self):
        tracker = FilterStatTracker()
        record = Simulator(make_cfg(horizon=0.5), PLATOON, tracker=tracker).run()
        assert tracker.steps == len(record)
        assert sum(tracker.count(status) for status in FilterStatus) == len(record)
        assert tracker.mean_controller_time > 0
        assert tracker.max_controller_time >= tracker.mean_controller_time

    def test_unsafe_steps_reported(self):
        tracker = FilterStatTracker()
        cfg = make_cfg(horizon=3.0, desired_input={"name": "constant", "value": [5.0, -5.0]})
        Simulator(cfg, PLATOON, tracker=tracker).run(ControllerMode.DESIRED_ONLY)
        assert tracker.get_counters()["unsafe_steps"] > 0

    @pytest.mark.slow
    def test_filter_step_within_budget(self):
        tracker = FilterStatTracker()
        Simulator(make_cfg(horizon=4.0), PLATOON, tracker=tracker).run(ControllerMode.ASIF)
        assert tracker.steps == 401
        assert tracker.mean_controller_time <= 0.05


class TestCancellation:

    def test_interrupt_raises_cancelled(self):
        sim = Simulator(make_cfg(horizon=0.5), PLATOON)
        calls = []

        def desired(t):
            calls.append(t)
            if len(calls) == 3:
                raise KeyboardInterrupt
            return np.zeros(2)

        sim.desired = desired
        with pytest.raises(SimulationCancelledExc, match="after 2 of 51 steps") as info:
            sim.run(ControllerMode.DESIRED_ONLY)
        assert isinstance(info.value.__cause__, KeyboardInterrupt)

    def test_interrupt_closes_progress_bar(self):
        bar = MagicMock()
        sim = Simulator(make_cfg(horizon=0.1), PLATOON, progress_bar=True)
        sim.desired = MagicMock(side_effect=KeyboardInterrupt)
        with patch("core.simulator.tqdm", return_value=bar):
            with pytest.raises(SimulationCancelledExc):
                sim.run(ControllerMode.DESIRED_ONLY)
        bar.close.assert_called_once()
