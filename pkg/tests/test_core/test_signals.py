import numpy as np
import pytest

from assurance.intervals import IntervalVector
from core.exceptions import ConfigMalformedExc
from core.signals import desired_input_signal, disturbance_batch, disturbance_signal

W = IntervalVector.symmetric([0.1, 0.1, 0.1])


class TestDisturbance:

    def test_degenerate_box_gives_constant(self):
        signal = disturbance_signal(0, IntervalVector.degenerate([0.05, -0.02]), 2.0)
        for t in (0.0, 0.3, 1.7, 2.0, 5.0):
            np.testing.assert_allclose(signal(t), [0.05, -0.02])

    def test_values_stay_in_box(self):
        signal = disturbance_signal(3, W, 4.0)
        for t in np.linspace(0.0, 4.0, 97):
            assert W.contains(signal(t))

    def test_seed_determinism(self):
        a = disturbance_signal(11, W, 4.0)
        b = disturbance_signal(11, W, 4.0)
        c = disturbance_signal(12, W, 4.0)
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_lipschitz(self):
        # slope is bounded by box width over segment length
        signal = disturbance_signal(5, W, 4.0, segment=0.25)
        ts = np.linspace(0.0, 4.0, 401)
        values = np.array([signal(t) for t in ts])
        slopes = np.abs(np.diff(values, axis=0)) / np.diff(ts)[:, None]
        assert slopes.max() <= 0.2 / 0.25 + 1e-9

    def test_knots_cover_horizon(self):
        assert disturbance_signal(0, W, 1.0, segment=0.25).knots == 5
        assert disturbance_signal(0, W, 0.0).knots == 2

    def test_bad_segment(self):
        with pytest.raises(ValueError):
            disturbance_signal(0, W, 1.0, segment=0.0)

    def test_batch_shape(self):
        batch = disturbance_batch(0, W, 1.0, 4, segment=0.25)
        assert batch.values.shape == (4, 5, 3)
        assert batch(0.4).shape == (4, 3)

    def test_batch_members_independent_of_count(self):
        small = disturbance_batch(9, W, 1.0, 2)
        large = disturbance_batch(9, W, 1.0, 5)
        np.testing.assert_array_equal(small.values, large.values[:2])


class TestDesiredInput:

    def test_reference(self):
        u_d = desired_input_signal({"name": "reference"}, 2)
        np.testing.assert_allclose(u_d(0.0), [0.0, 0.2], atol=1e-12)
        np.testing.assert_allclose(u_d(2.0), [-0.3, -0.2], atol=1e-12)

    def test_default_is_reference(self):
        np.testing.assert_allclose(desired_input_signal(None, 2)(2.0), [-0.3, -0.2], atol=1e-12)

    def test_zero_and_constant(self):
        np.testing.assert_array_equal(desired_input_signal({"name": "zero"}, 2)(1.0), [0.0, 0.0])
        u_d = desired_input_signal({"name": "constant", "value": [5.0, -5.0]}, 2)
        np.testing.assert_array_equal(u_d(3.0), [5.0, -5.0])

    def test_custom_sinusoid(self):
        u_d = desired_input_signal(
            {"name": "sinusoid", "amplitudes": [1.0], "frequencies": [np.pi], "phases": [0.0]}, 1,
        )
        np.testing.assert_allclose(u_d(0.5), [1.0])

    @pytest.mark.parametrize(
        "entry",
        [
            {"name": "joystick"},
            {"name": "zero", "value": [1.0, 1.0]},
            {"name": "constant", "value": [1.0]},
            {"name": "sinusoid", "amplitudes": [1.0, 1.0]},
            {"name": "sinusoid", "amplitudes": [1.0], "frequencies": [1.0], "phases": [0.0]},
        ],
    )
    def test_invalid(self, entry):
        with pytest.raises(ConfigMalformedExc):
            desired_input_signal(entry, 2)
