import unittest

import numpy as np
import pytest

from motionrv.errors import ShapeError, SignalError
from motionrv.signals import (FrameClock, MotionSeries, RespiratoryTrace,
                              RvSeries, compute_rv, framewise_displacement,
                              motion_to_channels, resample_linear)


def _sine_trace(freq_hz=1.0 / 3.0, duration_s=60.0, rate_hz=400.0):
    n = int(duration_s * rate_hz) + 1
    t = np.arange(n) / rate_hz
    return RespiratoryTrace(samples=np.sin(2 * np.pi * freq_hz * t),
                            sample_rate_hz=rate_hz)


class TestComputeRv(unittest.TestCase):

    def test_sine_fixture(self):
        """A 6 s window spans two periods of a 1/3 Hz sine"""
        trace = _sine_trace()
        clock = FrameClock(n_frames=60, tr_s=0.72)
        rv = compute_rv(trace, clock, rv_window_s=6.0)
        interior = (clock.times >= 3.0) & (clock.times <= 57.0)
        np.testing.assert_allclose(rv.values[interior],
                                   np.sqrt(0.5),
                                   atol=1e-3)

    def test_constant_trace_is_zero(self):
        trace = RespiratoryTrace(samples=np.full(8001, 2.0))
        rv = compute_rv(trace, FrameClock(n_frames=20))
        np.testing.assert_array_equal(rv.values, np.zeros(20))

    def test_edge_windows_truncate(self):
        trace = _sine_trace(duration_s=20.0)
        clock = FrameClock(n_frames=27, tr_s=0.72)
        rv = compute_rv(trace, clock)
        self.assertEqual(len(rv), 27)
        self.assertTrue(np.all(np.isfinite(rv.values)))
        self.assertGreater(rv.values[0], 0.0)

    def test_frame_outside_recording(self):
        trace = _sine_trace(duration_s=10.0)
        clock = FrameClock(n_frames=40, tr_s=0.72)
        with pytest.raises(SignalError) as exc_info:
            compute_rv(trace, clock)
        self.assertIn("frame", str(exc_info.value))

    def test_sample_std_is_larger(self):
        rng = np.random.default_rng(3)
        trace = RespiratoryTrace(samples=rng.standard_normal(20001))
        clock = FrameClock(n_frames=50)
        population = compute_rv(trace, clock, ddof=0)
        sample = compute_rv(trace, clock, ddof=1)
        self.assertTrue(np.all(sample.values > population.values))

    def test_window_must_be_positive(self):
        with pytest.raises(SignalError):
            compute_rv(_sine_trace(), FrameClock(n_frames=5), rv_window_s=0)

    def test_step_gives_half_the_jump(self):
        t = np.arange(2401) / 400.0
        trace = RespiratoryTrace(samples=np.where(t < 3.0, 0.0, 2.0))
        rv = compute_rv(trace, FrameClock(n_frames=1, start_time_s=3.0))
        self.assertAlmostEqual(rv.values[0], 1.0, delta=1e-6)

    def test_shift_and_scale(self):
        rng = np.random.default_rng(9)
        samples = np.cumsum(rng.standard_normal(24001)) * 0.01
        clock = FrameClock(n_frames=80)
        base = compute_rv(RespiratoryTrace(samples), clock).values
        shifted = compute_rv(RespiratoryTrace(samples + 37.5), clock).values
        np.testing.assert_allclose(shifted, base, rtol=1e-9, atol=1e-12)
        for c in (3.0, -0.25):
            scaled = compute_rv(RespiratoryTrace(c * samples), clock).values
            np.testing.assert_allclose(scaled, abs(c) * base, rtol=1e-12)

    def test_bounded_by_half_range(self):
        rng = np.random.default_rng(10)
        trace = RespiratoryTrace(rng.uniform(-3.0, 5.0, 24001))
        rv = compute_rv(trace, FrameClock(n_frames=80))
        half_range = np.ptp(trace.samples) / 2.0
        self.assertTrue(np.all(rv.values <= half_range))
        self.assertTrue(np.all(rv.values >= 0.0))


class TestSeries(unittest.TestCase):

    def test_clock_times(self):
        clock = FrameClock(n_frames=4, tr_s=0.5, start_time_s=1.0)
        np.testing.assert_allclose(clock.times, [1.0, 1.5, 2.0, 2.5])
        self.assertEqual(clock.frame_rate_hz, 2.0)

    def test_invalid_clock(self):
        with pytest.raises(SignalError):
            FrameClock(n_frames=0)
        with pytest.raises(SignalError):
            FrameClock(n_frames=3, tr_s=-1.0)

    def test_trace_rejects_nan(self):
        with pytest.raises(SignalError) as exc_info:
            RespiratoryTrace(samples=[0.0, np.nan, 1.0])
        self.assertIn("index 1", str(exc_info.value))

    def test_rv_rejects_negative(self):
        with pytest.raises(SignalError):
            RvSeries(values=[0.1, -0.2], clock=FrameClock(n_frames=2))

    def test_rv_length_must_match_clock(self):
        with pytest.raises(ShapeError):
            RvSeries(values=[0.1, 0.2, 0.3], clock=FrameClock(n_frames=2))

    def test_extrapolated_flags(self):
        rv = RvSeries(values=[1.0, 1.0, 1.0],
                      clock=FrameClock(n_frames=3),
                      support=[0, 2, 1])
        np.testing.assert_array_equal(rv.extrapolated, [True, False, False])
        plain = RvSeries(values=[1.0], clock=FrameClock(n_frames=1))
        self.assertFalse(plain.extrapolated.any())

    def test_motion_shape_checks(self):
        clock = FrameClock(n_frames=3)
        with pytest.raises(ShapeError):
            MotionSeries(params=np.zeros((3, 5)), clock=clock)
        with pytest.raises(ShapeError):
            MotionSeries(params=np.zeros((4, 6)), clock=clock)


class TestResample(unittest.TestCase):

    def test_same_rate_is_copy(self):
        trace = _sine_trace(duration_s=2.0)
        out = resample_linear(trace, trace.sample_rate_hz)
        np.testing.assert_array_equal(out.samples, trace.samples)
        self.assertIsNot(out.samples, trace.samples)

    def test_linear_ramp_is_exact(self):
        ramp = RespiratoryTrace(samples=np.arange(401) * 0.25,
                                sample_rate_hz=400.0)
        out = resample_linear(ramp, 100.0)
        self.assertEqual(len(out), 101)
        np.testing.assert_allclose(out.samples, np.arange(101) * 1.0,
                                   atol=1e-12)
        self.assertEqual(out.sample_rate_hz, 100.0)

    def test_needs_two_samples(self):
        with pytest.raises(SignalError):
            resample_linear(RespiratoryTrace(samples=[1.0]), 10.0)


class TestMotionHelpers(unittest.TestCase):

    def test_channel_order(self):
        clock = FrameClock(n_frames=2)
        params = np.array([[1, 2, 3, 4, 5, 6], [7, 8, 9, 10, 11, 12]],
                          dtype=float)
        channels = motion_to_channels(MotionSeries(params, clock))
        self.assertEqual(channels.shape, (6, 2))
        np.testing.assert_array_equal(channels[:, 1], params[1])

    def test_channel_clock_mismatch(self):
        motion = MotionSeries(np.zeros((2, 6)), FrameClock(n_frames=2))
        with pytest.raises(ShapeError):
            motion_to_channels(motion, FrameClock(n_frames=3))

    def test_framewise_displacement(self):
        params = np.zeros((3, 6))
        params[1, 0] = 0.01  # rad
        params[2, 0] = 0.01
        params[2, 4] = 0.3  # mm
        fd = framewise_displacement(MotionSeries(params,
                                                 FrameClock(n_frames=3)))
        np.testing.assert_allclose(fd, [0.0, 0.5, 0.3])
