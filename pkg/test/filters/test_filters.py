import unittest

import numpy as np
import pytest

from motionrv.errors import FilterDesignError, SignalError
from motionrv.filters import (BandKind, BandSpec, FilterRealization,
                              design_bandpass, filter_motion, filtfilt,
                              frequency_response, parse_band)
from motionrv.signals import FrameClock, MotionSeries

FRAME_RATE_HZ = 1.0 / 0.72


def _db(gain):
    return 20.0 * np.log10(np.abs(gain))


class TestDesign(unittest.TestCase):

    def setUp(self):
        self.filt = design_bandpass(BandSpec(), FRAME_RATE_HZ)

    def test_default_band_response(self):
        self.assertLess(np.abs(frequency_response(self.filt, 0.0))[0], 1e-6)
        band = np.linspace(0.2, 0.5, 301)
        peak_db = _db(frequency_response(self.filt, band)).max()
        self.assertLessEqual(abs(peak_db), 0.5)
        self.assertLessEqual(_db(frequency_response(self.filt, 0.05))[0],
                             -20.0)

    def test_order_gives_sections(self):
        self.assertEqual(self.filt.n_sections, 2)
        self.assertEqual(self.filt.order, 4)
        self.assertEqual(self.filt.pad_len, 12)

    def test_stable(self):
        self.assertTrue(np.all(np.abs(self.filt.poles) < 1.0))

    def test_notch_passes_dc(self):
        notch = design_bandpass(
            BandSpec(0.2, 0.5, 4, BandKind.NOTCH), FRAME_RATE_HZ)
        self.assertAlmostEqual(np.abs(frequency_response(notch, 0.0))[0],
                               1.0, places=6)
        centre = np.sqrt(0.2 * 0.5)
        self.assertLess(np.abs(frequency_response(notch, centre))[0], 0.5)

    def test_band_above_nyquist(self):
        with pytest.raises(FilterDesignError):
            design_bandpass(BandSpec(0.2, 0.8), FRAME_RATE_HZ)

    def test_inverted_band(self):
        with pytest.raises(FilterDesignError):
            design_bandpass(BandSpec(0.5, 0.2), FRAME_RATE_HZ)

    def test_odd_order(self):
        with pytest.raises(FilterDesignError):
            design_bandpass(BandSpec(0.2, 0.5, 3), FRAME_RATE_HZ)

    def test_response_above_nyquist(self):
        with pytest.raises(FilterDesignError):
            frequency_response(self.filt, [0.1, 1.0])

    def test_cascade_squares_magnitude(self):
        double = self.filt.cascade(self.filt)
        freqs = np.linspace(0.01, 0.6, 50)
        np.testing.assert_allclose(
            np.abs(frequency_response(double, freqs)),
            np.abs(frequency_response(self.filt, freqs))**2,
            rtol=1e-9, atol=1e-12)

    def test_identity(self):
        identity = FilterRealization.identity(FRAME_RATE_HZ)
        np.testing.assert_allclose(
            frequency_response(identity, [0.0, 0.3, 0.6]), 1.0)

    def test_unstable_sections_rejected(self):
        with pytest.raises(FilterDesignError):
            FilterRealization(sos=[[1.0, 0.0, 0.0, 1.0, -2.0, 1.0]],
                              sample_rate_hz=1.0)


class TestParseBand(unittest.TestCase):

    def test_parse(self):
        spec = parse_band("0.2:0.33")
        self.assertEqual((spec.low_hz, spec.high_hz), (0.2, 0.33))
        self.assertIs(spec.kind, BandKind.BANDPASS)
        self.assertIs(parse_band("0.2:0.5", kind="notch").kind,
                      BandKind.NOTCH)

    def test_malformed(self):
        for text in ("0.2-0.5", "0.2:", "a:b", "0.1:0.2:0.3"):
            with pytest.raises(FilterDesignError):
                parse_band(text)


class TestFiltfilt(unittest.TestCase):

    def test_zero_phase_on_in_band_sines(self):
        filt = design_bandpass(BandSpec(), FRAME_RATE_HZ)
        rng = np.random.default_rng(11)
        n = 400
        t = np.arange(n) / FRAME_RATE_HZ
        for _ in range(20):
            freq = rng.uniform(0.25, 0.45)
            x = np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
            y = filtfilt(filt, x)
            core = slice(50, n - 50)
            xc = np.correlate(y[core], x[core], mode="full")
            lag = int(np.argmax(xc)) - (x[core].size - 1)
            self.assertEqual(lag, 0)

    def test_too_short(self):
        filt = design_bandpass(BandSpec(), FRAME_RATE_HZ)
        with pytest.raises(SignalError):
            filtfilt(filt, np.zeros(3 * filt.pad_len - 1))
        self.assertEqual(filtfilt(filt, np.zeros(3 * filt.pad_len)).size,
                         3 * filt.pad_len)

    def test_rejects_2d(self):
        filt = design_bandpass(BandSpec(), FRAME_RATE_HZ)
        with pytest.raises(SignalError):
            filtfilt(filt, np.zeros((2, 100)))

    def test_filter_motion_per_channel(self):
        clock = FrameClock(n_frames=200)
        t = clock.times
        params = np.zeros((200, 6))
        params[:, 4] = np.sin(2 * np.pi * 0.3 * t)
        params[:, 5] = 1.0  # DC only
        out = filter_motion(MotionSeries(params, clock), BandSpec())
        self.assertEqual(out.clock, clock)
        np.testing.assert_allclose(out.params[:, :4], 0.0, atol=1e-12)
        self.assertLess(np.abs(out.params[50:150, 5]).max(), 1e-3)
        self.assertGreater(np.abs(out.params[50:150, 4]).max(), 0.8)

    def test_realization_sos_untouched_by_filtering(self):
        filt = design_bandpass(BandSpec(), FRAME_RATE_HZ)
        before = filt.sos.copy()
        filtfilt(filt, np.random.default_rng(2).standard_normal(300))
        self.assertFalse(filt.sos.flags.writeable)
        np.testing.assert_array_equal(filt.sos, before)

    def test_slow_sine_is_removed(self):
        filt = design_bandpass(BandSpec(), FRAME_RATE_HZ)
        t = np.arange(400) / FRAME_RATE_HZ
        x = np.sin(2 * np.pi * 0.05 * t)
        y = filtfilt(filt, x)
        rms = np.sqrt(np.mean(y**2)) / np.sqrt(np.mean(x**2))
        self.assertLessEqual(rms, 0.1)

    def test_linear(self):
        filt = design_bandpass(BandSpec(), FRAME_RATE_HZ)
        rng = np.random.default_rng(5)
        x, y = rng.standard_normal((2, 300))
        np.testing.assert_allclose(
            filtfilt(filt, 2.5 * x - 0.75 * y),
            2.5 * filtfilt(filt, x) - 0.75 * filtfilt(filt, y),
            atol=1e-9)

    def test_gain_is_squared_magnitude(self):
        filt = design_bandpass(BandSpec(), FRAME_RATE_HZ)
        t = np.arange(2000) / FRAME_RATE_HZ
        core = slice(300, -300)
        for freq in (0.22, 0.3, 0.45):
            x = np.sin(2 * np.pi * freq * t)
            y = filtfilt(filt, x)
            gain = np.dot(y[core], x[core]) / np.dot(x[core], x[core])
            expected = np.abs(frequency_response(filt, freq)[0])**2
            self.assertAlmostEqual(gain, expected, delta=1e-2)

    def test_filter_motion_channel_order_independent(self):
        clock = FrameClock(n_frames=240)
        params = np.random.default_rng(8).standard_normal((240, 6))
        order = np.array([3, 0, 5, 1, 4, 2])
        direct = filter_motion(MotionSeries(params, clock), BandSpec())
        shuffled = filter_motion(MotionSeries(params[:, order], clock),
                                 BandSpec())
        np.testing.assert_allclose(shuffled.params, direct.params[:, order],
                                   atol=1e-12)
