"""Respiratory-band filters for head-motion channels.

Designs are Butterworth band-pass or band-stop (notch) filters realized as
cascaded second-order sections via ``scipy.signal`` (bilinear transform
with prewarping). Application is forward-backward, so the net phase is
zero.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import signal

from motionrv.constants import (DEFAULT_BAND_HIGH_HZ, DEFAULT_BAND_LOW_HZ,
                                DEFAULT_BAND_ORDER)
from motionrv.errors import FilterDesignError, SignalError
from motionrv.signals import MotionSeries

# Poles must stay this far inside the unit circle
STABILITY_MARGIN = 1e-9


class BandKind(str, Enum):
    BANDPASS = "bandpass"
    NOTCH = "notch"


@dataclass(frozen=True)
class BandSpec:
    r"""Respiratory band edges and filter order"""
    low_hz: float = DEFAULT_BAND_LOW_HZ
    high_hz: float = DEFAULT_BAND_HIGH_HZ
    order: int = DEFAULT_BAND_ORDER
    kind: BandKind = BandKind.BANDPASS

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.low_hz:g}:{self.high_hz:g}" \
               f"/order{self.order}"

    def validate(self, sample_rate_hz: float) -> None:
        nyquist = sample_rate_hz / 2.0
        if not 0.0 < self.low_hz < self.high_hz < nyquist:
            raise FilterDesignError(
                f"band {self.low_hz:g}-{self.high_hz:g} Hz must satisfy "
                f"0 < low < high < Nyquist ({nyquist:g} Hz)")
        if self.order <= 0 or self.order % 2 != 0:
            raise FilterDesignError(
                f"filter order must be a positive even integer, "
                f"got {self.order}")


def parse_band(text: str,
               order: int = DEFAULT_BAND_ORDER,
               kind: BandKind | str = BandKind.BANDPASS) -> BandSpec:
    """Parse ``"lo:hi"`` (Hz) into a BandSpec."""
    parts = text.split(":")
    if len(parts) != 2:
        raise FilterDesignError(f"band must look like 'lo:hi', got {text!r}")
    try:
        low, high = float(parts[0]), float(parts[1])
    except ValueError:
        raise FilterDesignError(f"band edges must be numbers, got {text!r}")
    return BandSpec(low_hz=low, high_hz=high, order=order,
                    kind=BandKind(kind))


@dataclass(frozen=True, eq=False)
class FilterRealization:
    r"""Cascade of second-order sections.

    ``sos`` has one row per section in scipy layout
    ``[b0, b1, b2, 1, a1, a2]``.
    """
    sos: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        sos = np.array(self.sos, dtype=np.float64)
        if sos.ndim != 2 or sos.shape[1] != 6 or sos.shape[0] < 1:
            raise FilterDesignError(f"sos must have shape (n, 6), "
                                    f"got {sos.shape}")
        if not np.allclose(sos[:, 3], 1.0):
            sos[:, :3] /= sos[:, 3:4]
            sos[:, 4:] /= sos[:, 3:4]
            sos[:, 3] = 1.0
        pole_radius = np.abs(self._poles(sos))
        if np.any(pole_radius >= 1.0 - STABILITY_MARGIN):
            raise FilterDesignError(
                f"unstable section: max pole radius "
                f"{pole_radius.max():.12f}")
        sos.setflags(write=False)
        object.__setattr__(self, "sos", sos)

    @staticmethod
    def _poles(sos: np.ndarray) -> np.ndarray:
        return np.concatenate([np.roots(section[3:]) for section in sos])

    @property
    def poles(self) -> np.ndarray:
        return self._poles(self.sos)

    @property
    def n_sections(self) -> int:
        return self.sos.shape[0]

    @property
    def order(self) -> int:
        return 2 * self.n_sections

    @property
    def pad_len(self) -> int:
        """Odd-reflection pad applied at each end by :func:`filtfilt`."""
        return 3 * self.order

    @classmethod
    def identity(cls, sample_rate_hz: float) -> "FilterRealization":
        return cls(sos=np.array([[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]]),
                   sample_rate_hz=sample_rate_hz)

    def cascade(self, other: "FilterRealization") -> "FilterRealization":
        """Series connection of this filter followed by ``other``."""
        if other.sample_rate_hz != self.sample_rate_hz:
            raise FilterDesignError("cannot cascade filters designed for "
                                    "different sample rates")
        return FilterRealization(sos=np.vstack([self.sos, other.sos]),
                                 sample_rate_hz=self.sample_rate_hz)


def design_bandpass(spec: BandSpec,
                    sample_rate_hz: float) -> FilterRealization:
    r"""Butterworth band-pass (or band-stop for ``BandKind.NOTCH``).

    ``spec.order`` is the order of the full band filter, i.e. twice the
    low-pass prototype order, so the default order 4 yields two sections.
    """
    spec.validate(sample_rate_hz)
    btype = "bandpass" if spec.kind is BandKind.BANDPASS else "bandstop"
    sos = signal.butter(spec.order // 2, [spec.low_hz, spec.high_hz],
                        btype=btype,
                        output="sos",
                        fs=sample_rate_hz)
    return FilterRealization(sos=sos, sample_rate_hz=sample_rate_hz)


def frequency_response(filt: FilterRealization,
                       freqs_hz) -> np.ndarray:
    r"""Complex gain of the cascade at each frequency in ``freqs_hz``."""
    freqs = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
    nyquist = filt.sample_rate_hz / 2.0
    if np.any(freqs < 0) or np.any(freqs > nyquist * (1 + 1e-12)):
        raise FilterDesignError(f"frequencies must lie in [0, {nyquist:g}] "
                                f"Hz")
    # scipy wants a writable buffer
    _, response = signal.sosfreqz(np.array(filt.sos), worN=freqs,
                                  fs=filt.sample_rate_hz)
    return response


def filtfilt(filt: FilterRealization, channel) -> np.ndarray:
    r"""Zero-phase forward-backward filtering of one channel.

    Both ends are extended by odd-symmetric reflection of
    ``filt.pad_len`` samples. The channel must be at least three pad
    lengths long.
    """
    x = np.asarray(channel, dtype=np.float64)
    if x.ndim != 1:
        raise SignalError(f"filtfilt expects a 1-D channel, got shape "
                          f"{x.shape}")
    min_len = 3 * filt.pad_len
    if x.size < min_len:
        raise SignalError(f"channel of {x.size} samples is too short for "
                          f"zero-phase filtering (need >= {min_len})")
    return signal.sosfiltfilt(np.array(filt.sos), x, padtype="odd",
                              padlen=filt.pad_len)


def filter_motion(motion: MotionSeries, spec: BandSpec) -> MotionSeries:
    r"""Apply :func:`filtfilt` to each motion channel at the frame rate."""
    filt = design_bandpass(spec, motion.clock.frame_rate_hz)
    filtered = np.column_stack(
        [filtfilt(filt, motion.params[:, i])
         for i in range(motion.params.shape[1])])
    return MotionSeries(params=filtered, clock=motion.clock)
