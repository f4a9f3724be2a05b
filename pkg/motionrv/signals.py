"""Fundamental time series and the RV ground truth.

All series are float64 numpy arrays held in frozen dataclasses. Validation
happens once, in ``__post_init__``; every function here is pure.
"""

from dataclasses import dataclass, field

import numpy as np

from motionrv.constants import (DEFAULT_PHYSIO_RATE_HZ, DEFAULT_RV_WINDOW_S,
                                DEFAULT_TR_S, N_MOTION_CHANNELS)
from motionrv.errors import ShapeError, SignalError


def _as_finite_array(values, name: str, ndim: int) -> np.ndarray:
    array = np.array(values, dtype=np.float64)
    if array.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-dimensional, "
                         f"got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        bad = int(np.argwhere(~np.isfinite(array))[0][0])
        raise SignalError(f"{name} has a non-finite value at index {bad}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FrameClock:
    r"""Frame timing of one scan: t_k = start_time_s + k * tr_s"""
    n_frames: int
    tr_s: float = DEFAULT_TR_S
    start_time_s: float = 0.0

    def __post_init__(self):
        if not self.tr_s > 0:
            raise SignalError(f"tr_s must be positive, got {self.tr_s}")
        if self.n_frames < 1:
            raise SignalError(f"n_frames must be >= 1, got {self.n_frames}")

    @property
    def frame_rate_hz(self) -> float:
        return 1.0 / self.tr_s

    @property
    def times(self) -> np.ndarray:
        return self.start_time_s + np.arange(self.n_frames) * self.tr_s


@dataclass(frozen=True, eq=False)
class RespiratoryTrace:
    r"""Uniformly sampled respiratory belt waveform"""
    samples: np.ndarray
    sample_rate_hz: float = DEFAULT_PHYSIO_RATE_HZ
    start_time_s: float = 0.0

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise SignalError(f"sample_rate_hz must be positive, "
                              f"got {self.sample_rate_hz}")
        samples = _as_finite_array(self.samples, "respiratory samples", 1)
        if samples.size == 0:
            raise SignalError("respiratory trace is empty")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.start_time_s + np.arange(
            self.samples.size) / self.sample_rate_hz

    @property
    def end_time_s(self) -> float:
        return self.start_time_s + (self.samples.size -
                                    1) / self.sample_rate_hz

    def value_at(self, times: np.ndarray) -> np.ndarray:
        """Linearly interpolated amplitude at arbitrary times, held
        constant beyond the recorded extent."""
        return np.interp(np.asarray(times, dtype=np.float64), self.times,
                         self.samples)


@dataclass(frozen=True, eq=False)
class RvSeries:
    r"""Per-frame respiratory variation.

    ``support`` counts the estimates behind each value when the series is a
    model prediction; frames with no support were filled from a neighbour
    and are reported by :attr:`extrapolated`.
    """
    values: np.ndarray
    clock: FrameClock
    rv_window_s: float = DEFAULT_RV_WINDOW_S
    support: np.ndarray | None = None

    def __post_init__(self):
        values = _as_finite_array(self.values, "RV values", 1)
        if values.size != self.clock.n_frames:
            raise ShapeError(f"RV has {values.size} values for "
                             f"{self.clock.n_frames} frames")
        if np.any(values < 0):
            raise SignalError("RV values must be non-negative")
        object.__setattr__(self, "values", values)
        if self.support is not None:
            support = np.array(self.support, dtype=np.int64)
            if support.shape != values.shape:
                raise ShapeError("RV support must have one entry per frame")
            support.setflags(write=False)
            object.__setattr__(self, "support", support)

    def __len__(self) -> int:
        return self.values.size

    @property
    def extrapolated(self) -> np.ndarray:
        if self.support is None:
            return np.zeros(self.values.size, dtype=bool)
        return self.support == 0


@dataclass(frozen=True, eq=False)
class MotionSeries:
    r"""Rigid-body head motion, one row per frame:
    rot_x, rot_y, rot_z (radians), trans_x, trans_y, trans_z (mm)"""
    params: np.ndarray
    clock: FrameClock

    def __post_init__(self):
        params = _as_finite_array(self.params, "motion parameters", 2)
        if params.shape[1] != N_MOTION_CHANNELS:
            raise ShapeError(f"motion needs {N_MOTION_CHANNELS} columns, "
                             f"got {params.shape[1]}")
        if params.shape[0] != self.clock.n_frames:
            raise ShapeError(f"motion has {params.shape[0]} rows for "
                             f"{self.clock.n_frames} frames")
        object.__setattr__(self, "params", params)

    @property
    def rotations(self) -> np.ndarray:
        return self.params[:, :3]

    @property
    def translations(self) -> np.ndarray:
        return self.params[:, 3:]


@dataclass(frozen=True, eq=False)
class RoiSeries:
    r"""Mean BOLD signal per region, one row per frame"""
    signals: np.ndarray
    clock: FrameClock
    roi_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        signals = _as_finite_array(self.signals, "ROI signals", 2)
        if signals.shape[1] < 1:
            raise ShapeError("ROI table needs at least one region")
        if signals.shape[0] != self.clock.n_frames:
            raise ShapeError(f"ROI table has {signals.shape[0]} rows for "
                             f"{self.clock.n_frames} frames")
        if self.roi_names and len(self.roi_names) != signals.shape[1]:
            raise ShapeError("roi_names must name every ROI column")
        object.__setattr__(self, "signals", signals)

    @property
    def n_roi(self) -> int:
        return self.signals.shape[1]


def compute_rv(trace: RespiratoryTrace,
               clock: FrameClock,
               rv_window_s: float = DEFAULT_RV_WINDOW_S,
               ddof: int = 0) -> RvSeries:
    r"""Respiratory variation: std of the belt waveform in a window centred
    on every frame time.

    Windows are closed intervals ``[t_k - w/2, t_k + w/2]`` truncated to the
    recorded extent. ``ddof=0`` gives the population std.

    Raises:
        SignalError: A frame's window does not overlap the recording, or
            ``rv_window_s`` is not positive.
    """
    if not rv_window_s > 0:
        raise SignalError(f"rv_window_s must be positive, got {rv_window_s}")
    half = rv_window_s / 2.0
    # Index-space bounds avoid building a time axis per frame
    centers = (clock.times - trace.start_time_s) * trace.sample_rate_hz
    half_samples = half * trace.sample_rate_hz
    eps = 1e-9
    lo = np.maximum(np.ceil(centers - half_samples - eps), 0).astype(np.int64)
    hi = np.minimum(np.floor(centers + half_samples + eps),
                    len(trace) - 1).astype(np.int64)

    values = np.empty(clock.n_frames, dtype=np.float64)
    for k in range(clock.n_frames):
        count = hi[k] - lo[k] + 1
        if count <= ddof:
            raise SignalError(
                f"frame {k} (t={clock.times[k]:.3f}s): RV window does not "
                f"overlap the respiratory recording")
        window = trace.samples[lo[k]:hi[k] + 1]
        values[k] = np.std(window, ddof=ddof)
    return RvSeries(values=values, clock=clock, rv_window_s=rv_window_s)


def resample_linear(trace: RespiratoryTrace,
                    new_rate_hz: float) -> RespiratoryTrace:
    r"""Linearly interpolate onto a uniform grid at ``new_rate_hz``.

    The grid starts at the first sample and ends at the last grid point not
    beyond the final sample; when the span is a whole number of new periods
    both endpoints are kept exactly.
    """
    if not new_rate_hz > 0:
        raise SignalError(f"new_rate_hz must be positive, got {new_rate_hz}")
    if len(trace) < 2:
        raise SignalError("resampling needs at least 2 samples")
    if new_rate_hz == trace.sample_rate_hz:
        return RespiratoryTrace(samples=trace.samples.copy(),
                                sample_rate_hz=trace.sample_rate_hz,
                                start_time_s=trace.start_time_s)
    span_s = (len(trace) - 1) / trace.sample_rate_hz
    n_new = int(np.floor(span_s * new_rate_hz + 1e-9)) + 1
    # Interpolate in sample-index space so grid points that coincide with
    # original samples reproduce them exactly
    positions = np.arange(n_new) * (trace.sample_rate_hz / new_rate_hz)
    samples = np.interp(positions, np.arange(len(trace)), trace.samples)
    return RespiratoryTrace(samples=samples,
                            sample_rate_hz=new_rate_hz,
                            start_time_s=trace.start_time_s)


def motion_to_channels(motion: MotionSeries,
                       clock: FrameClock | None = None) -> np.ndarray:
    r"""Motion as a ``(6, n_frames)`` channel block in the fixed order
    rot_x, rot_y, rot_z, trans_x, trans_y, trans_z."""
    if clock is not None and clock.n_frames != motion.clock.n_frames:
        raise ShapeError(f"motion has {motion.clock.n_frames} frames, "
                         f"clock expects {clock.n_frames}")
    return np.ascontiguousarray(motion.params.T)


def framewise_displacement(motion: MotionSeries,
                           head_radius_mm: float = 50.0) -> np.ndarray:
    r"""Framewise displacement in mm.

    Sum of absolute frame-to-frame parameter changes, rotations converted
    to arc length on a sphere of ``head_radius_mm``. FD of frame 0 is 0.
    """
    scaled = motion.params.copy()
    scaled[:, :3] *= head_radius_mm
    fd = np.zeros(motion.clock.n_frames, dtype=np.float64)
    fd[1:] = np.abs(np.diff(scaled, axis=0)).sum(axis=1)
    return fd
