"""Synthetic scans with known RV ground truth.

A scenario describes one respiration pattern (rate, drift, events) and how
it leaks into head motion and BOLD. Every scan draws from three named
random substreams (resp, motion, bold) keyed by the scenario seed and the
scan index, so a scan is identical no matter which other scans are
generated or in what order.
"""

from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import integrate, ndimage, signal

from motionrv.constants import (BOLD_AR_COEFFICIENT, BOLD_SMOOTH_FRAMES,
                                DEFAULT_N_ROI, DEFAULT_PHYSIO_RATE_HZ,
                                DEFAULT_RV_WINDOW_S, DEFAULT_TR_S,
                                DEFAULT_WINDOW_LEN, EVENT_RAMP_S,
                                N_MOTION_CHANNELS, SCENARIO_FORMAT)
from motionrv.dataset import ScanBundle
from motionrv.errors import ScenarioError
from motionrv.logger import get_logger
from motionrv.signals import (FrameClock, MotionSeries, RespiratoryTrace,
                              RoiSeries, RvSeries, compute_rv)
from motionrv.tracer import TraceOptions, trace

logger = get_logger(__name__)

_STREAMS = {"resp": 0, "motion": 1, "bold": 2}
_SWAY_BAND_HZ = (0.15, 0.45)

# rot_x rot_y rot_z (rad), trans_x trans_y trans_z (mm)
DEFAULT_MOTION_COUPLING = (0.0005, 0.0002, 0.0002, 0.02, 0.08, 0.05)


class EventKind(str, Enum):
    DEEP_BREATH = "deep_breath"
    SHALLOW_SPELL = "shallow_spell"
    BREATH_HOLD = "breath_hold"
    SLOW_BREATHING = "slow_breathing"


# Allowed magnitude per kind: (low, high), open interval
_MAGNITUDE_RANGE = {
    EventKind.DEEP_BREATH: (1.0, np.inf),
    EventKind.SHALLOW_SPELL: (0.0, 1.0),
    EventKind.SLOW_BREATHING: (0.0, 1.0),
}


@dataclass(frozen=True)
class BreathingEvent:
    r"""A change of breathing over ``[onset_s, onset_s + duration_s]``.

    ``magnitude`` multiplies the depth for deep_breath (> 1) and
    shallow_spell (< 1), and the rate for slow_breathing (< 1). It is
    ignored for breath_hold, which takes the depth to zero.
    """
    kind: EventKind
    onset_s: float
    duration_s: float
    magnitude: float = 1.0

    @property
    def end_s(self) -> float:
        return self.onset_s + self.duration_s

    def weight(self, times: np.ndarray,
               ramp_s: float = EVENT_RAMP_S) -> np.ndarray:
        """1 inside the span, raised-cosine ramps to 0 outside it."""
        w = np.zeros_like(times, dtype=np.float64)
        inside = (times >= self.onset_s) & (times <= self.end_s)
        w[inside] = 1.0
        before = (times >= self.onset_s - ramp_s) & (times < self.onset_s)
        w[before] = 0.5 * (1.0 - np.cos(np.pi *
                                        (times[before] - self.onset_s +
                                         ramp_s) / ramp_s))
        after = (times > self.end_s) & (times <= self.end_s + ramp_s)
        w[after] = 0.5 * (1.0 + np.cos(np.pi *
                                       (times[after] - self.end_s) / ramp_s))
        return w


def _six(values, name: str) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if len(values) != N_MOTION_CHANNELS:
        raise ScenarioError(name, f"needs {N_MOTION_CHANNELS} values, got "
                            f"{len(values)}")
    return values


@dataclass(frozen=True)
class ScenarioConfig:
    r"""Parameters of a synthetic scan.

    Rates are in Hz, times in seconds. ``roi_coupling`` holds one gain per
    ROI, or a single gain shared by all of them.
    """
    duration_s: float = 300.0
    tr_s: float = DEFAULT_TR_S
    physio_rate_hz: float = DEFAULT_PHYSIO_RATE_HZ
    rv_window_s: float = DEFAULT_RV_WINDOW_S

    # Breathing rate: base + linear sweep to rate_end_hz + sinusoidal drift
    base_rate_hz: float = 0.3
    rate_end_hz: float | None = None
    drift_amplitude_hz: float = 0.0
    drift_period_s: float = 120.0
    events: tuple[BreathingEvent, ...] = ()
    n_random_events: int = 0
    resp_noise_sigma: float = 0.0

    motion_coupling: tuple[float, ...] = DEFAULT_MOTION_COUPLING
    motion_noise_sigma: tuple[float, ...] = tuple(
        0.1 * g for g in DEFAULT_MOTION_COUPLING)
    motion_drift: tuple[float, ...] = tuple(0.2 * g
                                            for g in DEFAULT_MOTION_COUPLING)
    # Non-respiratory head sway inside the breathing-rate range
    motion_sway: tuple[float, ...] = tuple(0.8 * g
                                           for g in DEFAULT_MOTION_COUPLING)

    n_roi: int = DEFAULT_N_ROI
    roi_coupling: tuple[float, ...] = (0.3, )
    bold_noise_sigma: float = 1.0
    slow_breathing_bold_gain: float = 2.0

    seed: int = 0

    def __post_init__(self):
        for name in ("duration_s", "tr_s", "physio_rate_hz", "rv_window_s",
                     "drift_period_s"):
            if not getattr(self, name) > 0:
                raise ScenarioError(name, "must be positive")
        for name in ("base_rate_hz", "rate_end_hz"):
            value = getattr(self, name)
            if value is not None and not 0.15 <= value <= 0.45:
                raise ScenarioError(name, f"must lie in [0.15, 0.45] Hz, "
                                    f"got {value}")
        if self.drift_amplitude_hz < 0:
            raise ScenarioError("drift_amplitude_hz", "must be >= 0")
        for name in ("resp_noise_sigma", "bold_noise_sigma",
                     "slow_breathing_bold_gain"):
            if getattr(self, name) < 0:
                raise ScenarioError(name, "must be >= 0")
        for name in ("n_random_events", "seed"):
            if getattr(self, name) < 0:
                raise ScenarioError(name, "must be >= 0")
        if self.n_roi < 1:
            raise ScenarioError("n_roi", "must be >= 1")
        object.__setattr__(self, "motion_coupling",
                           _six(self.motion_coupling, "motion_coupling"))
        for name in ("motion_noise_sigma", "motion_drift", "motion_sway"):
            values = _six(getattr(self, name), name)
            if min(values) < 0:
                raise ScenarioError(name, "must be >= 0")
            object.__setattr__(self, name, values)
        coupling = tuple(float(g) for g in self.roi_coupling)
        if len(coupling) not in (1, self.n_roi):
            raise ScenarioError("roi_coupling", f"needs 1 or {self.n_roi} "
                                f"values, got {len(coupling)}")
        object.__setattr__(self, "roi_coupling", coupling)
        if self.n_frames < 2 * DEFAULT_WINDOW_LEN:
            raise ScenarioError("duration_s", f"{self.n_frames} frames do "
                                f"not cover two {DEFAULT_WINDOW_LEN}-frame "
                                f"windows")
        for i, event in enumerate(self.events):
            _check_event(event, self.duration_s, f"events[{i}]")

    @property
    def n_frames(self) -> int:
        return int(np.floor(self.duration_s / self.tr_s + 1e-9))

    @property
    def clock(self) -> FrameClock:
        return FrameClock(n_frames=self.n_frames, tr_s=self.tr_s)

    @property
    def n_physio_samples(self) -> int:
        return int(np.floor(self.duration_s * self.physio_rate_hz +
                            1e-9)) + 1

    def roi_gains(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.roi_coupling),
                               (self.n_roi, )).copy()


def _check_event(event: BreathingEvent, duration_s: float,
                 name: str) -> None:
    if not isinstance(event.kind, EventKind):
        raise ScenarioError(f"{name}.kind", f"unknown kind {event.kind!r}")
    if not event.duration_s > 0:
        raise ScenarioError(f"{name}.duration_s", "must be positive")
    if event.onset_s < 0 or event.end_s > duration_s:
        raise ScenarioError(
            f"{name}.onset_s", f"event [{event.onset_s}, {event.end_s}] s "
            f"lies outside the {duration_s} s scan")
    bounds = _MAGNITUDE_RANGE.get(event.kind)
    if bounds is not None and not bounds[0] < event.magnitude < bounds[1]:
        raise ScenarioError(f"{name}.magnitude",
                            f"{event.kind.value} needs a magnitude in "
                            f"({bounds[0]}, {bounds[1]}), got "
                            f"{event.magnitude}")


def _substream(cfg: ScenarioConfig, scan_index: int,
               name: str) -> np.random.Generator:
    seq = np.random.SeedSequence(cfg.seed,
                                 spawn_key=(scan_index, _STREAMS[name]))
    return np.random.default_rng(seq)


def random_events(cfg: ScenarioConfig,
                  rng: np.random.Generator) -> tuple[BreathingEvent, ...]:
    r"""Draw ``cfg.n_random_events`` events; every draw consumes the same
    number of values so later streams do not depend on the kinds drawn."""
    kinds = list(EventKind)
    magnitude_ranges = {
        EventKind.DEEP_BREATH: (1.5, 2.5),
        EventKind.SHALLOW_SPELL: (0.3, 0.6),
        EventKind.BREATH_HOLD: (0.0, 0.0),
        EventKind.SLOW_BREATHING: (0.5, 0.8),
    }
    events = []
    for _ in range(cfg.n_random_events):
        kind_u, dur_u, onset_u, mag_u = rng.random(4)
        kind = kinds[min(int(kind_u * len(kinds)), len(kinds) - 1)]
        duration = min(4.0 + 11.0 * dur_u, cfg.duration_s)
        onset = onset_u * (cfg.duration_s - duration)
        lo, hi = magnitude_ranges[kind]
        events.append(
            BreathingEvent(kind=kind,
                           onset_s=float(onset),
                           duration_s=float(duration),
                           magnitude=float(lo + (hi - lo) * mag_u)))
    return tuple(events)


def rate_profile(cfg: ScenarioConfig, times: np.ndarray,
                 events=None) -> np.ndarray:
    """Instantaneous breathing rate in Hz."""
    events = cfg.events if events is None else events
    end = cfg.base_rate_hz if cfg.rate_end_hz is None else cfg.rate_end_hz
    rate = cfg.base_rate_hz + (end - cfg.base_rate_hz) * times / cfg.duration_s
    rate = rate + cfg.drift_amplitude_hz * np.sin(
        2.0 * np.pi * times / cfg.drift_period_s)
    for event in events:
        if event.kind is EventKind.SLOW_BREATHING:
            rate = rate * (1.0 + (event.magnitude - 1.0) * event.weight(times))
    return rate


def depth_profile(cfg: ScenarioConfig, times: np.ndarray,
                  events=None) -> np.ndarray:
    """Breathing depth A(t); 1 outside events."""
    events = cfg.events if events is None else events
    depth = np.ones_like(times, dtype=np.float64)
    for event in events:
        if event.kind is EventKind.BREATH_HOLD:
            depth *= 1.0 - event.weight(times)
        elif event.kind in (EventKind.DEEP_BREATH, EventKind.SHALLOW_SPELL):
            depth *= 1.0 + (event.magnitude - 1.0) * event.weight(times)
    return depth


def _scan_events(cfg: ScenarioConfig, rng: np.random.Generator):
    return cfg.events + random_events(cfg, rng)


def gen_respiration(cfg: ScenarioConfig,
                    scan_index: int = 0) -> RespiratoryTrace:
    r"""Belt waveform ``A(t) * sin(2 pi phi(t))`` with ``phi`` the running
    integral of the rate.

    Raises:
        ScenarioError: The rate profile reaches zero or below.
    """
    rng = _substream(cfg, scan_index, "resp")
    events = _scan_events(cfg, rng)
    times = np.arange(cfg.n_physio_samples) / cfg.physio_rate_hz
    rate = rate_profile(cfg, times, events)
    if rate.min() <= 0:
        raise ScenarioError("drift_amplitude_hz",
                            f"breathing rate drops to {rate.min():.3g} Hz")
    phase = integrate.cumulative_trapezoid(rate, times, initial=0.0)
    samples = depth_profile(cfg, times, events) * np.sin(2.0 * np.pi * phase)
    noise = rng.standard_normal(times.size)
    samples = samples + cfg.resp_noise_sigma * noise
    return RespiratoryTrace(samples=samples,
                            sample_rate_hz=cfg.physio_rate_hz)


def _sway(rng: np.random.Generator, clock: FrameClock) -> np.ndarray:
    r"""Unit-variance noise per channel, band-limited to the range
    breathing rates may take so no fixed respiratory filter removes it."""
    white = rng.standard_normal((clock.n_frames, N_MOTION_CHANNELS))
    low, high = _SWAY_BAND_HZ
    high = min(high, 0.95 * clock.frame_rate_hz / 2.0)
    if low >= high:
        sway = white
    else:
        sos = signal.butter(2, [low, high], btype="bandpass",
                            fs=clock.frame_rate_hz, output="sos")
        sway = signal.sosfiltfilt(sos, white, axis=0)
    scale = sway.std(axis=0)
    scale[scale == 0] = 1.0
    return sway / scale


def gen_motion(cfg: ScenarioConfig,
               resp: RespiratoryTrace,
               clock: FrameClock,
               scan_index: int = 0) -> MotionSeries:
    r"""Motion that follows respiration instantaneously.

    Channel i is ``gain_i * resp(t_k)`` plus a cubic drift scaled by
    ``motion_drift[i]``, white noise of ``motion_noise_sigma[i]`` and head
    sway of ``motion_sway[i]``. The sway shares the breathing band, so
    band-passing leaves it in while it removes breathing outside the
    band.
    """
    if clock.times[-1] > resp.end_time_s + 1e-9 or \
            clock.times[0] < resp.start_time_s - 1e-9:
        raise ScenarioError("duration_s", "respiration does not cover the "
                            "frame clock")
    rng = _substream(cfg, scan_index, "motion")
    resp_at_frames = resp.value_at(clock.times)
    gains = np.asarray(cfg.motion_coupling)
    params = resp_at_frames[:, None] * gains[None, :]

    span = max(clock.times[-1] - clock.times[0], clock.tr_s)
    u = 2.0 * (clock.times - clock.times[0]) / span - 1.0
    coeffs = rng.standard_normal((3, N_MOTION_CHANNELS))
    basis = np.stack([u, u**2, u**3], axis=1)
    params += (basis @ coeffs) * np.asarray(cfg.motion_drift)[None, :]

    noise = rng.standard_normal((clock.n_frames, N_MOTION_CHANNELS))
    params += noise * np.asarray(cfg.motion_noise_sigma)[None, :]
    params += _sway(rng, clock) * np.asarray(cfg.motion_sway)[None, :]
    return MotionSeries(params=params, clock=clock)


def slowing_profile(cfg: ScenarioConfig, times: np.ndarray,
                    events=None) -> np.ndarray:
    """Fractional rate reduction from slow_breathing events; 0 outside."""
    events = cfg.events if events is None else events
    slowing = np.zeros_like(times, dtype=np.float64)
    for event in events:
        if event.kind is EventKind.SLOW_BREATHING:
            slowing += (1.0 - event.magnitude) * event.weight(times)
    return slowing


def gen_bold(cfg: ScenarioConfig,
             rv: RvSeries,
             clock: FrameClock,
             scan_index: int = 0) -> RoiSeries:
    r"""ROI signals ``g_j * (k * smooth(s) - smooth(rv)) + AR(1) noise``.

    ``s`` is the slow-breathing profile of the scan's events and ``k``
    ``slow_breathing_bold_gain``: deep breaths lower the signal through
    RV, slow breathing raises it. ``smooth`` is a 9-frame moving average;
    the noise has lag-one coefficient 0.3 and innovation std
    ``bold_noise_sigma``.
    """
    if rv.clock != clock:
        raise ScenarioError("tr_s", "RV and frame clock differ")
    # Same draws as gen_respiration, so the same random events
    events = _scan_events(cfg, _substream(cfg, scan_index, "resp"))
    drive = cfg.slow_breathing_bold_gain * slowing_profile(
        cfg, clock.times, events) - rv.values
    rng = _substream(cfg, scan_index, "bold")
    smooth = ndimage.uniform_filter1d(drive,
                                      BOLD_SMOOTH_FRAMES,
                                      mode="nearest")
    innovations = rng.standard_normal((cfg.n_roi, clock.n_frames))
    noise = signal.lfilter([1.0], [1.0, -BOLD_AR_COEFFICIENT],
                           cfg.bold_noise_sigma * innovations,
                           axis=1)
    signals = cfg.roi_gains()[:, None] * smooth[None, :] + noise
    return RoiSeries(signals=signals.T, clock=clock)


@trace(TraceOptions(trace_params=["scan_index"]))
def gen_scan(cfg: ScenarioConfig,
             scan_index: int = 0,
             scan_id: str | None = None) -> ScanBundle:
    r"""Generate one consistent scan. The RV is computed from the generated
    trace by :func:`motionrv.signals.compute_rv`."""
    scan_id = scan_id or f"synth-{scan_index:04d}"
    clock = cfg.clock
    resp = gen_respiration(cfg, scan_index)
    rv = compute_rv(resp, clock, cfg.rv_window_s)
    motion = gen_motion(cfg, resp, clock, scan_index)
    roi = gen_bold(cfg, rv, clock, scan_index)
    logger.debug(f"generated {scan_id}: {clock.n_frames} frames, "
                 f"mean RV {rv.values.mean():.4g}")
    return ScanBundle(scan_id=scan_id,
                      trace=resp,
                      motion=motion,
                      roi=roi,
                      rv=rv,
                      extra={
                          "scenario_seed": cfg.seed,
                          "scan_index": scan_index
                      })


# Scenario files: ``key = value`` per line, lists comma-separated, ``#``
# comments. ``event = kind, onset_s, duration_s[, magnitude]`` may repeat.

_LIST_KEYS = ("motion_coupling", "motion_noise_sigma", "motion_drift",
              "motion_sway", "roi_coupling")
_INT_KEYS = ("n_roi", "n_random_events", "seed")


def _parse_float(text: str, key: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ScenarioError(key, f"not a number: {text.strip()!r}")
    if not np.isfinite(value):
        raise ScenarioError(key, f"not finite: {text.strip()!r}")
    return value


def _parse_event(text: str, key: str) -> BreathingEvent:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (3, 4):
        raise ScenarioError(key, "expected kind, onset_s, duration_s"
                            "[, magnitude]")
    try:
        kind = EventKind(parts[0])
    except ValueError:
        raise ScenarioError(f"{key}.kind", f"unknown kind {parts[0]!r}")
    return BreathingEvent(
        kind=kind,
        onset_s=_parse_float(parts[1], f"{key}.onset_s"),
        duration_s=_parse_float(parts[2], f"{key}.duration_s"),
        magnitude=_parse_float(parts[3], f"{key}.magnitude")
        if len(parts) == 4 else 1.0)


def parse_scenario(text: str) -> ScenarioConfig:
    r"""Parse scenario text; omitted keys keep their defaults.

    Raises:
        ScenarioError: Unknown key, malformed value or invalid scenario;
            the message names the field.
    """
    known = {f.name for f in fields(ScenarioConfig)} - {"events"}
    values: dict = {}
    events = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ScenarioError(f"line {lineno}", "expected key = value")
        if key == "event":
            events.append(_parse_event(value, f"events[{len(events)}]"))
        elif key == "format":
            if value != SCENARIO_FORMAT:
                raise ScenarioError("format", f"unsupported {value!r}")
        elif key not in known:
            raise ScenarioError(key, "unknown key")
        elif key in _LIST_KEYS:
            values[key] = tuple(
                _parse_float(v, key) for v in value.split(","))
        elif key in _INT_KEYS:
            number = _parse_float(value, key)
            if number != int(number):
                raise ScenarioError(key, f"must be an integer, got {value}")
            values[key] = int(number)
        elif key == "rate_end_hz" and value.lower() in ("", "none"):
            values[key] = None
        else:
            values[key] = _parse_float(value, key)
    return ScenarioConfig(events=tuple(events), **values)


def read_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(str(path), f"cannot read: {e.strerror}")
    return parse_scenario(text)


def format_scenario(cfg: ScenarioConfig) -> str:
    lines = [f"format = {SCENARIO_FORMAT}"]
    for f in fields(ScenarioConfig):
        value = getattr(cfg, f.name)
        if f.name == "events":
            for event in value:
                lines.append(f"event = {event.kind.value}, "
                             f"{event.onset_s!r}, {event.duration_s!r}, "
                             f"{event.magnitude!r}")
        elif f.name in _LIST_KEYS:
            lines.append(f"{f.name} = " + ", ".join(repr(v) for v in value))
        else:
            lines.append(f"{f.name} = {value!r}")
    return "\n".join(lines) + "\n"


def write_scenario(path: str | Path, cfg: ScenarioConfig) -> Path:
    path = Path(path)
    path.write_text(format_scenario(cfg))
    return path


__all__ = [
    "EventKind",
    "BreathingEvent",
    "ScenarioConfig",
    "rate_profile",
    "depth_profile",
    "random_events",
    "gen_respiration",
    "gen_motion",
    "gen_bold",
    "gen_scan",
    "parse_scenario",
    "read_scenario",
    "format_scenario",
    "write_scenario",
]
