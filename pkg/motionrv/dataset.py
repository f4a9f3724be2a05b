"""Dataset I/O, channel assembly, sliding windows and scan-level splits.

File formats:

* physio: whitespace-separated columns, one sample per line
  (``trigger respiration pulse`` for HCP-style exports)
* motion ``.par``: 6 whitespace-separated reals per frame,
  ``rot_x rot_y rot_z trans_x trans_y trans_z`` (radians, mm)
* ROI table: comma- or tab-separated, frames x regions, optional header
* RV: ``frame_index,time_s,rv[,support]`` after a ``# format:`` line
"""

import io
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from motionrv.constants import (DEFAULT_PHYSIO_COLUMN, DEFAULT_PHYSIO_RATE_HZ,
                                DEFAULT_STRIDE, DEFAULT_TR_S,
                                DEFAULT_WINDOW_LEN, MOTION_SUFFIX,
                                N_MOTION_CHANNELS, PHYSIO_SUFFIX, ROI_SUFFIX,
                                RV_FORMAT, RV_SUFFIX, SCAN_FORMAT,
                                SCAN_SIDECAR_SUFFIX, ZSCORE_STD_FLOOR)
from motionrv.errors import DataFormatError, ScanMismatchError, ShapeError
from motionrv.filters import BandSpec, filter_motion
from motionrv.logger import get_logger
from motionrv.signals import (FrameClock, MotionSeries, RespiratoryTrace,
                              RoiSeries, RvSeries, motion_to_channels)
from motionrv.tracer import TraceOptions, trace

__all__ = [
    "MotionSeries",
    "RoiSeries",
    "WindowSpec",
    "WindowSample",
    "ArmKind",
    "ExperimentArm",
    "ChannelScaler",
    "ScanBundle",
    "read_physio",
    "write_physio",
    "read_motion_par",
    "write_motion_par",
    "read_roi_table",
    "write_roi_table",
    "read_rv",
    "write_rv",
    "zscore_per_channel",
    "assemble_channels",
    "build_windows",
    "split_scan_ids",
    "split_by_scan",
    "write_scan_bundle",
    "read_scan_bundle",
    "discover_scans",
]

logger = get_logger(__name__)

# 17 significant digits round-trip every float64 exactly
_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class WindowSpec:
    r"""Sliding-window geometry"""
    window_len: int = DEFAULT_WINDOW_LEN
    stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        if self.window_len < 1:
            raise ShapeError(f"window_len must be >= 1, "
                             f"got {self.window_len}")
        if self.stride < 1:
            raise ShapeError(f"stride must be >= 1, got {self.stride}")

    @property
    def target_offsets(self) -> tuple[int, int, int]:
        """First, middle (floor) and last index inside a window."""
        return (0, (self.window_len - 1) // 2, self.window_len - 1)

    def n_windows(self, n_frames: int) -> int:
        if n_frames < self.window_len:
            return 0
        return (n_frames - self.window_len) // self.stride + 1

    def starts(self, n_frames: int) -> np.ndarray:
        return np.arange(self.n_windows(n_frames)) * self.stride


@dataclass(frozen=True, eq=False)
class WindowSample:
    r"""One network input block and its three RV targets"""
    inputs: np.ndarray
    targets: np.ndarray
    scan_id: str
    start_frame: int


class ArmKind(str, Enum):
    BOLD = "bold"
    BOLD_MOTION = "bold+motion"
    BOLD_MOTION_FILTERED = "bold+motion-filtered"


@dataclass(frozen=True)
class ExperimentArm:
    r"""Input configuration compared across experiments.

    ``band`` is only set for the filtered-motion arm.
    """
    kind: ArmKind
    band: BandSpec | None = None

    def __post_init__(self):
        if (self.kind is ArmKind.BOLD_MOTION_FILTERED) != (self.band
                                                           is not None):
            raise ValueError("a band is required for, and only for, the "
                             "filtered-motion arm")

    @classmethod
    def bold_only(cls) -> "ExperimentArm":
        return cls(ArmKind.BOLD)

    @classmethod
    def bold_plus_raw_motion(cls) -> "ExperimentArm":
        return cls(ArmKind.BOLD_MOTION)

    @classmethod
    def bold_plus_filtered_motion(
            cls, band: BandSpec | None = None) -> "ExperimentArm":
        return cls(ArmKind.BOLD_MOTION_FILTERED, band or BandSpec())

    @classmethod
    def from_name(cls,
                  name: str,
                  band: BandSpec | None = None) -> "ExperimentArm":
        kind = ArmKind(name)
        if kind is ArmKind.BOLD_MOTION_FILTERED:
            return cls.bold_plus_filtered_motion(band)
        return cls(kind)

    @property
    def uses_motion(self) -> bool:
        return self.kind is not ArmKind.BOLD

    def n_channels(self, n_roi: int) -> int:
        return n_roi + (N_MOTION_CHANNELS if self.uses_motion else 0)

    def __str__(self) -> str:
        if self.band is not None:
            return f"{self.kind.value}[{self.band}]"
        return self.kind.value


@dataclass(frozen=True, eq=False)
class ChannelScaler:
    r"""Per-channel mean and std recorded from one scan"""
    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray

    @classmethod
    def fit(cls, block: np.ndarray) -> "ChannelScaler":
        block = np.asarray(block, dtype=np.float64)
        mean = block.mean(axis=1)
        std = block.std(axis=1)
        degenerate = std < ZSCORE_STD_FLOOR
        return cls(mean=mean,
                   std=np.where(degenerate, 1.0, std),
                   degenerate=degenerate)

    def apply(self, block: np.ndarray) -> np.ndarray:
        block = np.asarray(block, dtype=np.float64)
        if block.shape[0] != self.mean.size:
            raise ShapeError(f"scaler fitted on {self.mean.size} channels, "
                             f"block has {block.shape[0]}")
        out = (block - self.mean[:, None]) / self.std[:, None]
        # Constant channels collapse to zero instead of dividing by ~0
        out[self.degenerate] = 0.0
        return out


def zscore_per_channel(block) -> tuple[np.ndarray, ChannelScaler]:
    r"""Normalize each row of a ``(channels, frames)`` block to mean 0 and
    population std 1.

    Rows with std below 1e-12 become all zeros.

    Returns:
        The normalized block and the fitted :class:`ChannelScaler`.
    """
    scaler = ChannelScaler.fit(block)
    return scaler.apply(block), scaler


# Readers / writers


def _numeric_rows(path: Path) -> list[tuple[int, list[float]]]:
    """Parse a numeric text table, keeping 1-based line numbers.

    Blank lines and lines starting with ``#`` are skipped.
    """
    rows: list[tuple[int, list[float]]] = []
    try:
        handle = open(path)
    except OSError as e:
        raise DataFormatError(f"cannot open file: {e.strerror}", str(path))
    with handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            cells = stripped.split()
            try:
                values = [float(c) for c in cells]
            except ValueError:
                raise DataFormatError(f"non-numeric value in {cells!r}",
                                      str(path), lineno)
            if not all(np.isfinite(values)):
                raise DataFormatError("non-finite value", str(path), lineno)
            rows.append((lineno, values))
    if not rows:
        raise DataFormatError("file contains no data rows", str(path))
    return rows


def read_physio(path: str | Path,
                column_index: int = DEFAULT_PHYSIO_COLUMN,
                sample_rate_hz: float = DEFAULT_PHYSIO_RATE_HZ,
                start_time_s: float = 0.0) -> RespiratoryTrace:
    r"""Read one column of a whitespace-separated physio log.

    The default column 1 is respiration in the ``trigger respiration pulse``
    layout.
    """
    path = Path(path)
    rows = _numeric_rows(path)
    samples = np.empty(len(rows), dtype=np.float64)
    for i, (lineno, values) in enumerate(rows):
        if column_index >= len(values) or column_index < 0:
            raise DataFormatError(
                f"column {column_index} requested but line has "
                f"{len(values)} columns", str(path), lineno)
        samples[i] = values[column_index]
    return RespiratoryTrace(samples=samples,
                            sample_rate_hz=sample_rate_hz,
                            start_time_s=start_time_s)


def write_physio(path: str | Path, trace: RespiratoryTrace) -> Path:
    r"""Write ``trigger respiration pulse`` columns (trigger and pulse are
    zero) so the default reader column is the respiration."""
    path = Path(path)
    zeros = np.zeros(len(trace))
    np.savetxt(path,
               np.column_stack([zeros, trace.samples, zeros]),
               fmt=_FLOAT_FMT,
               delimiter=" ")
    return path


def read_motion_par(path: str | Path,
                    clock: FrameClock | None = None,
                    tr_s: float = DEFAULT_TR_S) -> MotionSeries:
    r"""Read an MCFLIRT-style ``.par`` file (rotations first).

    Without a ``clock`` the frame count is taken from the file.
    """
    path = Path(path)
    rows = _numeric_rows(path)
    for lineno, values in rows:
        if len(values) != N_MOTION_CHANNELS:
            raise DataFormatError(
                f"expected {N_MOTION_CHANNELS} columns, got {len(values)}",
                str(path), lineno)
    if clock is None:
        clock = FrameClock(n_frames=len(rows), tr_s=tr_s)
    elif len(rows) != clock.n_frames:
        raise DataFormatError(
            f"{len(rows)} frames in file, clock expects {clock.n_frames}",
            str(path))
    params = np.array([values for _, values in rows], dtype=np.float64)
    return MotionSeries(params=params, clock=clock)


def write_motion_par(path: str | Path, motion: MotionSeries) -> Path:
    path = Path(path)
    np.savetxt(path, motion.params, fmt=_FLOAT_FMT, delimiter="  ")
    return path


def _parses_as_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_roi_table(path: str | Path, clock: FrameClock) -> RoiSeries:
    r"""Read a frames x ROIs table, comma- or tab-separated.

    The first data line is a header only when none of its cells is a
    number. Blank lines and ``#`` comment lines are skipped; errors name
    the line in the original file.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DataFormatError(f"cannot open file: {e.strerror}", str(path))
    kept = [(lineno, line)
            for lineno, line in enumerate(text.splitlines(), start=1)
            if line.strip() and not line.strip().startswith("#")]
    if not kept:
        raise DataFormatError("file contains no data rows", str(path))
    delimiter = "\t" if "\t" in kept[0][1] else ","
    first_cells = [c.strip() for c in kept[0][1].split(delimiter)]
    has_header = not any(_parses_as_float(c) for c in first_cells)
    n_roi = len(first_cells)
    for lineno, line in kept:
        n_cells = len(line.split(delimiter))
        if n_cells != n_roi:
            raise DataFormatError(
                f"ragged row: {n_cells} cells, expected {n_roi}", str(path),
                lineno)
    data_linenos = [lineno for lineno, _ in kept][int(has_header):]
    if not data_linenos:
        raise DataFormatError("file contains no data rows", str(path))

    try:
        frame = pd.read_csv(io.StringIO("\n".join(ln for _, ln in kept)),
                            sep=delimiter,
                            header=0 if has_header else None,
                            skipinitialspace=True,
                            float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataFormatError(f"unparseable table: {e}", str(path))
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    signals = numeric.to_numpy(dtype=np.float64)
    bad_rows, bad_cols = np.nonzero(~np.isfinite(signals))
    if bad_rows.size:
        row, col = int(bad_rows[0]), int(bad_cols[0])
        raise DataFormatError(
            f"non-numeric or non-finite value {frame.iat[row, col]!r} in "
            f"column {col + 1}", str(path), data_linenos[row])
    if signals.shape[0] != clock.n_frames:
        raise DataFormatError(
            f"{signals.shape[0]} frames in file, clock expects "
            f"{clock.n_frames}", str(path))
    names = tuple(first_cells) if has_header else ()
    return RoiSeries(signals=signals, clock=clock, roi_names=names)


def write_roi_table(path: str | Path, roi: RoiSeries) -> Path:
    path = Path(path)
    names = roi.roi_names or tuple(f"roi_{j:02d}" for j in range(roi.n_roi))
    np.savetxt(path,
               roi.signals,
               fmt=_FLOAT_FMT,
               delimiter=",",
               header=",".join(names),
               comments="")
    return path


def write_rv(path: str | Path, rv: RvSeries) -> Path:
    r"""Write ``frame_index,time_s,rv`` rows; predictions also carry the
    per-frame ``support`` count."""
    path = Path(path)
    columns = ["frame_index", "time_s", "rv"]
    with_support = rv.support is not None
    if with_support:
        columns.append("support")
    with open(path, "w") as handle:
        handle.write(f"# format: {RV_FORMAT}\n")
        handle.write(f"# tr_s: {rv.clock.tr_s!r}\n")
        handle.write(f"# rv_window_s: {rv.rv_window_s!r}\n")
        handle.write(",".join(columns) + "\n")
        times = rv.clock.times
        for k in range(rv.clock.n_frames):
            row = [str(k), _FLOAT_FMT % times[k], _FLOAT_FMT % rv.values[k]]
            if with_support:
                row.append(str(int(rv.support[k])))
            handle.write(",".join(row) + "\n")
    return path


def read_rv(path: str | Path) -> RvSeries:
    path = Path(path)
    meta: dict[str, str] = {}
    try:
        with open(path) as handle:
            for line in handle:
                if not line.startswith("#"):
                    break
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
    except OSError as e:
        raise DataFormatError(f"cannot open file: {e.strerror}", str(path))
    if meta.get("format") != RV_FORMAT:
        raise DataFormatError(f"not an RV file (format "
                              f"{meta.get('format')!r})", str(path))
    try:
        frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataFormatError(f"unreadable RV table: {e}", str(path))
    columns = [str(c) for c in frame.columns]
    if columns[:3] != ["frame_index", "time_s", "rv"]:
        raise DataFormatError("missing frame_index,time_s,rv header",
                              str(path))
    if frame.empty:
        raise DataFormatError("file contains no data rows", str(path))
    data = frame.apply(pd.to_numeric,
                       errors="coerce").to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(data).all(axis=1))
    if bad.size:
        # Metadata lines, then the column header, then one line per frame
        raise DataFormatError("non-numeric or non-finite value", str(path),
                              len(meta) + 2 + int(bad[0]))
    tr_s = float(meta.get("tr_s", DEFAULT_TR_S))
    clock = FrameClock(n_frames=data.shape[0], tr_s=tr_s,
                       start_time_s=float(data[0, 1]))
    support = data[:, 3].astype(np.int64) if data.shape[1] > 3 else None
    return RvSeries(values=data[:, 2],
                    clock=clock,
                    rv_window_s=float(meta.get("rv_window_s", 6.0)),
                    support=support)


# Channel assembly and windowing


def _check_clock(clock: FrameClock, other: FrameClock, what: str) -> None:
    if clock != other:
        raise ShapeError(f"{what} clock {other} does not match {clock}")


def assemble_channels(roi: RoiSeries,
                      motion: MotionSeries | None,
                      arm: ExperimentArm) -> np.ndarray:
    r"""Stack input channels for one scan: ROIs 0..n-1, then the six
    motion channels (raw or filtered per ``arm``).

    Returns:
        ``(channels, n_frames)`` block in physical units.
    """
    block = roi.signals.T
    if not arm.uses_motion:
        return np.ascontiguousarray(block)
    if motion is None:
        raise ShapeError(f"arm {arm} needs motion parameters")
    _check_clock(roi.clock, motion.clock, "motion")
    if arm.band is not None:
        motion = filter_motion(motion, arm.band)
    return np.vstack([block, motion_to_channels(motion, roi.clock)])


@trace(TraceOptions(trace_params=["scan_id"]))
def build_windows(roi: RoiSeries,
                  motion: MotionSeries | None,
                  rv: RvSeries,
                  arm: ExperimentArm,
                  spec: WindowSpec = WindowSpec(),
                  scan_id: str = "scan",
                  normalize: bool = True) -> list[WindowSample]:
    r"""Cut one scan into overlapping windows.

    Sample ``i`` covers frames ``[i*stride, i*stride + window_len)``; its
    targets are the RV at the window's first, middle and last frame.
    Inputs are z-scored per scan unless ``normalize`` is False.
    """
    _check_clock(roi.clock, rv.clock, "RV")
    n_frames = roi.clock.n_frames
    if n_frames < spec.window_len:
        raise ShapeError(f"scan {scan_id} has {n_frames} frames, shorter "
                         f"than a {spec.window_len}-frame window")
    block = assemble_channels(roi, motion, arm)
    if normalize:
        block, _ = zscore_per_channel(block)

    offsets = np.array(spec.target_offsets)
    samples = []
    for start in spec.starts(n_frames):
        start = int(start)
        samples.append(
            WindowSample(inputs=block[:, start:start + spec.window_len].copy(),
                         targets=rv.values[start + offsets].copy(),
                         scan_id=scan_id,
                         start_frame=start))
    logger.debug(f"scan {scan_id}: {len(samples)} windows, "
                 f"{block.shape[0]} channels")
    return samples


def split_scan_ids(scan_ids: Iterable[str], train_fraction: float,
                   seed: int) -> tuple[list[str], list[str]]:
    r"""Deterministically partition scan ids.

    The train side gets ``round(n * train_fraction)`` scans, clamped so both
    sides keep at least one.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), "
                         f"got {train_fraction}")
    unique = sorted(set(scan_ids))
    if len(unique) < 2:
        raise ValueError(f"need at least 2 scans to split, got "
                         f"{len(unique)}")
    n_train = min(max(int(round(len(unique) * train_fraction)), 1),
                  len(unique) - 1)
    order = np.random.default_rng(seed).permutation(len(unique))
    train = sorted(unique[i] for i in order[:n_train])
    test = sorted(unique[i] for i in order[n_train:])
    return train, test


def split_by_scan(
    samples: Sequence[WindowSample],
    train_fraction: float = 0.8,
    seed: int = 0,
) -> tuple[list[WindowSample], list[WindowSample]]:
    r"""Split windows so that no scan contributes to both sides."""
    train_ids, _ = split_scan_ids((s.scan_id for s in samples),
                                  train_fraction, seed)
    train_set = set(train_ids)
    train = [s for s in samples if s.scan_id in train_set]
    test = [s for s in samples if s.scan_id not in train_set]
    return train, test


# Scan bundles


@dataclass(frozen=True, eq=False)
class ScanBundle:
    r"""Everything recorded for one scan"""
    scan_id: str
    trace: RespiratoryTrace
    motion: MotionSeries
    roi: RoiSeries
    rv: RvSeries
    extra: dict = field(default_factory=dict)

    @property
    def clock(self) -> FrameClock:
        return self.roi.clock


def bundle_paths(data_dir: Path, scan_id: str) -> dict[str, Path]:
    return {
        "physio": data_dir / f"{scan_id}{PHYSIO_SUFFIX}",
        "motion": data_dir / f"{scan_id}{MOTION_SUFFIX}",
        "roi": data_dir / f"{scan_id}{ROI_SUFFIX}",
        "rv": data_dir / f"{scan_id}{RV_SUFFIX}",
        "sidecar": data_dir / f"{scan_id}{SCAN_SIDECAR_SUFFIX}",
    }


def write_scan_bundle(data_dir: str | Path,
                      bundle: ScanBundle) -> dict[str, Path]:
    r"""Write a bundle as physio/par/roi/rv files plus a JSON sidecar."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    paths = bundle_paths(data_dir, bundle.scan_id)
    write_physio(paths["physio"], bundle.trace)
    write_motion_par(paths["motion"], bundle.motion)
    write_roi_table(paths["roi"], bundle.roi)
    write_rv(paths["rv"], bundle.rv)
    sidecar = {
        "format": SCAN_FORMAT,
        "scan_id": bundle.scan_id,
        "tr_s": bundle.clock.tr_s,
        "start_time_s": bundle.clock.start_time_s,
        "n_frames": bundle.clock.n_frames,
        "n_roi": bundle.roi.n_roi,
        "physio_rate_hz": bundle.trace.sample_rate_hz,
        "physio_start_time_s": bundle.trace.start_time_s,
        "rv_window_s": bundle.rv.rv_window_s,
        **bundle.extra,
    }
    paths["sidecar"].write_text(json.dumps(sidecar, indent=2,
                                           sort_keys=True) + "\n")
    return paths


def read_scan_bundle(data_dir: str | Path, scan_id: str) -> ScanBundle:
    data_dir = Path(data_dir)
    paths = bundle_paths(data_dir, scan_id)
    try:
        sidecar = json.loads(paths["sidecar"].read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataFormatError(f"unreadable scan sidecar: {e}",
                              str(paths["sidecar"]))
    if sidecar.get("format") != SCAN_FORMAT:
        raise DataFormatError(f"unsupported scan format "
                              f"{sidecar.get('format')!r}",
                              str(paths["sidecar"]))
    clock = FrameClock(n_frames=int(sidecar["n_frames"]),
                       tr_s=float(sidecar["tr_s"]),
                       start_time_s=float(sidecar.get("start_time_s", 0.0)))
    trace = read_physio(paths["physio"],
                        sample_rate_hz=float(sidecar["physio_rate_hz"]),
                        start_time_s=float(
                            sidecar.get("physio_start_time_s", 0.0)))
    motion = read_motion_par(paths["motion"], clock)
    roi = read_roi_table(paths["roi"], clock)
    rv = read_rv(paths["rv"])
    if rv.clock.n_frames != clock.n_frames:
        raise DataFormatError(f"RV has {rv.clock.n_frames} frames, scan "
                              f"has {clock.n_frames}", str(paths["rv"]))
    rv = RvSeries(values=rv.values, clock=clock,
                  rv_window_s=rv.rv_window_s)
    return ScanBundle(scan_id=scan_id, trace=trace, motion=motion, roi=roi,
                      rv=rv)


def discover_scans(data_dir: str | Path) -> list[str]:
    """Scan ids with a sidecar in ``data_dir``, sorted."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataFormatError("not a directory", str(data_dir))
    return sorted(
        p.name[:-len(SCAN_SIDECAR_SUFFIX)]
        for p in data_dir.glob(f"*{SCAN_SIDECAR_SUFFIX}"))


def check_same_scans(a: Iterable[str], b: Iterable[str]) -> None:
    set_a, set_b = set(a), set(b)
    if set_a != set_b:
        raise ScanMismatchError(sorted(set_a - set_b), sorted(set_b - set_a))
