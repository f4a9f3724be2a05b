"""Evaluation metrics and the paired comparison between experiment arms."""

import itertools
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numba as nb
import numpy as np
import pandas as pd

from motionrv.constants import (ERROR_METRICS, METRIC_NAMES, SCORES_FORMAT,
                                SUMMARY_FORMAT)
from motionrv.dataset import check_same_scans
from motionrv.errors import (DataFormatError, DegenerateSeriesError,
                             ShapeError)
from motionrv.logger import get_logger
from motionrv.signals import RvSeries
from motionrv.tracer import TraceOptions, trace

logger = get_logger(__name__)

_STD_FLOOR = 1e-12


def _evaluated_pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    """Arrays to compare, dropping frames the prediction extrapolated."""
    keep = None
    if isinstance(pred, RvSeries):
        keep = ~pred.extrapolated
        pred = pred.values
    if isinstance(truth, RvSeries):
        truth = truth.values
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction has {pred.size} frames, ground truth "
                         f"{truth.size}")
    if keep is not None:
        pred, truth = pred[keep], truth[keep]
    if pred.size == 0:
        raise ShapeError("no frames left to evaluate")
    return pred, truth


def mae(pred, truth) -> float:
    p, t = _evaluated_pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


def mse(pred, truth) -> float:
    p, t = _evaluated_pair(pred, truth)
    return float(np.mean((p - t)**2))


def pearson(pred, truth) -> float:
    r"""Product-moment correlation.

    Raises:
        DegenerateSeriesError: Either series has std <= 1e-12.
    """
    p, t = _evaluated_pair(pred, truth)
    dp, dt = p - p.mean(), t - t.mean()
    sp, st = np.sqrt(np.mean(dp * dp)), np.sqrt(np.mean(dt * dt))
    if sp <= _STD_FLOOR or st <= _STD_FLOOR:
        raise DegenerateSeriesError("correlation undefined for a constant "
                                    "series")
    r = np.mean(dp * dt) / (sp * st)
    return float(np.clip(r, -1.0, 1.0))


@nb.njit(cache=False, nogil=True)
def _dtw_cost(x: np.ndarray, y: np.ndarray) -> float:
    n, m = x.shape[0], y.shape[0]
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = abs(x[i - 1] - y[j - 1]) + best
    return acc[n, m]


def dtw(pred, truth) -> float:
    r"""Unnormalized dynamic-time-warping cost.

    Local cost ``|x_i - y_j|``, steps (1,0), (0,1), (1,1), no window; each
    cell on the path is counted once. Plain arrays may differ in length;
    two series drop extrapolated frames first, like the other metrics.
    """
    if isinstance(pred, RvSeries):
        x, y = _evaluated_pair(pred, truth)
    else:
        x = np.asarray(pred, dtype=np.float64)
        y = np.asarray(truth.values if isinstance(truth, RvSeries) else truth,
                       dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise ShapeError("dtw needs non-empty sequences")
    return float(_dtw_cost(np.ascontiguousarray(x), np.ascontiguousarray(y)))


@dataclass(frozen=True)
class ScanScore:
    r"""Metrics of one predicted scan. ``pearson_r`` is NaN when the
    correlation is undefined for that scan."""
    scan_id: str
    mae: float
    mse: float
    pearson_r: float
    dtw: float


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    n: int


def score_scan(pred: RvSeries, truth: RvSeries,
               scan_id: str = "scan") -> ScanScore:
    try:
        r = pearson(pred, truth)
    except DegenerateSeriesError as e:
        logger.warning(f"scan {scan_id}: {e}; excluded from correlation")
        r = float("nan")
    return ScanScore(scan_id=scan_id,
                     mae=mae(pred, truth),
                     mse=mse(pred, truth),
                     pearson_r=r,
                     dtw=dtw(pred, truth))


def aggregate(scores: Sequence[ScanScore]) -> dict[str, MetricSummary]:
    r"""Mean and population std per metric; NaN entries are skipped."""
    if not scores:
        raise ValueError("no scores to aggregate")
    # Sorting fixes the summation order
    ordered = sorted(scores, key=lambda s: s.scan_id)
    summary = {}
    for metric in METRIC_NAMES:
        values = np.array([getattr(s, metric) for s in ordered])
        values = values[np.isfinite(values)]
        if values.size == 0:
            summary[metric] = MetricSummary(float("nan"), float("nan"), 0)
        else:
            summary[metric] = MetricSummary(float(values.mean()),
                                            float(values.std()), values.size)
    return summary


def _paired_differences(scores_a: Sequence[ScanScore],
                        scores_b: Sequence[ScanScore],
                        metric: str) -> np.ndarray:
    if metric not in METRIC_NAMES:
        raise ValueError(f"unknown metric {metric!r}")
    by_a = {s.scan_id: s for s in scores_a}
    by_b = {s.scan_id: s for s in scores_b}
    check_same_scans(by_a, by_b)
    ids = sorted(by_a)
    diffs = np.array([
        getattr(by_a[i], metric) - getattr(by_b[i], metric) for i in ids
    ])
    return diffs[np.isfinite(diffs)]


def _tie_tolerance(observed: float) -> float:
    return 1e-12 * max(observed, 1e-300)


@trace(TraceOptions(trace_params=["metric", "n_perm", "seed"],
                    trace_return_value=True))
def paired_permutation_test(scores_a: Sequence[ScanScore],
                            scores_b: Sequence[ScanScore],
                            metric: str = "mae",
                            n_perm: int = 10000,
                            seed: int = 0) -> float:
    r"""Two-sided sign-flip permutation p-value of the mean paired
    difference.

    The observed labelling counts as one permutation, so
    ``p >= 1 / (n_perm + 1)``.
    """
    if n_perm < 1000:
        raise ValueError(f"n_perm must be >= 1000, got {n_perm}")
    diffs = _paired_differences(scores_a, scores_b, metric)
    if diffs.size == 0:
        return 1.0
    observed = abs(diffs.mean())
    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(n_perm, diffs.size))
    stats = np.abs(signs @ diffs) / diffs.size
    hits = int(np.count_nonzero(stats >= observed - _tie_tolerance(observed)))
    return (hits + 1) / (n_perm + 1)


def exact_sign_flip_p_value(diffs: Iterable[float]) -> float:
    r"""Two-sided p-value over all ``2**n`` sign patterns."""
    diffs = np.asarray(list(diffs), dtype=np.float64)
    if diffs.size == 0:
        return 1.0
    if diffs.size > 20:
        raise ValueError("exact enumeration is limited to 20 pairs")
    observed = abs(diffs.mean())
    patterns = np.array(list(itertools.product((-1.0, 1.0),
                                               repeat=diffs.size)))
    stats = np.abs(patterns @ diffs) / diffs.size
    hits = np.count_nonzero(stats >= observed - _tie_tolerance(observed))
    return hits / patterns.shape[0]


def relative_improvement(baseline_mean: float, new_mean: float,
                         metric: str) -> float:
    r"""Percent improvement of ``new_mean`` over ``baseline_mean``.

    Lower is better for mae, mse and dtw; higher is better for pearson_r.
    """
    if baseline_mean == 0:
        raise ValueError("relative improvement undefined for a zero "
                         "baseline")
    if metric in ERROR_METRICS:
        return 100.0 * (baseline_mean - new_mean) / baseline_mean
    if metric == "pearson_r":
        return 100.0 * (new_mean - baseline_mean) / abs(baseline_mean)
    raise ValueError(f"unknown metric {metric!r}")


# Reports


def write_scores(path: str | Path, scores: Sequence[ScanScore]) -> Path:
    r"""Per-scan table with columns scan_id, mae, mse, pearson_r, dtw."""
    path = Path(path)
    frame = pd.DataFrame([asdict(s) for s in sorted(scores,
                                                    key=lambda s: s.scan_id)],
                         columns=["scan_id", *METRIC_NAMES])
    with open(path, "w") as handle:
        handle.write(f"# format: {SCORES_FORMAT}\n")
        frame.to_csv(handle, index=False, float_format="%.17g")
    return path


def read_scores(path: str | Path) -> list[ScanScore]:
    path = Path(path)
    try:
        frame = pd.read_csv(path,
                            comment="#",
                            dtype={"scan_id": str},
                            float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataFormatError(f"unreadable score table: {e}", str(path))
    missing = [c for c in ("scan_id", *METRIC_NAMES)
               if c not in frame.columns]
    if missing:
        raise DataFormatError(f"score table lacks columns {missing}",
                              str(path))
    return [
        ScanScore(scan_id=str(row.scan_id),
                  mae=float(row.mae),
                  mse=float(row.mse),
                  pearson_r=float(row.pearson_r),
                  dtw=float(row.dtw)) for row in frame.itertuples()
    ]


def write_summary(path: str | Path,
                  summary: dict[str, MetricSummary]) -> Path:
    path = Path(path)
    frame = pd.DataFrame([{
        "metric": metric,
        **asdict(value)
    } for metric, value in summary.items()],
                         columns=["metric", "mean", "std", "n"])
    with open(path, "w") as handle:
        handle.write(f"# format: {SUMMARY_FORMAT}\n")
        frame.to_csv(handle, index=False, float_format="%.17g")
    return path
