"""Command-line entry point: ``motionrv <command> [options]``.

Exit codes: 0 on success, 1 for data or validation errors, 2 for usage
errors. Flags override the config file, which overrides built-in defaults.
"""

import argparse
import json
import sys
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence, TypeVar

import numpy as np
import pandas as pd

from motionrv import __version__, tracer
from motionrv.config import MotionRvConfig
from motionrv.constants import (CHECKPOINT_VERSION, EXIT_DATA_ERROR, EXIT_OK,
                                EXIT_USAGE_ERROR, MANIFEST_FORMAT,
                                METRIC_NAMES, MOTION_CHANNEL_NAMES,
                                PLOTDATA_FORMAT, RV_FORMAT, RV_SUFFIX,
                                SCAN_FORMAT, SCENARIO_FORMAT, SCORES_FORMAT,
                                SUMMARY_FORMAT)
from motionrv.dataset import (ExperimentArm, ScanBundle, assemble_channels,
                              build_windows, bundle_paths, check_same_scans,
                              discover_scans, read_motion_par, read_physio,
                              read_rv, read_scan_bundle, split_scan_ids,
                              write_motion_par, write_rv, write_scan_bundle)
from motionrv.errors import MotionRvError
from motionrv.filters import filter_motion, parse_band
from motionrv.logger import get_logger
from motionrv.metrics import (aggregate, exact_sign_flip_p_value,
                              paired_permutation_test, read_scores,
                              relative_improvement, score_scan,
                              write_scores, write_summary)
from motionrv.nn import (TrainResult, load_checkpoint, predict_series,
                         save_checkpoint, train)
from motionrv.signals import (FrameClock, compute_rv,
                              framewise_displacement)
from motionrv.synth import ScenarioConfig, gen_scan, read_scenario
from motionrv.tracer import TraceOptions, trace
from motionrv.utils.config import find_motionrv_config
from motionrv.utils.io import ensure_dir, sha256_file

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# Scans at or below this count also get the exact sign-flip p-value
EXACT_P_MAX_SCANS = 12


class UsageError(Exception):
    """Bad command-line usage detected after argument parsing."""


@dataclass
class RunManifest:
    r"""Record of one command run; written as ``manifest.json``.

    Holds no timestamps, so identical runs produce identical manifests.
    """
    command: str
    config: dict[str, Any]
    seed: int
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    summary: dict[str, Any] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)
    format: str = MANIFEST_FORMAT
    version: str = __version__
    formats: dict[str, Any] = field(default_factory=lambda: {
        "rv": RV_FORMAT,
        "scan": SCAN_FORMAT,
        "scores": SCORES_FORMAT,
        "summary": SUMMARY_FORMAT,
        "plotdata": PLOTDATA_FORMAT,
        "scenario": SCENARIO_FORMAT,
        "checkpoint": CHECKPOINT_VERSION,
    })

    def add_input(self, path: Path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, name: str, path: Path) -> None:
        self.outputs[name] = str(path)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        path.write_text(
            json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def parallel_map(fn: Callable[[T], R], items: Iterable[T],
                 jobs: int) -> list[R]:
    """``map`` over a thread pool of ``jobs`` workers, preserving order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# Config


def _band_overrides(band: str | None) -> dict[str, float]:
    if band is None:
        return {}
    spec = parse_band(band)
    return {"band_low_hz": spec.low_hz, "band_high_hz": spec.high_hz}


_FLAG_KEYS = ("tr_s", "physio_rate_hz", "physio_column", "rv_window_s",
              "rv_ddof", "window_len", "stride", "band_order", "band_kind",
              "train_fraction", "validation_fraction", "epochs",
              "batch_size", "lr", "patience", "seed", "n_perm", "jobs",
              "log_level")


def resolve_config(args: argparse.Namespace) -> MotionRvConfig:
    r"""Defaults < config file < flags."""
    file_values = find_motionrv_config(args.config) or {}
    flags = {key: getattr(args, key, None) for key in _FLAG_KEYS}
    flags.update(_band_overrides(getattr(args, "band", None)))
    if args.verbose:
        flags["logger_verbose"] = True
        flags["tracer_verbose"] = True
    if args.trace_console:
        flags["enable_span_console_export"] = True
    return MotionRvConfig.from_sources(file_values, flags)


def _arm(args: argparse.Namespace,
         config: MotionRvConfig) -> ExperimentArm:
    return ExperimentArm.from_name(args.arm, config.band_spec())


def _load_bundles(data_dir: Path, scan_ids: Sequence[str],
                  config: MotionRvConfig,
                  manifest: RunManifest) -> dict[str, ScanBundle]:
    bundles = parallel_map(lambda i: read_scan_bundle(data_dir, i), scan_ids,
                           config.jobs)
    for scan_id in scan_ids:
        for path in bundle_paths(data_dir, scan_id).values():
            manifest.add_input(path)
    return dict(zip(scan_ids, bundles))


def _scan_ids(data_dir: Path, requested: Sequence[str] | None) -> list[str]:
    available = discover_scans(data_dir)
    if not requested:
        return available
    missing = sorted(set(requested) - set(available))
    if missing:
        raise MotionRvError(f"scans not found in {data_dir}: {missing}")
    return sorted(set(requested))


def _train_on(bundles: dict[str, ScanBundle], scan_ids: Sequence[str],
              arm: ExperimentArm, config: MotionRvConfig) -> TrainResult:
    spec = config.window_spec()
    per_scan = parallel_map(
        lambda i: build_windows(bundles[i].roi, bundles[i].motion,
                                bundles[i].rv, arm, spec, scan_id=i),
        scan_ids, config.jobs)
    samples = [s for windows in per_scan for s in windows]
    # Training itself stays single-threaded so results do not depend on jobs
    return train(samples, arm, config.train_config())


def _write_history(path: Path, result: TrainResult) -> Path:
    frame = pd.DataFrame([asdict(r) for r in result.history],
                         columns=["epoch", "train_loss", "val_loss",
                                  "val_mae"])
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


# Commands


@trace(TraceOptions(span_name="motionrv.cmd.synth"))
def cmd_synth(args: argparse.Namespace, config: MotionRvConfig) -> int:
    scenario = (read_scenario(args.scenario)
                if args.scenario else ScenarioConfig())
    # --seed, then a config-file seed, then the scenario's own
    seed = args.seed
    if seed is None and "seed" in (find_motionrv_config(args.config) or {}):
        seed = config.seed
    if seed is not None:
        scenario = replace(scenario, seed=seed)
    if args.n_scans < 1:
        raise UsageError("--n-scans must be at least 1")
    out_dir = ensure_dir(args.out)
    manifest = RunManifest(command="synth", config=config.to_dict(),
                           seed=scenario.seed)
    if args.scenario:
        manifest.add_input(Path(args.scenario))
    manifest.extra["scenario"] = asdict(scenario)

    def _one(index: int) -> dict[str, Path]:
        bundle = gen_scan(scenario, index)
        return write_scan_bundle(out_dir, bundle)

    written = parallel_map(_one, range(args.n_scans), config.jobs)
    for paths in written:
        for path in paths.values():
            manifest.outputs[path.name] = sha256_file(path)
    manifest.write(out_dir)
    logger.info(f"wrote {args.n_scans} synthetic scans to {out_dir}")
    return EXIT_OK


@trace(TraceOptions(span_name="motionrv.cmd.rv"))
def cmd_rv(args: argparse.Namespace, config: MotionRvConfig) -> int:
    resp = read_physio(args.physio,
                       column_index=config.physio_column,
                       sample_rate_hz=config.physio_rate_hz,
                       start_time_s=args.physio_start)
    clock = FrameClock(n_frames=args.frames, tr_s=config.tr_s,
                       start_time_s=args.start)
    rv = compute_rv(resp, clock, config.rv_window_s, ddof=config.rv_ddof)
    write_rv(args.out, rv)
    logger.info(f"wrote RV for {clock.n_frames} frames to {args.out}")
    return EXIT_OK


@trace(TraceOptions(span_name="motionrv.cmd.filter"))
def cmd_filter(args: argparse.Namespace, config: MotionRvConfig) -> int:
    motion = read_motion_par(args.motion, tr_s=config.tr_s)
    band = config.band_spec()
    filtered = filter_motion(motion, band)
    write_motion_par(args.out, filtered)
    fd_before = framewise_displacement(motion)
    fd_after = framewise_displacement(filtered)
    print(f"band {band}: mean FD {fd_before.mean():.4g} mm -> "
          f"{fd_after.mean():.4g} mm")
    return EXIT_OK


@trace(TraceOptions(span_name="motionrv.cmd.windows"))
def cmd_windows(args: argparse.Namespace, config: MotionRvConfig) -> int:
    data_dir = Path(args.data_dir)
    bundle = read_scan_bundle(data_dir, args.scan)
    arm = _arm(args, config)
    samples = build_windows(bundle.roi, bundle.motion, bundle.rv, arm,
                            config.window_spec(), scan_id=args.scan)
    frame = pd.DataFrame({
        "scan_id": [s.scan_id for s in samples],
        "start_frame": [s.start_frame for s in samples],
        "target_first": [s.targets[0] for s in samples],
        "target_middle": [s.targets[1] for s in samples],
        "target_last": [s.targets[2] for s in samples],
        "n_channels": [s.inputs.shape[0] for s in samples],
        "input_abs_mean": [float(np.abs(s.inputs).mean()) for s in samples],
    })
    frame.to_csv(args.out, index=False, float_format="%.17g")
    n_channels = assemble_channels(bundle.roi, bundle.motion, arm).shape[0]
    print(f"{len(samples)} windows x {n_channels} channels for arm {arm}")
    return EXIT_OK


@trace(TraceOptions(span_name="motionrv.cmd.train"))
def cmd_train(args: argparse.Namespace, config: MotionRvConfig) -> int:
    data_dir = Path(args.data_dir)
    out_dir = ensure_dir(args.out)
    arm = _arm(args, config)
    scan_ids = _scan_ids(data_dir, args.scans)
    manifest = RunManifest(command="train", config=config.to_dict(),
                           seed=config.seed, extra={"arm": str(arm)})
    bundles = _load_bundles(data_dir, scan_ids, config, manifest)
    result = _train_on(bundles, scan_ids, arm, config)
    manifest.add_output("checkpoint",
                        save_checkpoint(result.model,
                                        out_dir / "model.ckpt"))
    manifest.add_output("history",
                        _write_history(out_dir / "history.csv", result))
    manifest.extra.update(best_epoch=result.best_epoch,
                          train_scans=result.train_scans,
                          val_scans=result.val_scans)
    manifest.write(out_dir)
    return EXIT_OK


@trace(TraceOptions(span_name="motionrv.cmd.predict"))
def cmd_predict(args: argparse.Namespace, config: MotionRvConfig) -> int:
    data_dir = Path(args.data_dir)
    out_dir = ensure_dir(args.out)
    model = load_checkpoint(args.checkpoint)
    arm = _arm(args, config)
    spec = replace(config.window_spec(), window_len=model.window_len)
    scan_ids = _scan_ids(data_dir, args.scans)
    manifest = RunManifest(command="predict", config=config.to_dict(),
                           seed=config.seed, extra={"arm": str(arm)})
    manifest.add_input(Path(args.checkpoint))
    bundles = _load_bundles(data_dir, scan_ids, config, manifest)

    def _one(scan_id: str) -> Path:
        bundle = bundles[scan_id]
        rv = predict_series(model, bundle.roi, bundle.motion, arm, spec)
        return write_rv(out_dir / f"{scan_id}{RV_SUFFIX}", rv)

    for scan_id, path in zip(scan_ids,
                             parallel_map(_one, scan_ids, config.jobs)):
        manifest.add_output(scan_id, path)
    manifest.write(out_dir)
    return EXIT_OK


@trace(TraceOptions(span_name="motionrv.cmd.evaluate"))
def cmd_evaluate(args: argparse.Namespace, config: MotionRvConfig) -> int:
    pred_dir, data_dir = Path(args.pred_dir), Path(args.data_dir)
    out_dir = ensure_dir(args.out)
    scan_ids = sorted(p.name[:-len(RV_SUFFIX)]
                      for p in pred_dir.glob(f"*{RV_SUFFIX}"))
    if not scan_ids:
        raise MotionRvError(f"no predictions (*{RV_SUFFIX}) in {pred_dir}")
    manifest = RunManifest(command="evaluate", config=config.to_dict(),
                           seed=config.seed)

    def _one(scan_id: str):
        pred_path = pred_dir / f"{scan_id}{RV_SUFFIX}"
        truth_path = bundle_paths(data_dir, scan_id)["rv"]
        return score_scan(read_rv(pred_path), read_rv(truth_path), scan_id)

    scores = parallel_map(_one, scan_ids, config.jobs)
    for scan_id in scan_ids:
        manifest.add_input(pred_dir / f"{scan_id}{RV_SUFFIX}")
        manifest.add_input(bundle_paths(data_dir, scan_id)["rv"])
    summary = aggregate(scores)
    manifest.add_output("scores", write_scores(out_dir / "scores.csv",
                                               scores))
    manifest.add_output("summary", write_summary(out_dir / "summary.csv",
                                                 summary))
    manifest.summary = {k: asdict(v) for k, v in summary.items()}
    manifest.write(out_dir)
    _print_summary(summary)
    return EXIT_OK


@trace(TraceOptions(span_name="motionrv.cmd.experiment"))
def cmd_experiment(args: argparse.Namespace, config: MotionRvConfig) -> int:
    r"""split -> windows -> train -> predict -> score for one arm."""
    data_dir = Path(args.data_dir)
    out_dir = ensure_dir(args.out)
    arm = _arm(args, config)
    scan_ids = discover_scans(data_dir)
    if len(scan_ids) < 2:
        raise MotionRvError(f"experiment needs at least 2 scans, found "
                            f"{len(scan_ids)} in {data_dir}")
    train_ids, test_ids = split_scan_ids(scan_ids, config.train_fraction,
                                         config.seed)
    manifest = RunManifest(command="experiment", config=config.to_dict(),
                           seed=config.seed)
    manifest.extra.update(arm=str(arm),
                          band=str(arm.band) if arm.band else None,
                          train_scans=train_ids,
                          test_scans=test_ids)
    bundles = _load_bundles(data_dir, scan_ids, config, manifest)
    logger.info(f"experiment {arm}: {len(train_ids)} train scans, "
                f"{len(test_ids)} test scans")

    result = _train_on(bundles, train_ids, arm, config)
    manifest.extra["best_epoch"] = result.best_epoch
    spec = config.window_spec()
    pred_dir = ensure_dir(out_dir / "predictions")

    def _one(scan_id: str):
        bundle = bundles[scan_id]
        rv = predict_series(result.model, bundle.roi, bundle.motion, arm,
                            spec)
        write_rv(pred_dir / f"{scan_id}{RV_SUFFIX}", rv)
        return score_scan(rv, bundle.rv, scan_id)

    scores = parallel_map(_one, test_ids, config.jobs)
    summary = aggregate(scores)
    manifest.add_output("checkpoint",
                        save_checkpoint(result.model,
                                        out_dir / "model.ckpt"))
    manifest.add_output("history",
                        _write_history(out_dir / "history.csv", result))
    manifest.add_output("scores", write_scores(out_dir / "scores.csv",
                                               scores))
    manifest.add_output("summary", write_summary(out_dir / "summary.csv",
                                                 summary))
    manifest.add_output("predictions", pred_dir)
    tracer.write_attributes_to_current_span({
        "arm": str(arm),
        "best_epoch": result.best_epoch,
        "n_test_scans": len(test_ids),
        "mean": {k: v.mean for k, v in summary.items()},
    })
    manifest.summary = {k: asdict(v) for k, v in summary.items()}
    manifest.write(out_dir)
    _print_summary(summary)
    return EXIT_OK


def _print_summary(summary) -> None:
    for metric, value in summary.items():
        print(f"{metric:>10} mean={value.mean:.6g} std={value.std:.6g} "
              f"n={value.n}")


@trace(TraceOptions(span_name="motionrv.cmd.compare"))
def cmd_compare(args: argparse.Namespace, config: MotionRvConfig) -> int:
    r"""Compare score tables; ``scores_a`` is the baseline."""
    scores_a = read_scores(args.scores_a)
    scores_b = read_scores(args.scores_b)
    check_same_scans((s.scan_id for s in scores_a),
                     (s.scan_id for s in scores_b))
    summary_a, summary_b = aggregate(scores_a), aggregate(scores_b)
    print(f"{'metric':>10} {'baseline':>14} {'candidate':>14} "
          f"{'improvement':>12}")
    for metric in METRIC_NAMES:
        mean_a, mean_b = summary_a[metric].mean, summary_b[metric].mean
        try:
            pct = relative_improvement(mean_a, mean_b, metric)
            improvement = f"{pct:.1f}%"
        except ValueError:
            improvement = "n/a"
        print(f"{metric:>10} {mean_a:>14.6g} {mean_b:>14.6g} "
              f"{improvement:>12}")

    p = paired_permutation_test(scores_a, scores_b, args.metric,
                                n_perm=config.n_perm, seed=config.seed)
    print(f"paired permutation test on {args.metric} "
          f"(n_perm={config.n_perm}, seed={config.seed}): p = {p:.6g}")
    if len(scores_a) <= EXACT_P_MAX_SCANS:
        by_b = {s.scan_id: s for s in scores_b}
        diffs = [
            getattr(s, args.metric) - getattr(by_b[s.scan_id], args.metric)
            for s in sorted(scores_a, key=lambda s: s.scan_id)
        ]
        diffs = [d for d in diffs if np.isfinite(d)]
        print(f"exact sign-flip p = {exact_sign_flip_p_value(diffs):.6g} "
              f"(n={len(diffs)})")
    return EXIT_OK


@trace(TraceOptions(span_name="motionrv.cmd.plotdata"))
def cmd_plotdata(args: argparse.Namespace, config: MotionRvConfig) -> int:
    r"""Per scan: time, respiration at frame times, raw and filtered motion,
    RV. One ``<scan_id>.plot.csv`` per input scan."""
    if not args.scans:
        raise UsageError("plotdata needs at least one scan id")
    data_dir = Path(args.data_dir)
    out_dir = ensure_dir(args.out)
    band = config.band_spec()
    for scan_id in args.scans:
        bundle = read_scan_bundle(data_dir, scan_id)
        times = bundle.clock.times
        filtered = filter_motion(bundle.motion, band)
        columns: dict[str, np.ndarray] = {
            "time_s": times,
            "resp": bundle.trace.value_at(times),
        }
        for i, name in enumerate(MOTION_CHANNEL_NAMES):
            columns[name] = bundle.motion.params[:, i]
        for i, name in enumerate(MOTION_CHANNEL_NAMES):
            columns[f"{name}_filtered"] = filtered.params[:, i]
        columns["rv"] = bundle.rv.values
        path = out_dir / f"{scan_id}.plot.csv"
        with open(path, "w") as handle:
            handle.write(f"# format: {PLOTDATA_FORMAT}\n")
            handle.write(f"# band: {band}\n")
            pd.DataFrame(columns).to_csv(handle, index=False,
                                         float_format="%.17g")
        logger.info(f"wrote plot data for {scan_id} to {path}")
    return EXIT_OK


# Parser


def _add_band_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--band", help="respiratory band 'lo:hi' in Hz "
                        "(default 0.2:0.5)")
    parser.add_argument("--band-order", dest="band_order", type=int)
    parser.add_argument("--band-kind", dest="band_kind",
                        choices=["bandpass", "notch"])


def _add_arm_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--arm", required=True,
                        choices=["bold", "bold+motion",
                                 "bold+motion-filtered"])
    _add_band_flags(parser)
    parser.add_argument("--window-len", dest="window_len", type=int)
    parser.add_argument("--stride", type=int)


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--validation-fraction", dest="validation_fraction",
                        type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motionrv",
        description="Reconstruct respiratory variation from BOLD ROI "
        "signals and head motion.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="YAML config file (default: "
                        "$MOTIONRV_CONFIG or .motionrv-config.yaml nearby)")
    parser.add_argument("--log-level", dest="log_level",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--verbose", action="store_true",
                        help="print internal logger/tracer diagnostics")
    parser.add_argument("--trace-console", dest="trace_console",
                        action="store_true",
                        help="export spans to stderr")
    parser.add_argument("--jobs", type=int,
                        help="worker threads for per-scan stages")
    parser.add_argument("--seed", type=int)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic scans")
    p.add_argument("--scenario", help="scenario file (key = value)")
    p.add_argument("--n-scans", dest="n_scans", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("rv", help="compute RV from a physio log")
    p.add_argument("physio")
    p.add_argument("--rate", dest="physio_rate_hz", type=float)
    p.add_argument("--column", dest="physio_column", type=int)
    p.add_argument("--tr", dest="tr_s", type=float)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--start", type=float, default=0.0,
                   help="time of frame 0 in seconds")
    p.add_argument("--physio-start", dest="physio_start", type=float,
                   default=0.0, help="time of the first physio sample")
    p.add_argument("--window", dest="rv_window_s", type=float)
    p.add_argument("--ddof", dest="rv_ddof", type=int, choices=[0, 1])
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_rv)

    p = sub.add_parser("filter", help="filter motion in the respiratory "
                       "band")
    p.add_argument("motion")
    p.add_argument("--tr", dest="tr_s", type=float)
    _add_band_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_filter)

    p = sub.add_parser("windows", help="dump the windows of one scan")
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("--scan", required=True)
    _add_arm_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_windows)

    p = sub.add_parser("train", help="train on every scan in a directory")
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("--scans", nargs="*")
    _add_arm_flags(p)
    _add_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("predict", help="predict RV with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("--scans", nargs="*")
    _add_arm_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against truth")
    p.add_argument("--pred-dir", dest="pred_dir", required=True)
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("experiment", help="split, train, predict and score "
                       "one arm")
    p.add_argument("--data-dir", dest="data_dir", required=True)
    _add_arm_flags(p)
    _add_train_flags(p)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("compare", help="paired comparison of two score "
                       "tables")
    p.add_argument("scores_a", help="baseline scores")
    p.add_argument("scores_b", help="candidate scores")
    p.add_argument("--metric", choices=list(METRIC_NAMES), default="mae")
    p.add_argument("--n-perm", dest="n_perm", type=int)
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("plotdata", help="export plot tables")
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("scans", nargs="*")
    _add_band_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_plotdata)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        config = resolve_config(args)
    except (MotionRvError, ValueError) as e:
        print(f"motionrv: error: {e}", file=sys.stderr)
        return EXIT_DATA_ERROR

    tracer.init(config, run_id=uuid.uuid4().hex[:12], command=args.command)
    try:
        return args.handler(args, config)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"motionrv {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE_ERROR
    except (MotionRvError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"motionrv {args.command}: error: {e}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except Exception:
        logger.critical(f"{args.command} crashed", exc_info=True)
        raise
    finally:
        tracer.shutdown()


if __name__ == "__main__":
    sys.exit(main())
