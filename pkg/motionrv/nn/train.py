"""Deterministic training loop and series-level prediction."""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from motionrv.dataset import (ChannelScaler, ExperimentArm, WindowSample,
                              WindowSpec, assemble_channels, split_by_scan)
from motionrv.errors import ShapeError, TrainingDivergedError
from motionrv.logger import get_logger
from motionrv.nn.model import Architecture, CnnModel, mse_loss
from motionrv.nn.optim import AdamState, adam_step
from motionrv.signals import MotionSeries, RoiSeries, RvSeries
from motionrv.tracer import TraceOptions, trace

logger = get_logger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    r"""Training hyperparameters"""
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    lr: float = 1e-3
    patience: int = 10
    validation_fraction: float = 0.2
    architecture: Architecture = Architecture()

    def __post_init__(self):
        for name in ("epochs", "batch_size", "lr", "patience"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_mae: float


@dataclass
class TrainResult:
    model: CnnModel
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    train_scans: list[str] = field(default_factory=list)
    val_scans: list[str] = field(default_factory=list)


def stack_samples(
        samples: Sequence[WindowSample]) -> tuple[np.ndarray, np.ndarray]:
    """Inputs ``(N, C, W)`` and targets ``(N, 3)`` in the given order."""
    inputs = np.stack([s.inputs for s in samples])
    targets = np.stack([s.targets for s in samples])
    return inputs, targets


def predict_batches(model: CnnModel,
                    inputs: np.ndarray,
                    batch_size: int = 256) -> np.ndarray:
    outputs = [
        model.forward(inputs[i:i + batch_size])
        for i in range(0, inputs.shape[0], batch_size)
    ]
    return np.concatenate(outputs, axis=0)


def _evaluate(model: CnnModel, inputs: np.ndarray,
              targets: np.ndarray) -> tuple[float, float]:
    prediction = predict_batches(model, inputs)
    diff = prediction - targets
    return float(np.mean(diff * diff)), float(np.mean(np.abs(diff)))


@trace(TraceOptions(trace_params=["arm"]))
def train(samples: Sequence[WindowSample], arm: ExperimentArm,
          config: TrainConfig = TrainConfig()) -> TrainResult:
    r"""Train a regressor on windows from several scans.

    Scans are split into training and validation sides by
    ``config.validation_fraction``. Training stops after ``config.epochs``
    or when validation MAE has not improved for ``config.patience``
    epochs; the best-validation parameters are returned. Runs are
    bit-reproducible for a given seed.

    Raises:
        ValueError: No samples.
        TrainingDivergedError: The loss of a batch is non-finite.
    """
    if not samples:
        raise ValueError("no training samples")
    if len({s.scan_id for s in samples}) < 2:
        logger.warning("single training scan; validating on the training "
                       "windows")
        train_samples, val_samples = list(samples), list(samples)
    else:
        train_samples, val_samples = split_by_scan(
            samples, 1.0 - config.validation_fraction, config.seed)
    train_scans = sorted({s.scan_id for s in train_samples})
    val_scans = sorted({s.scan_id for s in val_samples})
    x_train, y_train = stack_samples(train_samples)
    x_val, y_val = stack_samples(val_samples)
    n_channels, window_len = x_train.shape[1], x_train.shape[2]
    if arm.n_channels(1) > n_channels:
        raise ShapeError(f"{n_channels} input channels do not fit arm {arm}")

    # Independent children for parameter init and minibatch shuffling
    init_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(2)
    model = CnnModel(n_channels,
                     window_len,
                     config.architecture,
                     seed=int(init_seq.generate_state(1)[0]))
    shuffle_rng = np.random.default_rng(shuffle_seq)
    state = AdamState(lr=config.lr)
    params = model.named_parameters()

    logger.info(f"training arm {arm}: {len(train_scans)} train scans "
                f"({x_train.shape[0]} windows), {len(val_scans)} validation "
                f"scans ({x_val.shape[0]} windows), {n_channels} channels")

    result = TrainResult(model=model, train_scans=train_scans,
                         val_scans=val_scans)
    best_mae = np.inf
    best_params = model.copy_parameters()
    stale = 0
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(x_train.shape[0])
        batch_losses = []
        for batch_index, start in enumerate(
                range(0, order.size, config.batch_size), start=1):
            idx = order[start:start + config.batch_size]
            model.zero_grad()
            prediction = model.forward(x_train[idx])
            loss, grad = mse_loss(prediction, y_train[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, batch_index, loss)
            model.backward(grad)
            adam_step(params, model.named_gradients(), state)
            batch_losses.append(loss * idx.size)
        train_loss = float(np.sum(batch_losses) / x_train.shape[0])
        val_loss, val_mae = _evaluate(model, x_val, y_val)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(epoch, 0, val_loss)
        result.history.append(
            EpochRecord(epoch=epoch,
                        train_loss=train_loss,
                        val_loss=val_loss,
                        val_mae=val_mae))
        logger.info(f"epoch {epoch}: train_loss={train_loss:.6g} "
                    f"val_loss={val_loss:.6g} val_mae={val_mae:.6g}")

        if val_mae < best_mae:
            best_mae = val_mae
            best_params = model.copy_parameters()
            result.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                logger.info(f"early stop at epoch {epoch}; best epoch "
                            f"{result.best_epoch} (val_mae={best_mae:.6g})")
                break

    model.load_parameters(best_params)
    return result


@trace(TraceOptions(trace_params=["arm"]))
def predict_series(model: CnnModel,
                   roi: RoiSeries,
                   motion: MotionSeries | None,
                   arm: ExperimentArm,
                   spec: WindowSpec = WindowSpec(),
                   scaler: ChannelScaler | None = None) -> RvSeries:
    r"""Reconstruct a full RV series for one scan.

    Each window contributes estimates at its three target offsets; a
    frame's value is the mean of all estimates landing on it. Frames with
    no estimate copy the nearest supported frame and have ``support == 0``.
    Negative network outputs are clipped to zero since RV is a standard
    deviation.

    Args:
        scaler: Normalization statistics for this scan; fitted on the scan
            itself when omitted.
    """
    if spec.window_len != model.window_len:
        raise ShapeError(f"window spec has {spec.window_len} frames, model "
                         f"expects {model.window_len}")
    clock = roi.clock
    if clock.n_frames < spec.window_len:
        raise ShapeError(f"scan has {clock.n_frames} frames, shorter than "
                         f"one window")
    block = assemble_channels(roi, motion, arm)
    if block.shape[0] != model.in_channels:
        raise ShapeError(f"arm {arm} yields {block.shape[0]} channels, model "
                         f"expects {model.in_channels}")
    scaler = scaler or ChannelScaler.fit(block)
    block = scaler.apply(block)

    starts = spec.starts(clock.n_frames)
    inputs = np.stack(
        [block[:, s:s + spec.window_len] for s in starts])
    outputs = predict_batches(model, inputs)

    sums = np.zeros(clock.n_frames)
    counts = np.zeros(clock.n_frames, dtype=np.int64)
    for j, offset in enumerate(spec.target_offsets):
        np.add.at(sums, starts + offset, outputs[:, j])
        np.add.at(counts, starts + offset, 1)

    supported = np.flatnonzero(counts)
    values = np.zeros(clock.n_frames)
    values[supported] = sums[supported] / counts[supported]
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        # Nearest supported frame; ties resolve to the earlier frame
        pos = np.searchsorted(supported, missing)
        left = supported[np.clip(pos - 1, 0, supported.size - 1)]
        right = supported[np.clip(pos, 0, supported.size - 1)]
        nearest = np.where(missing - left <= right - missing, left, right)
        values[missing] = values[nearest]
        logger.debug(f"{missing.size} frames without estimates filled "
                     f"from neighbours")
    return RvSeries(values=np.maximum(values, 0.0),
                    clock=clock,
                    support=counts)
