import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pytest

from motionrv.dataset import ExperimentArm, WindowSpec, build_windows
from motionrv.errors import DataFormatError, TrainingDivergedError
from motionrv.nn import (AdamState, Architecture, CnnModel, TrainConfig,
                         adam_step, load_checkpoint, predict_series,
                         save_checkpoint, train)
from motionrv.signals import FrameClock, MotionSeries, RoiSeries, RvSeries

TINY = Architecture(conv_channels=(3, 4), kernels=(3, 3), hidden=5)
SPEC = WindowSpec(window_len=9)


def _scan(seed, n_frames=40, n_roi=2):
    rng = np.random.default_rng(seed)
    clock = FrameClock(n_frames=n_frames)
    rv = RvSeries(1.0 + 0.5 * np.sin(clock.times / 3.0 + seed), clock)
    roi = RoiSeries(-rv.values[:, None] +
                    0.1 * rng.standard_normal((n_frames, n_roi)), clock)
    motion = MotionSeries(0.01 * rng.standard_normal((n_frames, 6)), clock)
    return roi, motion, rv


def _samples(n_scans=4):
    samples = []
    for i in range(n_scans):
        roi, motion, rv = _scan(i)
        samples += build_windows(roi, motion, rv, ExperimentArm.bold_only(),
                                 SPEC, scan_id=f"s{i}")
    return samples


class TestAdam(unittest.TestCase):

    def test_first_step_moves_by_lr(self):
        params = {"w": np.array([1.0, -1.0, 0.5])}
        grads = {"w": np.array([0.3, -2.0, 0.0])}
        state = AdamState(lr=0.1)
        adam_step(params, grads, state)
        np.testing.assert_allclose(params["w"], [0.9, -0.9, 0.5], atol=1e-7)
        self.assertEqual(state.step, 1)

    def test_zero_gradient_leaves_params(self):
        params = {"w": np.array([0.25, -4.0])}
        state = AdamState()
        adam_step(params, {"w": np.zeros(2)}, state)
        np.testing.assert_array_equal(params["w"], [0.25, -4.0])
        self.assertEqual(state.step, 1)
        self.assertFalse(state.m["w"].any())
        self.assertFalse(state.v["w"].any())

    def test_first_step_default_lr(self):
        start = np.array([1.0, -1.0, 0.5, 2.0])
        grads = {"w": np.array([0.3, -2.0, 1e-3, -50.0])}
        params = {"w": start.copy()}
        adam_step(params, grads, AdamState())
        np.testing.assert_allclose(params["w"] - start,
                                   -1e-3 * np.sign(grads["w"]), atol=1e-10)

    def test_in_place(self):
        w = np.zeros(2)
        params = {"w": w}
        adam_step(params, {"w": np.ones(2)}, AdamState(lr=0.01))
        self.assertIs(params["w"], w)
        self.assertTrue(np.all(w < 0))


class TestTrain(unittest.TestCase):

    def test_deterministic(self):
        samples = _samples()
        config = TrainConfig(epochs=3, batch_size=16, seed=5,
                             architecture=TINY)
        a = train(samples, ExperimentArm.bold_only(), config)
        b = train(samples, ExperimentArm.bold_only(), config)
        for name, value in a.model.named_parameters().items():
            np.testing.assert_array_equal(value,
                                          b.model.named_parameters()[name])
        self.assertEqual([r.val_mae for r in a.history],
                         [r.val_mae for r in b.history])

    def test_history_and_split(self):
        result = train(_samples(5), ExperimentArm.bold_only(),
                       TrainConfig(epochs=4, batch_size=8,
                                   architecture=TINY))
        self.assertEqual([r.epoch for r in result.history], [1, 2, 3, 4])
        self.assertEqual(len(result.train_scans) + len(result.val_scans), 5)
        self.assertFalse(set(result.train_scans) & set(result.val_scans))
        best = min(result.history, key=lambda r: r.val_mae)
        self.assertEqual(result.best_epoch, best.epoch)

    def test_early_stopping(self):
        result = train(_samples(), ExperimentArm.bold_only(),
                       TrainConfig(epochs=200, batch_size=64, lr=1.0,
                                   patience=2, architecture=TINY))
        self.assertLess(len(result.history), 200)

    def test_training_reduces_loss(self):
        result = train(_samples(), ExperimentArm.bold_only(),
                       TrainConfig(epochs=30, batch_size=16, lr=1e-2,
                                   patience=30, architecture=TINY))
        self.assertLess(result.history[-1].train_loss,
                        result.history[0].train_loss)

    def test_single_scan_validates_on_itself(self):
        roi, motion, rv = _scan(0)
        samples = build_windows(roi, motion, rv, ExperimentArm.bold_only(),
                                SPEC, scan_id="only")
        result = train(samples, ExperimentArm.bold_only(),
                       TrainConfig(epochs=1, architecture=TINY))
        self.assertEqual(result.train_scans, ["only"])
        self.assertEqual(result.val_scans, ["only"])

    def test_divergence(self):
        samples = _samples()
        poisoned = samples[0]
        poisoned.targets[0] = np.inf
        with pytest.raises(TrainingDivergedError):
            train(samples, ExperimentArm.bold_only(),
                  TrainConfig(epochs=1, batch_size=1000, architecture=TINY))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(validation_fraction=1.0)


class TestPredictSeries(unittest.TestCase):

    def test_support_and_fill(self):
        roi, motion, _ = _scan(0, n_frames=20)
        model = CnnModel(2, 9, TINY, seed=0, zero_head=True)
        model.head.params["bias"][:] = [1.0, 2.0, 3.0]
        rv = predict_series(model, roi, motion, ExperimentArm.bold_only(),
                            WindowSpec(window_len=9, stride=4))
        # starts 0, 4, 8 with targets at offsets 0, 4, 8
        self.assertEqual(rv.support[8], 3)
        self.assertEqual(rv.support[0], 1)
        self.assertEqual(rv.support[1], 0)
        self.assertAlmostEqual(rv.values[8], 2.0)
        self.assertEqual(rv.values[0], 1.0)
        self.assertEqual(rv.values[16], 3.0)
        # frame 2 is equidistant from frames 0 and 4 and takes the earlier
        self.assertEqual(rv.values[2], rv.values[0])
        self.assertEqual(rv.values[3], rv.values[4])
        self.assertTrue(rv.extrapolated[19])

    def test_clips_negative(self):
        roi, motion, _ = _scan(0, n_frames=20)
        model = CnnModel(2, 9, TINY, seed=0, zero_head=True)
        model.head.params["bias"][:] = -1.0
        rv = predict_series(model, roi, motion, ExperimentArm.bold_only(),
                            WindowSpec(window_len=9))
        np.testing.assert_array_equal(rv.values, np.zeros(20))
        self.assertFalse(rv.extrapolated.any())

    def test_default_window_support(self):
        model = CnnModel(2, 65, TINY, seed=0, zero_head=True)
        roi, motion, _ = _scan(0, n_frames=65)
        rv = predict_series(model, roi, motion, ExperimentArm.bold_only())
        self.assertEqual(np.flatnonzero(rv.support).tolist(), [0, 32, 64])

        roi, motion, _ = _scan(0, n_frames=200)
        rv = predict_series(model, roi, motion, ExperimentArm.bold_only())
        self.assertEqual(set(rv.support[64:136].tolist()), {3})
        self.assertEqual(rv.support[0], 1)
        self.assertEqual(rv.support[199], 1)


class TestCheckpoint(unittest.TestCase):

    def test_save_load(self):
        model = CnnModel(3, 11, TINY, seed=4)
        with TemporaryDirectory() as tmp:
            path = save_checkpoint(model, Path(tmp) / "m.ckpt")
            loaded = load_checkpoint(path)
        self.assertEqual(loaded.spec_string(), model.spec_string())
        self.assertEqual(loaded.window_len, 11)
        for name, value in model.named_parameters().items():
            np.testing.assert_array_equal(loaded.named_parameters()[name],
                                          value)

    def test_bad_header(self):
        with TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.ckpt"
            path.write_text("not-a-checkpoint 1\n")
            with pytest.raises(DataFormatError):
                load_checkpoint(path)
