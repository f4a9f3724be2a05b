import unittest

import pytest

from motionrv.config import MotionRvConfig
from motionrv.dataset import WindowSpec
from motionrv.filters import BandKind, BandSpec


class TestMotionRvConfig(unittest.TestCase):

    def test_defaults(self):
        config = MotionRvConfig()
        self.assertEqual(config.tr_s, 0.72)
        self.assertEqual(config.window_len, 65)
        self.assertEqual(str(config.band_spec()), "bandpass:0.2:0.5/order4")
        self.assertEqual(config.window_spec(), WindowSpec(65, 1))
        self.assertEqual(config.train_config().epochs, 100)
        self.assertEqual(config.n_perm, 10000)

    def test_sources_merge_in_order(self):
        config = MotionRvConfig.from_sources({
            "seed": 1,
            "epochs": 5
        }, None, {
            "seed": 2,
            "epochs": None
        })
        self.assertEqual(config.seed, 2)
        self.assertEqual(config.epochs, 5)

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config key 'colour'"):
            MotionRvConfig.from_sources({"colour": "blue"})

    def test_validation(self):
        for bad in ({
                "tr_s": 0
        }, {
                "train_fraction": 1.0
        }, {
                "rv_ddof": 2
        }, {
                "band_kind": "lowpass"
        }, {
                "physio_column": -1
        }, {
                "jobs": 0
        }):
            with pytest.raises(ValueError):
                MotionRvConfig(**bad)

    def test_log_level_normalized(self):
        self.assertEqual(MotionRvConfig(log_level="debug").log_level, "DEBUG")

    def test_derived_specs(self):
        config = MotionRvConfig(band_low_hz=0.1,
                                band_high_hz=0.3,
                                band_order=2,
                                band_kind="notch",
                                stride=4,
                                lr=0.01,
                                seed=7)
        self.assertEqual(config.band_spec(),
                         BandSpec(0.1, 0.3, 2, BandKind.NOTCH))
        self.assertEqual(config.window_spec().stride, 4)
        train = config.train_config()
        self.assertEqual((train.lr, train.seed), (0.01, 7))

    def test_to_dict_round_trip(self):
        config = MotionRvConfig(seed=3, jobs=2)
        self.assertEqual(MotionRvConfig.from_sources(config.to_dict()),
                         config)
