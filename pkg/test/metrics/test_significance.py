import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pytest

from motionrv.errors import DataFormatError, ScanMismatchError
from motionrv.metrics import (ScanScore, aggregate, exact_sign_flip_p_value,
                              paired_permutation_test, read_scores,
                              relative_improvement, write_scores,
                              write_summary)


def _scores(maes, prefix="s"):
    return [
        ScanScore(f"{prefix}{i:02d}", float(v), float(v)**2, 0.5, float(v))
        for i, v in enumerate(maes)
    ]


class TestPermutationTest(unittest.TestCase):

    def test_identical_arms(self):
        scores = _scores([1.0, 2.0, 3.0, 4.0])
        self.assertEqual(paired_permutation_test(scores, scores), 1.0)

    def test_exact_three_pairs(self):
        self.assertEqual(exact_sign_flip_p_value([1.0, 2.0, 3.0]), 0.25)
        self.assertEqual(exact_sign_flip_p_value([]), 1.0)
        with pytest.raises(ValueError):
            exact_sign_flip_p_value(np.ones(21))

    def test_sampled_close_to_exact(self):
        a = _scores([1.0, 1.2, 0.9, 1.4, 1.1, 1.3, 1.0, 0.8])
        b = _scores([0.9, 1.0, 0.95, 1.1, 1.0, 1.0, 1.05, 0.7])
        diffs = [x.mae - y.mae for x, y in zip(a, b)]
        exact = exact_sign_flip_p_value(diffs)
        sampled = paired_permutation_test(a, b, n_perm=20000, seed=1)
        self.assertLess(abs(sampled - exact), 0.02)

    def test_reproducible_and_symmetric(self):
        rng = np.random.default_rng(0)
        a = _scores(rng.random(10))
        b = _scores(rng.random(10))
        p1 = paired_permutation_test(a, b, seed=4)
        self.assertEqual(p1, paired_permutation_test(a, b, seed=4))
        self.assertEqual(p1, paired_permutation_test(b, a, seed=4))
        self.assertGreater(p1, 0.0)
        self.assertLessEqual(p1, 1.0)

    def test_order_of_scans_does_not_matter(self):
        rng = np.random.default_rng(1)
        a = _scores(rng.random(8))
        b = _scores(rng.random(8))
        self.assertEqual(
            paired_permutation_test(a, b, seed=2),
            paired_permutation_test(list(reversed(a)), b, seed=2))

    def test_rescaling_both_arms_keeps_p(self):
        rng = np.random.default_rng(6)
        a_values, b_values = rng.random(10), rng.random(10)
        p = paired_permutation_test(_scores(a_values), _scores(b_values),
                                    seed=3)
        for scale in (2.5, 1e-3):
            self.assertEqual(
                paired_permutation_test(_scores(scale * a_values),
                                        _scores(scale * b_values), seed=3),
                p)

    def test_null_is_calibrated(self):
        rng = np.random.default_rng(2024)
        rejections = 0
        for rep in range(200):
            a = _scores(rng.standard_normal(10))
            b = _scores(rng.standard_normal(10))
            if paired_permutation_test(a, b, n_perm=1000, seed=rep) < 0.05:
                rejections += 1
        self.assertGreaterEqual(rejections / 200, 0.01)
        self.assertLessEqual(rejections / 200, 0.10)

    def test_errors(self):
        a = _scores([1.0, 2.0])
        with pytest.raises(ValueError):
            paired_permutation_test(a, a, n_perm=999)
        with pytest.raises(ValueError):
            paired_permutation_test(a, a, metric="rmse")
        with pytest.raises(ScanMismatchError) as exc_info:
            paired_permutation_test(a, _scores([1.0, 2.0], prefix="t"))
        self.assertIn("s00", exc_info.value.only_a)


class TestRelativeImprovement(unittest.TestCase):

    def test_error_metric(self):
        self.assertAlmostEqual(relative_improvement(1.0, 0.86, "mae"), 14.0)
        self.assertAlmostEqual(relative_improvement(2.0, 3.0, "dtw"), -50.0)

    def test_correlation(self):
        self.assertAlmostEqual(
            relative_improvement(0.5, 0.6, "pearson_r"), 20.0)

    def test_errors(self):
        with pytest.raises(ValueError):
            relative_improvement(0.0, 1.0, "mae")
        with pytest.raises(ValueError):
            relative_improvement(1.0, 1.0, "r2")


class TestScoreFiles(unittest.TestCase):

    def test_write_read(self):
        scores = [
            ScanScore("b", 0.1, 0.01, float("nan"), 3.0),
            ScanScore("a", 1.0 / 3.0, 0.2, -0.25, 7.5),
        ]
        with TemporaryDirectory() as tmp:
            path = write_scores(Path(tmp) / "scores.csv", scores)
            text = path.read_text()
            back = read_scores(path)
        self.assertTrue(text.startswith("# format: motionrv.scores/1\n"))
        self.assertEqual([s.scan_id for s in back], ["a", "b"])
        self.assertEqual(back[0], scores[1])
        self.assertTrue(np.isnan(back[1].pearson_r))

    def test_numeric_scan_ids_stay_strings(self):
        with TemporaryDirectory() as tmp:
            path = write_scores(Path(tmp) / "s.csv",
                                [ScanScore("007", 1.0, 1.0, 0.0, 1.0)])
            self.assertEqual(read_scores(path)[0].scan_id, "007")

    def test_missing_columns(self):
        with TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.csv"
            path.write_text("scan_id,mae\na,1.0\n")
            with pytest.raises(DataFormatError):
                read_scores(path)

    def test_summary_file(self):
        with TemporaryDirectory() as tmp:
            path = write_summary(Path(tmp) / "summary.csv",
                                 aggregate(_scores([1.0, 3.0])))
            lines = path.read_text().splitlines()
        self.assertEqual(lines[1], "metric,mean,std,n")
        self.assertEqual(lines[2], "mae,2,1,2")
