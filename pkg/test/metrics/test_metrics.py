import functools
import itertools
import unittest

import numpy as np
import pytest

from motionrv.errors import DegenerateSeriesError, ShapeError
from motionrv.metrics import (ScanScore, aggregate, dtw, mae, mse, pearson,
                              score_scan)
from motionrv.signals import FrameClock, RvSeries


def _paths(n, m):
    r"""All monotone warping paths from (0, 0) to (n-1, m-1)"""

    def walk(i, j, path):
        if (i, j) == (n - 1, m - 1):
            yield path
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            if i + di < n and j + dj < m:
                yield from walk(i + di, j + dj, path + [(i + di, j + dj)])

    yield from walk(0, 0, [(0, 0)])


def _dtw_reference(x, y):
    best = np.inf
    for path in _paths(len(x), len(y)):
        cost = 0.0
        for i, j in path:
            cost += abs(x[i] - y[j])
        best = min(best, cost)
    return best


def _dtw_recursive(x, y):
    r"""Cheapest path cost ending at each cell, by memoized recursion"""

    @functools.lru_cache(maxsize=None)
    def best(i, j):
        cost = abs(x[i] - y[j])
        if i == 0 and j == 0:
            return cost
        previous = []
        if i > 0 and j > 0:
            previous.append(best(i - 1, j - 1))
        if i > 0:
            previous.append(best(i - 1, j))
        if j > 0:
            previous.append(best(i, j - 1))
        return cost + min(previous)

    return best(len(x) - 1, len(y) - 1)


class TestPointwiseMetrics(unittest.TestCase):

    def test_mae_mse(self):
        pred = np.array([1.0, 2.0, 3.0])
        truth = np.array([1.0, 1.0, 5.0])
        self.assertAlmostEqual(mae(pred, truth), 1.0)
        self.assertAlmostEqual(mse(pred, truth), 5.0 / 3.0)

    def test_pearson(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        self.assertAlmostEqual(pearson(x, 2 * x + 1), 1.0)
        self.assertAlmostEqual(pearson(x, -x), -1.0)
        with pytest.raises(DegenerateSeriesError):
            pearson(x, np.ones(4))

    def test_mae_squared_bounded_by_mse(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            p, t = rng.standard_normal((2, 30))
            self.assertLessEqual(mae(p, t)**2, mse(p, t) + 1e-15)

    def test_pearson_ignores_positive_affine_maps(self):
        rng = np.random.default_rng(5)
        p, t = rng.standard_normal((2, 40))
        r = pearson(p, t)
        for a, b in ((3.0, -1.0), (0.01, 7.5)):
            self.assertAlmostEqual(pearson(a * p + b, t), r, places=10)
            self.assertAlmostEqual(pearson(p, a * t + b), r, places=10)
        self.assertAlmostEqual(pearson(-p, t), -r, places=12)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            mae(np.zeros(3), np.zeros(4))

    def test_extrapolated_frames_excluded(self):
        clock = FrameClock(n_frames=4)
        pred = RvSeries(np.array([9.0, 1.0, 1.0, 9.0]), clock,
                        support=np.array([0, 2, 1, 0]))
        truth = RvSeries(np.ones(4), clock)
        self.assertEqual(mae(pred, truth), 0.0)
        unsupported = RvSeries(np.ones(4), clock, support=np.zeros(4, int))
        with pytest.raises(ShapeError):
            mae(unsupported, truth)


class TestDtw(unittest.TestCase):

    def test_matches_path_enumeration(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n, m = rng.integers(1, 6, size=2)
            x = rng.standard_normal(n)
            y = rng.standard_normal(m)
            self.assertEqual(dtw(x, y), _dtw_reference(x, y))

    def test_matches_recursive_minimum(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            n, m = rng.integers(1, 13, size=2)
            x = rng.standard_normal(n)
            y = rng.standard_normal(m)
            self.assertEqual(dtw(x, y), _dtw_recursive(x, y))

    def test_identical_and_shifted(self):
        x = np.array([0.0, 1.0, 2.0, 1.0, 0.0])
        self.assertEqual(dtw(x, x), 0.0)
        # A one-frame delay is absorbed by warping
        self.assertEqual(dtw(np.array([0.0, 0.0, 1.0, 2.0, 1.0, 0.0]), x),
                         0.0)
        shifted = np.array([0.0, 0.0, 1.0, 2.0, 1.0])
        self.assertEqual(dtw(shifted, x), 1.0)
        self.assertEqual(np.sum(np.abs(shifted - x)), 4.0)

    def test_empty(self):
        with pytest.raises(ShapeError):
            dtw(np.zeros(0), np.zeros(3))

    def test_symmetric(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            n, m = rng.integers(1, 30, size=2)
            x, y = rng.standard_normal(n), rng.standard_normal(m)
            self.assertAlmostEqual(dtw(x, y), dtw(y, x), places=12)

    def test_no_worse_than_rigid_alignment(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 40))
            x, y = rng.standard_normal(n), rng.standard_normal(n)
            self.assertLessEqual(dtw(x, y), np.sum(np.abs(x - y)) + 1e-12)


class TestScoring(unittest.TestCase):

    def test_score_scan(self):
        clock = FrameClock(n_frames=5)
        truth = RvSeries(np.array([1.0, 2.0, 3.0, 2.0, 1.0]), clock)
        pred = RvSeries(truth.values + 0.5, clock)
        score = score_scan(pred, truth, "s1")
        self.assertEqual(score.scan_id, "s1")
        self.assertAlmostEqual(score.mae, 0.5)
        self.assertAlmostEqual(score.mse, 0.25)
        self.assertAlmostEqual(score.pearson_r, 1.0)
        self.assertAlmostEqual(score.dtw, 2.5)

    def test_constant_prediction_gives_nan_correlation(self):
        clock = FrameClock(n_frames=4)
        truth = RvSeries(np.array([1.0, 2.0, 3.0, 4.0]), clock)
        score = score_scan(RvSeries(np.zeros(4), clock), truth)
        self.assertTrue(np.isnan(score.pearson_r))
        self.assertAlmostEqual(score.mae, 2.5)

    def test_aggregate(self):
        scores = [
            ScanScore("b", 2.0, 4.0, float("nan"), 1.0),
            ScanScore("a", 1.0, 1.0, 0.5, 3.0),
        ]
        summary = aggregate(scores)
        self.assertEqual(summary["mae"].mean, 1.5)
        self.assertEqual(summary["mae"].std, 0.5)
        self.assertEqual(summary["mae"].n, 2)
        self.assertEqual(summary["pearson_r"].mean, 0.5)
        self.assertEqual(summary["pearson_r"].n, 1)

    def test_aggregate_all_nan_and_empty(self):
        summary = aggregate([ScanScore("a", 1.0, 1.0, float("nan"), 1.0)])
        self.assertTrue(np.isnan(summary["pearson_r"].mean))
        self.assertEqual(summary["pearson_r"].n, 0)
        with pytest.raises(ValueError):
            aggregate([])

    def test_aggregate_is_order_independent(self):
        rng = np.random.default_rng(3)
        scores = [
            ScanScore(f"s{i}", *rng.random(4)) for i in range(30)
        ]
        forward = aggregate(scores)
        backward = aggregate(list(reversed(scores)))
        for metric in forward:
            self.assertEqual(forward[metric], backward[metric])


def test_dtw_paths_cover_diagonal():
    paths = list(_paths(3, 3))
    assert [(0, 0), (1, 1), (2, 2)] in paths
    assert all(p[0] == (0, 0) and p[-1] == (2, 2) for p in paths)
    # Delannoy number D(2, 2)
    assert len(paths) == 13
    assert len(set(map(tuple, paths))) == len(paths)
    assert all(len(p) <= 5 for p in paths)
    assert list(itertools.islice(_paths(1, 1), 2)) == [[(0, 0)]]
