"""Depth metric definitions, aggregation, and CSV serialization."""

import csv
import math

import numpy as np
import pytest

from msfnet.metrics import (CSV_HEADER, ImageMetrics, MetricReport, aggregate,
                            evaluate_image, write_report_csv)


def dense_mask(shape):
    return np.ones(shape, dtype=bool)


class TestEvaluateImage:
    def test_perfect_prediction(self):
        gt = np.array([[1.0, 2.0], [3.0, 4.0]])
        m = evaluate_image(gt.copy(), gt, dense_mask(gt.shape))
        assert m.rmse == 0.0 and m.rel == 0.0 and m.log10 == 0.0
        assert m.delta1 == m.delta2 == m.delta3 == 1.0
        assert m.n_pixels == 4

    def test_ratio_1p3(self):
        gt = np.full((3, 3), 2.0)
        m = evaluate_image(1.3 * gt, gt, dense_mask(gt.shape))
        assert m.delta1 == 0.0 and m.delta2 == 1.0 and m.delta3 == 1.0
        assert m.rel == pytest.approx(0.3, abs=1e-12)

    def test_hand_case(self):
        pred = np.array([[1.0, 2.0], [3.0, 4.0]])
        gt = np.full((2, 2), 2.0)
        m = evaluate_image(pred, gt, dense_mask(gt.shape))
        assert m.rmse == pytest.approx(math.sqrt(1.5), abs=1e-12)
        assert m.rel == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("c,expect", [
        (1.2, (1.0, 1.0, 1.0)),
        (1.3, (0.0, 1.0, 1.0)),
        (1.6, (0.0, 0.0, 1.0)),
        (2.0, (0.0, 0.0, 0.0)),
    ])
    def test_delta_step_function_of_scale(self, c, expect):
        rng = np.random.default_rng(0)
        gt = rng.uniform(1.0, 5.0, size=(6, 6))
        m = evaluate_image(c * gt, gt, dense_mask(gt.shape))
        assert (m.delta1, m.delta2, m.delta3) == expect

    def test_scale_behaviour(self):
        rng = np.random.default_rng(1)
        gt = rng.uniform(1.0, 5.0, size=(5, 5))
        pred = gt * rng.uniform(0.8, 1.2, size=(5, 5))
        base = evaluate_image(pred, gt, dense_mask(gt.shape))
        s = 3.7
        scaled = evaluate_image(s * pred, s * gt, dense_mask(gt.shape))
        assert scaled.rel == pytest.approx(base.rel, rel=1e-12)
        assert scaled.log10 == pytest.approx(base.log10, rel=1e-9)
        assert scaled.rmse == pytest.approx(s * base.rmse, rel=1e-12)

    def test_off_mask_ignored(self):
        gt = np.array([[1.0, 2.0], [3.0, 4.0]])
        pred = gt.copy()
        pred[0, 0] = 50.0
        mask = dense_mask(gt.shape)
        mask[0, 0] = False
        m = evaluate_image(pred, gt, mask)
        assert m.rel == 0.0 and m.n_pixels == 3

    def test_nonpositive_depth_rejected(self):
        gt = np.array([[1.0, -2.0]])
        with pytest.raises(ValueError):
            evaluate_image(np.ones_like(gt), gt, dense_mask(gt.shape))
        with pytest.raises(ValueError):
            evaluate_image(np.zeros_like(gt) , np.abs(gt), dense_mask(gt.shape))

    def test_empty_mask_rejected(self):
        gt = np.ones((2, 2))
        with pytest.raises(ValueError):
            evaluate_image(gt, gt, np.zeros((2, 2), dtype=bool))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            evaluate_image(np.ones((2, 2)), np.ones((2, 3)), np.ones((2, 2), dtype=bool))


class TestAggregate:
    def test_single_image_passthrough(self):
        m = ImageMetrics(rmse=1.0, rel=0.2, log10=0.1, delta1=0.5, delta2=0.7,
                         delta3=0.9, n_pixels=10)
        report = aggregate([m])
        assert report.rel == m.rel and report.rmse == m.rmse
        assert report.n_images == 1 and report.n_pixels == 10

    def test_mean_of_two(self):
        a = ImageMetrics(1.0, 0.0, 0.0, 0.0, 0.5, 1.0, 4)
        b = ImageMetrics(3.0, 0.2, 0.1, 1.0, 1.0, 1.0, 6)
        report = aggregate([a, b])
        assert report.delta1 == 0.5
        assert report.rmse == 2.0
        assert report.n_pixels == 10 and report.n_images == 2

    def test_delta_monotonicity_preserved(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            reports = []
            for _ in range(rng.integers(1, 6)):
                gt = rng.uniform(0.5, 8.0, size=(4, 4))
                pred = gt * rng.uniform(0.5, 2.0, size=(4, 4))
                reports.append(evaluate_image(pred, gt, dense_mask(gt.shape)))
            agg = aggregate(reports)
            assert agg.delta1 <= agg.delta2 <= agg.delta3

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])


class TestCsv:
    def test_header_and_row_order(self, tmp_path):
        report = MetricReport(rmse=1.5, rel=0.25, log10=0.05, delta1=0.3,
                              delta2=0.6, delta3=0.9, n_pixels=100, n_images=7)
        path = tmp_path / "report.csv"
        write_report_csv(path, report)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == CSV_HEADER
        assert rows[1] == ["0.25", "1.5", "0.05", "0.3", "0.6", "0.9", "7", "100"]
