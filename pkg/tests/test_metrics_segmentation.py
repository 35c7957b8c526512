"""IoU matching of predicted blocks and the blank-crop rule."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from comui.errors import ImageDecodeError
from comui.metrics.segmentation import blank_ratio, match_components_iou
from helpers import box


class TestMatchComponentsIou:
    def test_exact_prediction(self):
        gt = [box(0, 0, 10, 10), box(20, 20, 30, 10)]
        report = match_components_iou(gt, list(gt))
        assert report.precision == 1.0
        assert report.recall == 1.0
        assert report.f1 == 1.0
        assert report.mean_iou == 1.0
        assert report.tp == 2 and report.fp == 0 and report.fn == 0

    def test_one_spurious_prediction(self):
        gt = [box(0, 0, 10, 10), box(20, 20, 30, 10), box(60, 0, 10, 10)]
        pred = list(gt) + [box(200, 200, 5, 5)]
        report = match_components_iou(gt, pred)
        assert report.precision == pytest.approx(3 / 4)
        assert report.recall == 1.0
        assert report.fp == 1

    def test_empty_prediction(self):
        gt = [box(0, 0, 10, 10)]
        report = match_components_iou(gt, [])
        assert report.precision == 0.0
        assert report.recall == 0.0
        assert report.f1 == 0.0
        assert report.tp == 0 and report.fn == 1

    def test_empty_ground_truth(self):
        report = match_components_iou([], [box(0, 0, 10, 10)])
        assert report.precision == 0.0
        assert report.recall == 0.0
        assert report.fp == 1

    def test_contention_resolved_by_highest_iou(self):
        # both gt boxes overlap the one prediction; the higher IoU wins
        gt = [box(0, 0, 10, 10), box(0, 0, 10, 20)]
        pred = [box(0, 0, 10, 12)]
        report = match_components_iou(gt, pred)
        assert report.tp == 1
        assert report.matches == ((0, 0, pytest.approx(100 / 120)),)
        assert report.recall == 0.5
        assert report.f1 == pytest.approx(2 / 3)
        assert report.mean_iou == pytest.approx(100 / 120)

    def test_zero_iou_never_matches(self):
        gt = [box(0, 0, 10, 10)]
        pred = [box(50, 50, 10, 10)]
        report = match_components_iou(gt, pred)
        assert report.tp == 0
        assert report.fp == 1 and report.fn == 1

    def test_tie_breaks_are_deterministic(self):
        gt = [box(0, 0, 10, 10), box(0, 0, 10, 10)]
        pred = [box(0, 0, 10, 10), box(0, 0, 10, 10)]
        report = match_components_iou(gt, pred)
        assert [(m[0], m[1]) for m in report.matches] == [(0, 0), (1, 1)]

    @given(
        st.lists(
            st.tuples(st.integers(0, 60), st.integers(0, 60),
                      st.integers(1, 30), st.integers(1, 30)),
            min_size=0, max_size=6,
        ),
        st.lists(
            st.tuples(st.integers(0, 60), st.integers(0, 60),
                      st.integers(1, 30), st.integers(1, 30)),
            min_size=0, max_size=6,
        ),
    )
    @settings(max_examples=80, deadline=None)
    def test_score_ranges(self, gt_specs, pred_specs):
        gt = [box(*s) for s in gt_specs]
        pred = [box(*s) for s in pred_specs]
        report = match_components_iou(gt, pred)
        for value in (report.precision, report.recall, report.f1, report.mean_iou):
            assert 0.0 <= value <= 1.0
        if report.tp == 0:
            assert report.f1 == 0.0
        assert report.tp + report.fn == len(gt)
        assert report.tp + report.fp == len(pred)


class TestBlankRatio:
    def test_solid_crop_is_blank(self):
        crop = np.full((20, 30, 3), 180, dtype=np.uint8)
        is_blank, std = blank_ratio(crop)
        assert is_blank
        assert std == 0.0

    def test_textured_crop_is_not_blank(self):
        crop = np.zeros((20, 30, 3), dtype=np.uint8)
        crop[5:15, 5:25] = 255
        is_blank, std = blank_ratio(crop)
        assert not is_blank
        assert std > 2.0

    def test_single_dark_pixel_in_ten_thousand(self):
        # std = sqrt(255^2 * p(1-p)) with p = 1e-4 comes to 2.5499,
        # just over the 2.0 rule
        crop = np.full((100, 100, 3), 255, dtype=np.uint8)
        crop[0, 0] = 0
        is_blank, std = blank_ratio(crop)
        assert not is_blank
        assert std == pytest.approx(2.5499, abs=1e-3)

    def test_small_variation_stays_blank(self):
        crop = np.full((10, 10, 3), 254, dtype=np.uint8)
        crop[:, ::2] = 255  # alternating columns: std = 0.5 per channel
        is_blank, std = blank_ratio(crop)
        assert is_blank
        assert std == pytest.approx(0.5, abs=1e-9)

    def test_one_noisy_channel_defeats_blankness(self):
        crop = np.full((50, 50, 3), 128, dtype=np.uint8)
        rng = np.random.default_rng(5)
        crop[:, :, 2] = rng.integers(0, 256, size=(50, 50), dtype=np.uint8)
        is_blank, _ = blank_ratio(crop)
        assert not is_blank

    def test_grayscale_crop_supported(self):
        crop = np.full((8, 8), 99, dtype=np.uint8)
        assert blank_ratio(crop) == (True, 0.0)

    def test_empty_crop_rejected(self):
        with pytest.raises(ImageDecodeError):
            blank_ratio(np.zeros((0, 10, 3), dtype=np.uint8))
