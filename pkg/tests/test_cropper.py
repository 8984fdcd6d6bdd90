"""Crop and resize-target sampling tests."""

import numpy as np
import pytest

from viewforge.core import SeededRng, derive_stream, iou
from viewforge.cropper import (
    CropParams,
    DegenerateGeometry,
    ResizeTargetParams,
    sample_area_crop,
    sample_constrained_pair,
    sample_resize_target,
)


def fresh(seed=7, index=0, stage=0):
    return derive_stream(seed, index, stage)


class TestCropParams:
    def test_defaults(self):
        p = CropParams()
        assert p.min_area_frac == 0.20
        assert p.max_area_frac == 1.0
        assert p.crop_aspect_range == (0.5, 2.0)
        assert p.iou_threshold == 0.0
        assert p.max_rejection_tries == 100

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"min_area_frac": 0.0},
            {"min_area_frac": 0.9, "max_area_frac": 0.5},
            {"max_area_frac": 1.5},
            {"crop_aspect_range": (0.0, 2.0)},
            {"crop_aspect_range": (2.0, 0.5)},
            {"iou_threshold": 1.0},
            {"iou_threshold": -0.1},
            {"max_rejection_tries": 0},
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            CropParams(**kwargs)


class TestSampleAreaCrop:
    def test_full_crop_forced(self):
        p = CropParams(min_area_frac=1.0, max_area_frac=1.0)
        box = sample_area_crop(100, 100, p, fresh())
        assert (box.x0, box.y0, box.x1, box.y1) == (0, 0, 100, 100)
        box = sample_area_crop(13, 7, p, fresh(seed=9))
        assert (box.x0, box.y0, box.x1, box.y1) == (0, 0, 13, 7)

    def test_area_fraction_bounds(self):
        p = CropParams(min_area_frac=0.20, max_area_frac=1.0)
        rng = fresh(seed=3)
        for _ in range(2000):
            box = sample_area_crop(100, 100, p, rng)
            assert 2000 <= box.area <= 10000
            assert box.inside(100, 100)

    def test_narrow_band_and_odd_dims(self):
        p = CropParams(min_area_frac=0.45, max_area_frac=0.55)
        rng = fresh(seed=5)
        for w, h in [(37, 53), (640, 480), (9, 200)]:
            for _ in range(300):
                box = sample_area_crop(w, h, p, rng)
                frac = box.area / (w * h)
                assert 0.45 <= frac <= 0.55
                assert box.inside(w, h)

    def test_fraction_mean_uniform(self):
        p = CropParams(min_area_frac=0.45, max_area_frac=1.0)
        rng = fresh(seed=11)
        total = 320 * 240
        fracs = [sample_area_crop(320, 240, p, rng).area / total for _ in range(20000)]
        assert abs(float(np.mean(fracs)) - 0.725) < 0.015
        assert min(fracs) >= 0.45
        assert max(fracs) <= 1.0

    def test_aspect_stays_near_requested_band(self):
        p = CropParams(min_area_frac=0.2, max_area_frac=0.5, crop_aspect_range=(0.5, 2.0))
        rng = fresh(seed=13)
        for _ in range(1000):
            box = sample_area_crop(1000, 1000, p, rng)
            # integer rounding wobbles the realized ratio a little
            assert 0.4 <= box.width / box.height <= 2.6

    def test_deterministic_for_equal_streams(self):
        p = CropParams()
        a = [sample_area_crop(640, 480, p, fresh(seed=21, index=4))]
        b = [sample_area_crop(640, 480, p, fresh(seed=21, index=4))]
        assert a == b

    def test_degenerate_band_raises(self):
        with pytest.raises(DegenerateGeometry):
            sample_area_crop(2, 2, CropParams(min_area_frac=0.3, max_area_frac=0.3), fresh())

    def test_golden_box(self):
        # pinned from the first verified run; guards the draw order forever
        box = sample_area_crop(640, 480, CropParams(), derive_stream(7, 0, 0))
        assert (box.x0, box.y0, box.x1, box.y1) == GOLDEN_CROP


class TestSampleConstrainedPair:
    def test_vacuous_threshold_returns_first_pair(self):
        p = CropParams(iou_threshold=0.0)
        a, b, ok = sample_constrained_pair(500, 500, p, fresh(seed=17))
        assert ok
        replay = fresh(seed=17)
        assert a == sample_area_crop(500, 500, p, replay)
        assert b == sample_area_crop(500, 500, p, replay)

    def test_satisfied_pairs_meet_threshold(self):
        p = CropParams(iou_threshold=0.7)
        rng = fresh(seed=19)
        hits = 0
        for _ in range(200):
            a, b, ok = sample_constrained_pair(500, 500, p, rng)
            if ok:
                hits += 1
                assert iou(a, b) >= 0.7
            else:
                assert iou(a, b) < 0.7
        assert hits > 0

    def test_exhaustion_returns_argmax_pair(self):
        p = CropParams(iou_threshold=0.999, max_rejection_tries=5)
        a, b, ok = sample_constrained_pair(400, 300, p, fresh(seed=23))
        assert not ok
        replay = fresh(seed=23)
        best, best_v = None, -1.0
        for _ in range(5):
            pair = (
                sample_area_crop(400, 300, p, replay),
                sample_area_crop(400, 300, p, replay),
            )
            v = iou(*pair)
            if v > best_v:
                best, best_v = pair, v
        assert (a, b) == best
        assert iou(a, b) == best_v

    def test_custom_draw_callable(self):
        calls = []

        def fixed_draw(w, h, params, rng):
            calls.append(1)
            return sample_area_crop(w, h, params, rng)

        p = CropParams(iou_threshold=0.0)
        sample_constrained_pair(100, 100, p, fresh(seed=29), draw=fixed_draw)
        assert len(calls) == 2


class TestSampleResizeTarget:
    def test_defaults_stay_in_range(self):
        p = ResizeTargetParams()
        rng = fresh(seed=31)
        for _ in range(10000):
            w, h = sample_resize_target(p, rng)
            assert 128 <= w <= 256
            assert 128 <= h <= 256

    def test_unit_aspect_square(self):
        p = ResizeTargetParams(aspect_range=(1.0, 1.0))
        rng = fresh(seed=37)
        for _ in range(500):
            w, h = sample_resize_target(p, rng)
            assert w == h

    def test_height_uniform_mean(self):
        p = ResizeTargetParams()
        rng = fresh(seed=41)
        hs = [sample_resize_target(p, rng)[1] for _ in range(10000)]
        assert abs(float(np.mean(hs)) - 192.0) < 2.0

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            ResizeTargetParams(aspect_range=(0.0, 2.0))
        with pytest.raises(ValueError):
            ResizeTargetParams(side_range=(0, 256))
        with pytest.raises(ValueError):
            ResizeTargetParams(side_range=(256, 128))

    def test_golden_pair(self):
        w, h = sample_resize_target(ResizeTargetParams(), derive_stream(7, 0, 0))
        assert (w, h) == GOLDEN_RESIZE


# Pinned after the property tests above passed on the reference run.
GOLDEN_CROP = (130, 15, 638, 410)
GOLDEN_RESIZE = (234, 182)
