import itertools
import logging

import pytest
from hypothesis import given
from hypothesis import strategies as st

from floodsign.errors import NoPoleError, NoSignError
from floodsign.geometry import BBox, LatLon, SignSpec
from floodsign.oracle import CameraSpec, SceneSpec, render_scene
from floodsign.selection import (
    Detection,
    DetectionClass,
    Phase,
    PhotoRecord,
    build_observation,
    match_pole,
    select_primary_sign,
)

SIGN = DetectionClass.STOP_SIGN
POLE = DetectionClass.POLE


def det(cls, x0, y0, x1, y1, conf=1.0):
    return Detection(cls, BBox(x0, y0, x1, y1), conf)


def photo(detections, photo_id="p", phase=Phase.POST_FLOOD, size=1000):
    return PhotoRecord(
        photo_id=photo_id,
        location=LatLon(0.0, 0.0),
        phase=phase,
        image_width=size,
        image_height=size,
        detections=tuple(detections),
    )


class TestSelectPrimarySign:
    def test_singleton(self):
        only = det(SIGN, 0, 0, 10, 10)
        assert select_primary_sign([only]) is only

    def test_largest_area_wins(self):
        small = det(SIGN, 0, 0, 20, 20)  # 400 px^2
        large = det(SIGN, 50, 50, 80, 80)  # 900 px^2
        assert select_primary_sign([small, large]) is large
        assert select_primary_sign([large, small]) is large

    def test_area_tie_broken_by_confidence(self):
        lo = det(SIGN, 0, 0, 20, 20, conf=0.7)
        hi = det(SIGN, 30, 0, 50, 20, conf=0.9)
        assert select_primary_sign([lo, hi]) is hi

    def test_full_tie_broken_by_x_min(self):
        left = det(SIGN, 0, 0, 20, 20, conf=0.8)
        right = det(SIGN, 30, 0, 50, 20, conf=0.8)
        assert select_primary_sign([right, left]) is left

    def test_no_sign(self):
        with pytest.raises(NoSignError):
            select_primary_sign([det(POLE, 0, 0, 5, 50)])


class TestMatchPole:
    def test_nearest_x_center(self):
        sign = det(SIGN, 90, 0, 120, 30)  # x center 105
        near = det(POLE, 95, 30, 105, 80)  # x center 100
        far = det(POLE, 145, 30, 155, 80)  # x center 150
        assert match_pole(sign, [far, near]) is near

    def test_singleton(self):
        sign = det(SIGN, 0, 0, 30, 30)
        only = det(POLE, 500, 0, 510, 100)
        assert match_pole(sign, [only]) is only

    def test_distance_tie_broken_by_height(self):
        sign = det(SIGN, 90, 0, 120, 30)  # x center 105
        short = det(POLE, 95, 30, 105, 60)  # x center 100, height 30
        tall = det(POLE, 105, 30, 115, 100)  # x center 110, height 70
        assert match_pole(sign, [short, tall]) is tall

    def test_no_pole(self):
        with pytest.raises(NoPoleError):
            match_pole(det(SIGN, 0, 0, 10, 10), [det(SIGN, 0, 0, 10, 10)])


class TestBuildObservation:
    def test_forced_composition(self):
        p = photo([det(SIGN, 100, 100, 130, 130), det(POLE, 112, 130, 118, 190)])
        obs = build_observation(p, SignSpec(30.0))
        assert obs.ppi == 1.0
        assert obs.pole_length_in == 60.0
        assert not obs.multi_sign_scene

    def test_two_sign_scene_uses_largest_and_its_pole(self):
        # street-view layout: near sign large and left, far sign small and right
        near_sign = det(SIGN, 100, 100, 160, 160)
        near_pole = det(POLE, 126, 160, 134, 400)
        far_sign = det(SIGN, 600, 120, 620, 140)
        far_pole = det(POLE, 608, 140, 612, 220)
        p = photo([far_sign, near_pole, near_sign, far_pole])
        obs = build_observation(p, SignSpec(30.0))
        assert obs.sign_bbox == near_sign.bbox
        assert obs.pole_bbox == near_pole.bbox
        assert obs.multi_sign_scene

    def test_oracle_two_distances_selects_nearer(self):
        # 5 m vs 20 m: the nearer sign projects a larger box
        spec = SceneSpec(
            sign_bottom_height_in=84.0,
            camera=CameraSpec(focal_px=800, distance_in=196.85, image_width=4000, image_height=4000),
            extra_signs=((787.4, 120.0),),
            water_level_in=0.0,
        )
        record, truth = render_scene(spec)
        assert len([d for d in record.detections if d.cls is SIGN]) == 2
        obs = build_observation(record, SignSpec(30.0))
        assert obs.sign_bbox == truth.sign_bbox
        assert obs.pole_bbox == truth.pole_bbox
        assert obs.multi_sign_scene

    def test_confidence_filter_drops_weak_detections(self):
        strong = det(SIGN, 100, 100, 130, 130, conf=0.9)
        weak = det(SIGN, 200, 100, 260, 160, conf=0.1)  # larger but filtered out
        pole = det(POLE, 112, 130, 118, 190, conf=0.9)
        obs = build_observation(photo([strong, weak, pole]), SignSpec(30.0), min_confidence=0.25)
        assert obs.sign_bbox == strong.bbox
        assert not obs.multi_sign_scene

    def test_all_filtered_is_no_sign(self):
        p = photo([det(SIGN, 0, 0, 10, 10, conf=0.1), det(POLE, 0, 10, 5, 60, conf=0.1)])
        with pytest.raises(NoSignError):
            build_observation(p, SignSpec(30.0), min_confidence=0.25)

    def test_missing_pole_error_vs_submerged(self):
        p = photo([det(SIGN, 100, 100, 130, 130)])
        with pytest.raises(NoPoleError):
            build_observation(p, SignSpec(30.0))
        obs = build_observation(p, SignSpec(30.0), missing_pole="submerged")
        assert obs.pole_bbox is None
        assert obs.pole_length_in == 0.0

    def test_pole_above_sign_warns(self, caplog):
        p = photo([det(SIGN, 100, 200, 130, 230), det(POLE, 112, 100, 118, 180)])
        with caplog.at_level(logging.WARNING, logger="floodsign.selection"):
            build_observation(p, SignSpec(30.0))
        assert any("above the sign" in r.message for r in caplog.records)


# ---------------------------------------------------------------------------
# Invariants

BASE_DETS = [
    det(SIGN, 100, 100, 160, 160, conf=0.95),
    det(SIGN, 600, 120, 620, 140, conf=0.99),
    det(POLE, 126, 160, 134, 400, conf=0.9),
    det(POLE, 608, 140, 612, 220, conf=0.8),
]


def shifted(d: Detection, dx: float, dy: float) -> Detection:
    return Detection(d.cls, d.bbox.translate(dx, dy), d.confidence)


def scaled(d: Detection, s: float) -> Detection:
    return Detection(d.cls, d.bbox.scale(s), d.confidence)


@given(
    dx=st.integers(min_value=-1000, max_value=1000),
    dy=st.integers(min_value=-1000, max_value=1000),
)
def test_selection_translation_invariant(dx, dy):
    base_sign = select_primary_sign(BASE_DETS)
    base_pole = match_pole(base_sign, BASE_DETS)
    moved = [shifted(d, dx, dy) for d in BASE_DETS]
    sign = select_primary_sign(moved)
    assert sign.bbox == base_sign.bbox.translate(dx, dy)
    assert match_pole(sign, moved).bbox == base_pole.bbox.translate(dx, dy)


@given(s=st.floats(min_value=0.01, max_value=100.0))
def test_sign_selection_scale_invariant(s):
    base_index = BASE_DETS.index(select_primary_sign(BASE_DETS))
    rescaled = [scaled(d, s) for d in BASE_DETS]
    assert rescaled.index(select_primary_sign(rescaled)) == base_index


@given(perm=st.permutations(range(len(BASE_DETS))))
def test_selection_order_independent(perm):
    reordered = [BASE_DETS[i] for i in perm]
    sign = select_primary_sign(reordered)
    pole = match_pole(sign, reordered)
    assert sign is BASE_DETS[0]
    assert pole is BASE_DETS[2]


def test_selection_deterministic_on_exact_ties():
    # identical boxes: selection must still be a function of the inputs
    twins = [det(SIGN, 0, 0, 10, 10, conf=0.5), det(SIGN, 0, 0, 10, 10, conf=0.5)]
    for ordering in itertools.permutations(twins):
        chosen = select_primary_sign(list(ordering))
        assert chosen.bbox == twins[0].bbox
