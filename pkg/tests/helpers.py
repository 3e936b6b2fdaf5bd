"""Independent reference implementations used to check the library.

Everything here is deliberately written from scratch (no calls into the
code under test beyond plain data types) so tests compare two independent
routes to the same answer.
"""

from __future__ import annotations

import math
import random

from floodsign.geometry import BBox, LatLon
from floodsign.metrics import GroundTruthBox
from floodsign.oracle import CameraSpec, SceneSpec
from floodsign.selection import Detection, DetectionClass, Phase

EARTH_RADIUS_M = 6_371_000.0
METERS_PER_DEGREE_LAT = 2.0 * math.pi * EARTH_RADIUS_M / 360.0


def offset_north(origin: LatLon, meters: float) -> LatLon:
    """Move a point north by a small distance (flat-earth approximation,
    fine well below a kilometer)."""
    return LatLon(origin.lat + meters / METERS_PER_DEGREE_LAT, origin.lon)


# ---------------------------------------------------------------------------
# Brute-force average precision: enumerate every confidence threshold and
# re-score the kept detections from scratch.


def ref_iou(a: BBox, b: BBox) -> float:
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    a_area = (a.x_max - a.x_min) * (a.y_max - a.y_min)
    b_area = (b.x_max - b.x_min) * (b.y_max - b.y_min)
    return inter / (a_area + b_area - inter)


def ref_pr_area(points: list[tuple[float, float]]) -> float:
    recalls = [0.0] + [r for r, _ in points] + [1.0]
    precisions = [0.0] + [p for _, p in points] + [0.0]
    best = 0.0
    envelope = [0.0] * len(precisions)
    for i in reversed(range(len(precisions))):
        best = max(best, precisions[i])
        envelope[i] = best
    area = 0.0
    for i in range(1, len(recalls)):
        if recalls[i] != recalls[i - 1]:
            area += (recalls[i] - recalls[i - 1]) * envelope[i]
    return area


def brute_force_ap(
    dets: list[tuple[Detection, str]],
    truths: list[GroundTruthBox],
    iou_threshold: float = 0.5,
) -> float:
    if not dets or not truths:
        return 0.0
    points: list[tuple[float, float]] = []
    for threshold in sorted({d.confidence for d, _ in dets}, reverse=True):
        kept = [(d, pid) for d, pid in dets if d.confidence >= threshold]
        kept.sort(key=lambda pair: -pair[0].confidence)
        consumed: set[int] = set()
        tp = fp = 0
        for det, photo_id in kept:
            best_idx = None
            best_iou = 0.0
            for idx, truth in enumerate(truths):
                if idx in consumed or truth.photo_id != photo_id:
                    continue
                overlap = ref_iou(det.bbox, truth.bbox)
                if overlap > best_iou:
                    best_iou = overlap
                    best_idx = idx
            if best_idx is not None and best_iou >= iou_threshold:
                consumed.add(best_idx)
                tp += 1
            else:
                fp += 1
        points.append((tp / len(truths), tp / (tp + fp)))
    return ref_pr_area(points)


def random_box(rand: random.Random) -> BBox:
    x0 = rand.randint(0, 12)
    y0 = rand.randint(0, 12)
    return BBox(x0, y0, x0 + rand.randint(2, 10), y0 + rand.randint(2, 10))


def random_ap_instance(
    rand: random.Random, max_dets: int = 6, max_truths: int = 4
) -> tuple[list[tuple[Detection, str]], list[GroundTruthBox]]:
    """A small detection-vs-truth instance with distinct confidences."""
    photos = ("a", "b")
    truths = [
        GroundTruthBox(rand.choice(photos), DetectionClass.STOP_SIGN, random_box(rand))
        for _ in range(rand.randint(0, max_truths))
    ]
    n_dets = rand.randint(0, max_dets)
    confidences = rand.sample([i / 64.0 for i in range(1, 64)], n_dets)
    dets = [
        (
            Detection(DetectionClass.STOP_SIGN, random_box(rand), conf),
            rand.choice(photos),
        )
        for conf in confidences
    ]
    return dets, truths


# ---------------------------------------------------------------------------
# Scene builders and end-to-end depth recovery


def scene(
    water_level_in: float,
    *,
    sign_bottom_height_in: float = 84.0,
    focal_px: float = 800.0,
    distance_in: float = 400.0,
    image: int = 8000,
    phase: Phase = Phase.POST_FLOOD,
    photo_id: str = "scene",
    location: LatLon = LatLon(0.0, 0.0),
    quantize: bool = False,
) -> SceneSpec:
    return SceneSpec(
        sign_bottom_height_in=sign_bottom_height_in,
        water_level_in=water_level_in,
        camera=CameraSpec(
            focal_px=focal_px,
            distance_in=distance_in,
            image_width=image,
            image_height=image,
        ),
        phase=phase,
        photo_id=photo_id,
        location=location,
        quantize=quantize,
    )


def recover_depth(pre_record, post_record) -> float:
    """Run the measurement pipeline over a rendered pre/post photo pair."""
    from floodsign.geometry import SignSpec, estimate_depth
    from floodsign.selection import build_observation

    obs_pre = build_observation(pre_record, SignSpec())
    obs_post = build_observation(post_record, SignSpec(), missing_pole="submerged")
    return estimate_depth(obs_pre, obs_post, post_record.location).depth_in
