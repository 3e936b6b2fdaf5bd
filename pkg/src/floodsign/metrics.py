"""Detection and depth evaluation metrics.

Covers IoU, per-class average precision with greedy confidence-ordered
matching, mAP as the arithmetic mean of class APs, the two mean-absolute-
error formulations for pole lengths and flood depths, deterministic k-fold
splitting, and aggregation of per-fold optimal training iterations.

Everything here is plain-Python arithmetic so results are exactly
reproducible against brute-force re-evaluations.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

from .geometry import BBox
from .selection import Detection, DetectionClass, Phase

logger = logging.getLogger(__name__)

DEFAULT_IOU_THRESHOLD = 0.5
DEFAULT_K_FOLDS = 5


@dataclass(frozen=True)
class GroundTruthBox:
    photo_id: str
    cls: DetectionClass
    bbox: BBox


@dataclass(frozen=True)
class DepthRecord:
    """One estimated flood depth against surveyed ground truth."""

    id: str
    location_label: str
    detected_depth_in: float
    ground_truth_depth_in: float

    def __post_init__(self) -> None:
        if self.ground_truth_depth_in < 0:
            raise ValueError(f"record {self.id}: ground truth depth must be >= 0")

    @property
    def delta_in(self) -> float:
        return self.detected_depth_in - self.ground_truth_depth_in


@dataclass(frozen=True)
class PoleLengthRecord:
    """Detected vs ground-truth visible pole length for one photo."""

    photo_id: str
    detected_in: float
    truth_in: float
    phase: Phase
    sign_id: str | None = None

    def __post_init__(self) -> None:
        if self.detected_in < 0 or self.truth_in < 0:
            raise ValueError(f"record {self.photo_id}: pole lengths must be >= 0")


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_ids: tuple[Hashable, ...]
    val_ids: tuple[Hashable, ...]


def iou(a: BBox, b: BBox) -> float:
    """Intersection area over union area; 0 for disjoint boxes."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one detection against the ground truths."""

    detection: Detection
    photo_id: str
    matched_truth_index: int | None
    iou: float

    @property
    def is_tp(self) -> bool:
        return self.matched_truth_index is not None


def greedy_match(
    dets: Sequence[tuple[Detection, str]],
    truths: Sequence[GroundTruthBox],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> list[MatchResult]:
    """Match detections to truths, in descending confidence order.

    Each detection tries the highest-IoU unmatched truth in its own photo;
    it is a true positive iff that IoU reaches the threshold, in which case
    the truth is consumed.  Results come back in the processing order.
    """
    classes = {d.cls for d, _ in dets} | {t.cls for t in truths}
    if len(classes) > 1:
        raise ValueError(f"detections and truths must share one class, got {classes}")

    order = sorted(range(len(dets)), key=lambda i: (-dets[i][0].confidence, i))
    truths_by_photo: dict[str, list[int]] = {}
    for idx, t in enumerate(truths):
        truths_by_photo.setdefault(t.photo_id, []).append(idx)
    consumed: set[int] = set()

    results: list[MatchResult] = []
    for i in order:
        det, photo_id = dets[i]
        best_idx: int | None = None
        best_iou = 0.0
        for t_idx in truths_by_photo.get(photo_id, []):
            if t_idx in consumed:
                continue
            overlap = iou(det.bbox, truths[t_idx].bbox)
            if overlap > best_iou:
                best_iou = overlap
                best_idx = t_idx
        if best_idx is not None and best_iou >= iou_threshold:
            consumed.add(best_idx)
            results.append(MatchResult(det, photo_id, best_idx, best_iou))
        else:
            results.append(MatchResult(det, photo_id, None, best_iou))
    return results


def interpolated_pr_area(points: Sequence[tuple[float, float]]) -> float:
    """Area under the monotonized precision-recall curve.

    ``points`` are (recall, precision) pairs in increasing-recall order.
    Every-point interpolation: precision at recall r is the maximum
    precision at any recall >= r.
    """
    mrec = [0.0] + [r for r, _ in points] + [1.0]
    mpre = [0.0] + [p for _, p in points] + [0.0]
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    area = 0.0
    for i in range(1, len(mrec)):
        if mrec[i] != mrec[i - 1]:
            area += (mrec[i] - mrec[i - 1]) * mpre[i]
    return area


def average_precision(
    dets: Sequence[tuple[Detection, str]],
    truths: Sequence[GroundTruthBox],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> float:
    """Single-class average precision at a fixed IoU threshold."""
    if not dets:
        return 0.0
    if not truths:
        logger.warning("average_precision: %d detections but no ground truths", len(dets))
        return 0.0
    matches = greedy_match(dets, truths, iou_threshold)
    tp = 0
    fp = 0
    points: list[tuple[float, float]] = []
    n_truth = len(truths)
    for m in matches:
        if m.is_tp:
            tp += 1
        else:
            fp += 1
        points.append((tp / n_truth, tp / (tp + fp)))
    return interpolated_pr_area(points)


def matched_ious(
    dets: Sequence[tuple[Detection, str]],
    truths: Sequence[GroundTruthBox],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> list[float]:
    """IoU of every true-positive match, in matching order."""
    if not dets or not truths:
        return []
    return [m.iou for m in greedy_match(dets, truths, iou_threshold) if m.is_tp]


def mean_ap(per_class_aps: Mapping[object, float]) -> float:
    """Arithmetic mean of the class APs."""
    if not per_class_aps:
        raise ValueError("mean_ap of an empty class map")
    return sum(per_class_aps.values()) / len(per_class_aps)


def mae_pole(records: Sequence[PoleLengthRecord]) -> float:
    """Mean absolute pole-length error over the given records."""
    if not records:
        raise ValueError("mae_pole of an empty record list")
    return sum(abs(r.detected_in - r.truth_in) for r in records) / len(records)


def mae_depth_table(records: Sequence[DepthRecord]) -> float:
    """Mean absolute flood-depth error, detected depth vs ground truth."""
    if not records:
        raise ValueError("mae_depth_table of an empty record list")
    return sum(abs(r.delta_in) for r in records) / len(records)


def mae_depth_polesum(pairs: Sequence[tuple[PoleLengthRecord, PoleLengthRecord]]) -> float:
    """Mean over photo pairs of the summed pre + post pole-length errors.

    This is the alternative depth-error formulation: per pair it adds the
    absolute pole errors of the pre-flood and post-flood photos, which upper
    bounds the error of the depth difference itself.
    """
    if not pairs:
        raise ValueError("mae_depth_polesum of an empty pair list")
    total = 0.0
    for pre, post in pairs:
        if pre.phase is not Phase.PRE_FLOOD or post.phase is not Phase.POST_FLOOD:
            raise ValueError(
                f"pair ({pre.photo_id}, {post.photo_id}): expected (pre, post) phases"
            )
        total += abs(pre.detected_in - pre.truth_in) + abs(post.detected_in - post.truth_in)
    return total / len(pairs)


def kfold_split(
    ids: Sequence[Hashable], k: int = DEFAULT_K_FOLDS, seed: int = 0
) -> list[FoldSplit]:
    """Shuffle deterministically and cut into k contiguous validation folds.

    The first ``len(ids) mod k`` folds take one extra validation item, so
    fold sizes never differ by more than 1.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(ids) < k:
        raise ValueError(f"need at least k={k} ids, got {len(ids)}")
    if len(set(ids)) != len(ids):
        raise ValueError("ids must be unique")
    shuffled = list(ids)
    random.Random(seed).shuffle(shuffled)

    n = len(shuffled)
    base, extra = divmod(n, k)
    folds: list[FoldSplit] = []
    start = 0
    for fold_index in range(k):
        size = base + (1 if fold_index < extra else 0)
        val = tuple(shuffled[start : start + size])
        train = tuple(shuffled[:start] + shuffled[start + size :])
        folds.append(FoldSplit(fold_index=fold_index, train_ids=train, val_ids=val))
        start += size
    return folds


def aggregate_optimal_iteration(per_fold: Sequence[Mapping[int, float]]) -> int:
    """Rounded mean of each fold's highest-mAP iteration (ties: smallest)."""
    if not per_fold:
        raise ValueError("aggregate_optimal_iteration of an empty fold list")
    best_iterations = []
    for fold_idx, curve in enumerate(per_fold):
        if not curve:
            raise ValueError(f"fold {fold_idx}: empty mAP curve")
        best = min(curve.items(), key=lambda item: (-item[1], item[0]))
        best_iterations.append(best[0])
    mean = sum(best_iterations) / len(best_iterations)
    return math.floor(mean + 0.5)
