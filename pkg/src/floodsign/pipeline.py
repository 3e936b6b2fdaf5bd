"""End-to-end estimation and evaluation runs.

``run_estimate`` turns pre-flood photos into a baseline registry, builds an
observation per post-flood photo, pairs each with its nearest baseline, and
estimates depth; every post photo ends up either as a map feature or in the
unmapped list with a reason.  ``run_evaluate`` computes the detection and
depth metrics from saved detections, ground truths, and depth records.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .errors import (
    NoBaselineError,
    NoPoleError,
    NoSignError,
    UnusableBaselineError,
)
from .geometry import DepthEstimate, DepthFlag, SignSpec, estimate_depth
from .io import (
    PipelineConfig,
    load_eval_records,
    load_ground_truths,
    load_photos,
)
from .metrics import (
    GroundTruthBox,
    PoleLengthRecord,
    aggregate_optimal_iteration,
    average_precision,
    mae_depth_polesum,
    mae_depth_table,
    mae_pole,
    matched_ious,
    mean_ap,
)
from .registry import Registry, pair, pairing_is_ambiguous, register_baseline
from .selection import Detection, Phase, PhotoRecord, build_observation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SkippedPhoto:
    photo_id: str
    reason: str


@dataclass
class EstimateReport:
    """Result of one estimation run over pre and post photo sets."""

    estimates: list[DepthEstimate] = field(default_factory=list)
    unmapped: list[SkippedPhoto] = field(default_factory=list)
    baseline_issues: list[SkippedPhoto] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        ordered = sorted(self.estimates, key=lambda e: e.post_photo_id)
        return {
            "estimates": [
                {
                    "id": i,
                    "lat": est.location.lat,
                    "lon": est.location.lon,
                    "pre_photo_id": est.pre_photo_id,
                    "post_photo_id": est.post_photo_id,
                    "pre_pole_in": est.pre_pole_in,
                    "post_pole_in": est.post_pole_in,
                    "depth_raw_in": est.depth_raw_in,
                    "depth_in": est.depth_in,
                    "flags": sorted(f.value for f in est.flags),
                }
                for i, est in enumerate(ordered, start=1)
            ],
            "unmapped": [
                {"photo_id": s.photo_id, "reason": s.reason}
                for s in sorted(self.unmapped, key=lambda s: s.photo_id)
            ],
            "baseline_issues": [
                {"photo_id": s.photo_id, "reason": s.reason}
                for s in sorted(self.baseline_issues, key=lambda s: s.photo_id)
            ],
        }


def build_registry(
    pre_photos: Sequence[PhotoRecord], config: PipelineConfig
) -> tuple[Registry, list[SkippedPhoto]]:
    """Register a baseline per usable pre-flood photo; report the rest."""
    spec = SignSpec(config.sign_height_in)
    registry = Registry(pairing_radius_m=config.pairing_radius_m)
    issues: list[SkippedPhoto] = []
    for photo in pre_photos:
        if photo.phase is not Phase.PRE_FLOOD:
            issues.append(SkippedPhoto(photo.photo_id, "not a pre-flood photo"))
            continue
        try:
            obs = build_observation(photo, spec, config.min_confidence)
            register_baseline(registry, photo, obs)
        except NoSignError:
            issues.append(SkippedPhoto(photo.photo_id, "no stop sign detected"))
        except NoPoleError:
            issues.append(SkippedPhoto(photo.photo_id, "no pole detected"))
        except UnusableBaselineError:
            issues.append(SkippedPhoto(photo.photo_id, "zero visible pole in baseline"))
    registry.freeze()
    return registry, issues


def estimate_from_records(
    pre_photos: Sequence[PhotoRecord] | None,
    post_photos: Sequence[PhotoRecord],
    config: PipelineConfig,
    registry: Registry | None = None,
) -> EstimateReport:
    """Estimate depth for every post photo against the pre-flood baselines.

    Either ``pre_photos`` or an already-built ``registry`` must be given.
    A post photo whose sign is found but whose pole is gone reads as a
    fully submerged pole (depth at least the full baseline pole length).
    """
    report = EstimateReport()
    if registry is None:
        if pre_photos is None:
            raise ValueError("need pre photos or a registry")
        registry, report.baseline_issues = build_registry(pre_photos, config)
    spec = SignSpec(config.sign_height_in)

    for photo in post_photos:
        if photo.phase is not Phase.POST_FLOOD:
            report.unmapped.append(SkippedPhoto(photo.photo_id, "not a post-flood photo"))
            continue
        try:
            obs = build_observation(
                photo, spec, config.min_confidence, missing_pole="submerged"
            )
        except NoSignError:
            report.unmapped.append(SkippedPhoto(photo.photo_id, "no stop sign detected"))
            continue
        try:
            baseline = pair(registry, photo)
        except NoBaselineError:
            report.unmapped.append(
                SkippedPhoto(
                    photo.photo_id, f"no baseline within {registry.pairing_radius_m} m"
                )
            )
            continue
        extra = (
            frozenset({DepthFlag.LOW_CONFIDENCE})
            if pairing_is_ambiguous(registry, photo)
            else frozenset()
        )
        report.estimates.append(
            estimate_depth(baseline.observation, obs, photo.location, extra_flags=extra)
        )
    return report


def run_estimate(
    pre_path: str | Path | None,
    post_path: str | Path,
    config: PipelineConfig,
    registry: Registry | None = None,
) -> EstimateReport:
    pre_photos = load_photos(pre_path) if pre_path is not None else None
    post_photos = load_photos(post_path)
    return estimate_from_records(pre_photos, post_photos, config, registry=registry)


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class EvalReport:
    """Aggregate detection and depth metrics; missing inputs omit metrics."""

    per_class_ap: dict[str, float] | None = None
    map_score: float | None = None
    mean_matched_iou: float | None = None
    mae_pole_pre_in: float | None = None
    mae_pole_post_in: float | None = None
    mae_depth_table_in: float | None = None
    mae_depth_polesum_in: float | None = None
    optimal_iteration: int | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for key, value in (
            ("per_class_ap", self.per_class_ap),
            ("map", self.map_score),
            ("mean_matched_iou", self.mean_matched_iou),
            ("mae_pole_pre_in", self.mae_pole_pre_in),
            ("mae_pole_post_in", self.mae_pole_post_in),
            ("mae_depth_table_in", self.mae_depth_table_in),
            ("mae_depth_polesum_in", self.mae_depth_polesum_in),
            ("optimal_iteration", self.optimal_iteration),
        ):
            if value is not None:
                out[key] = value
        out["warnings"] = list(self.warnings)
        return out


def detections_from_photos(
    photos: Sequence[PhotoRecord],
) -> list[tuple[Detection, str]]:
    return [(det, photo.photo_id) for photo in photos for det in photo.detections]


def pole_record_pairs(
    records: Sequence[PoleLengthRecord],
) -> list[tuple[PoleLengthRecord, PoleLengthRecord]]:
    """Pair pre/post pole records that share a sign_id."""
    by_sign: dict[str, dict[Phase, PoleLengthRecord]] = {}
    for r in records:
        if r.sign_id is None:
            continue
        by_sign.setdefault(r.sign_id, {})[r.phase] = r
    pairs = []
    for sign_id in sorted(by_sign):
        phases = by_sign[sign_id]
        if Phase.PRE_FLOOD in phases and Phase.POST_FLOOD in phases:
            pairs.append((phases[Phase.PRE_FLOOD], phases[Phase.POST_FLOOD]))
    return pairs


def evaluate_detections(
    dets: Sequence[tuple[Detection, str]],
    truths: Sequence[GroundTruthBox],
    config: PipelineConfig,
    report: EvalReport,
) -> None:
    classes = sorted({t.cls for t in truths} | {d.cls for d, _ in dets}, key=lambda c: c.value)
    if not classes:
        report.warnings.append("no detections or ground truths; AP metrics omitted")
        return
    per_class: dict[str, float] = {}
    ious: list[float] = []
    for cls in classes:
        cls_dets = [(d, pid) for d, pid in dets if d.cls is cls]
        cls_truths = [t for t in truths if t.cls is cls]
        if not cls_truths and cls_dets:
            report.warnings.append(f"class {cls.value}: detections but no ground truths; AP is 0")
        per_class[cls.value] = average_precision(cls_dets, cls_truths, config.iou_threshold)
        ious.extend(matched_ious(cls_dets, cls_truths, config.iou_threshold))
    report.per_class_ap = per_class
    report.map_score = mean_ap(per_class)
    if ious:
        report.mean_matched_iou = sum(ious) / len(ious)
    else:
        report.warnings.append("no matched detections; mean IoU omitted")


def run_evaluate(
    dets_path: str | Path | None,
    truths_path: str | Path | None,
    records_path: str | Path | None,
    config: PipelineConfig,
    curves: Sequence[Mapping[int, float]] | None = None,
) -> EvalReport:
    report = EvalReport()

    if dets_path is not None and truths_path is not None:
        dets = detections_from_photos(load_photos(dets_path))
        truths = load_ground_truths(truths_path)
        evaluate_detections(dets, truths, config, report)
    elif dets_path is not None or truths_path is not None:
        report.warnings.append("need both detections and truths for AP metrics; omitted")

    if records_path is not None:
        depth_records, pole_records = load_eval_records(records_path)
        if depth_records:
            report.mae_depth_table_in = mae_depth_table(depth_records)
        else:
            report.warnings.append("no depth records; table MAE omitted")
        pre = [r for r in pole_records if r.phase is Phase.PRE_FLOOD]
        post = [r for r in pole_records if r.phase is Phase.POST_FLOOD]
        if pre:
            report.mae_pole_pre_in = mae_pole(pre)
        else:
            report.warnings.append("no pre-flood pole records; pre MAE omitted")
        if post:
            report.mae_pole_post_in = mae_pole(post)
        else:
            report.warnings.append("no post-flood pole records; post MAE omitted")
        pairs = pole_record_pairs(pole_records)
        if pairs:
            report.mae_depth_polesum_in = mae_depth_polesum(pairs)
        else:
            report.warnings.append("no paired pole records; pole-sum MAE omitted")

    if curves:
        report.optimal_iteration = aggregate_optimal_iteration(curves)
    return report
