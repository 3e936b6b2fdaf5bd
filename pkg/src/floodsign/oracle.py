"""Synthetic scene generator with exact ground truth.

Renders fronto-parallel stop-sign scenes through an ideal pinhole camera
and emits the photo records a perfect detector would produce, together
with the exact geometry.  A vertical span of L inches at distance d
projects to focal_px * L / d pixels.  This is the independent oracle used
to validate the measurement pipeline: continuous boxes must round-trip to
the true water level, and integer quantization must stay within the
analytic per-pixel error bound.

No pixel raster is produced; the estimator consumes detections, not
pixels.  The camera's optical axis sits at the primary sign's center
height, which fixes where boxes land in the frame without affecting any
measured ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError
from .geometry import BBox, LatLon
from .selection import Detection, DetectionClass, Phase, PhotoRecord

POLE_WIDTH_IN = 3.0
DEFAULT_JITTER_PX = 1.0  # conventional magnitude when edge jitter is enabled


@dataclass(frozen=True)
class CameraSpec:
    focal_px: float = 800.0
    distance_in: float = 400.0
    image_width: int = 1280
    image_height: int = 1280
    lateral_offset_in: float = 0.0

    def __post_init__(self) -> None:
        if self.focal_px <= 0:
            raise ValueError(f"focal_px must be > 0, got {self.focal_px}")
        if self.distance_in <= 0:
            raise ValueError(f"distance_in must be > 0, got {self.distance_in}")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")


@dataclass(frozen=True)
class SceneSpec:
    """One photographed scene: sign geometry, water level, and camera."""

    sign_bottom_height_in: float
    camera: CameraSpec = CameraSpec()
    sign_height_in: float = 30.0
    water_level_in: float = 0.0
    pole_total_in: float | None = None
    quantize: bool = False
    jitter_px: float = 0.0
    extra_signs: tuple[tuple[float, float], ...] = ()
    photo_id: str = "scene"
    phase: Phase = Phase.POST_FLOOD
    location: LatLon = LatLon(0.0, 0.0)

    def __post_init__(self) -> None:
        if self.sign_height_in <= 0:
            raise ValueError(f"sign_height_in must be > 0, got {self.sign_height_in}")
        if self.sign_bottom_height_in < 0:
            raise ValueError(
                f"sign_bottom_height_in must be >= 0, got {self.sign_bottom_height_in}"
            )
        top = self.sign_bottom_height_in + self.sign_height_in
        if not (0.0 <= self.water_level_in < top):
            raise ValueError(
                f"water_level_in must be in [0, {top}), got {self.water_level_in}"
            )
        if self.pole_total_in is not None and self.pole_total_in < self.sign_bottom_height_in:
            raise ValueError("pole_total_in cannot be shorter than the sign bottom height")
        if self.jitter_px < 0:
            raise ValueError(f"jitter_px must be >= 0, got {self.jitter_px}")

    @property
    def visible_pole_in(self) -> float:
        return max(0.0, self.sign_bottom_height_in - self.water_level_in)


@dataclass(frozen=True)
class SceneTruth:
    """Exact continuous geometry of the primary sign in a rendered scene."""

    visible_pole_in: float
    sign_bbox: BBox
    pole_bbox: BBox | None

    def true_depth_vs(self, pre: "SceneTruth") -> float:
        return pre.visible_pole_in - self.visible_pole_in


def _project_sign(
    spec: SceneSpec, distance_in: float, lateral_offset_in: float
) -> tuple[BBox, BBox | None]:
    """Continuous sign and pole boxes for one sign at the given pose."""
    cam = spec.camera
    axis_h = spec.sign_bottom_height_in + spec.sign_height_in / 2.0
    cx = cam.image_width / 2.0
    cy = cam.image_height / 2.0
    scale = cam.focal_px / distance_in

    def y_px(height_in: float) -> float:
        return cy + scale * (axis_h - height_in)

    x_center = cx + scale * lateral_offset_in
    sign_half_w = scale * spec.sign_height_in / 2.0  # sign face is square
    sign_bbox = BBox(
        x_center - sign_half_w,
        y_px(spec.sign_bottom_height_in + spec.sign_height_in),
        x_center + sign_half_w,
        y_px(spec.sign_bottom_height_in),
    )

    pole_bbox: BBox | None = None
    if spec.visible_pole_in > 0:
        pole_half_w = scale * POLE_WIDTH_IN / 2.0
        pole_bbox = BBox(
            x_center - pole_half_w,
            y_px(spec.sign_bottom_height_in),
            x_center + pole_half_w,
            y_px(spec.water_level_in),
        )
    return sign_bbox, pole_bbox


def _check_bounds(bbox: BBox, spec: SceneSpec, what: str) -> None:
    cam = spec.camera
    if bbox.x_min < 0 or bbox.y_min < 0 or bbox.x_max > cam.image_width or bbox.y_max > cam.image_height:
        raise GeometryError(
            f"{what} projects outside the {cam.image_width}x{cam.image_height} image: "
            f"{bbox.as_list()}; enlarge the image or move the camera back"
        )


def _degrade(bbox: BBox, spec: SceneSpec, rng: np.random.Generator | None) -> BBox | None:
    """Apply edge jitter and/or integer quantization; None if degenerate."""
    edges = bbox.as_list()
    if spec.jitter_px > 0:
        if rng is None:
            raise ValueError("jitter_px > 0 requires an rng")
        edges = [e + rng.uniform(-spec.jitter_px, spec.jitter_px) for e in edges]
        edges[0] = min(max(edges[0], 0.0), spec.camera.image_width)
        edges[2] = min(max(edges[2], 0.0), spec.camera.image_width)
        edges[1] = min(max(edges[1], 0.0), spec.camera.image_height)
        edges[3] = min(max(edges[3], 0.0), spec.camera.image_height)
    if spec.quantize:
        edges = [float(round(e)) for e in edges]
    if edges[0] >= edges[2] or edges[1] >= edges[3]:
        return None
    return BBox(*edges)


def render_scene(
    spec: SceneSpec, rng: np.random.Generator | None = None
) -> tuple[PhotoRecord, SceneTruth]:
    """Produce the ideal detector output and exact truth for one scene.

    The primary sign sits at the camera distance/offset from the spec;
    ``extra_signs`` adds further (distance_in, lateral_offset_in) signs
    sharing the same geometry and water level.  All detections carry
    confidence 1.0.  A fully submerged pole yields no pole detection.
    """
    poses = [(spec.camera.distance_in, spec.camera.lateral_offset_in), *spec.extra_signs]
    detections: list[Detection] = []
    truth: SceneTruth | None = None
    for i, (distance_in, lateral_offset_in) in enumerate(poses):
        sign_bbox, pole_bbox = _project_sign(spec, distance_in, lateral_offset_in)
        _check_bounds(sign_bbox, spec, f"sign {i}")
        if pole_bbox is not None:
            _check_bounds(pole_bbox, spec, f"pole {i}")
        if i == 0:
            truth = SceneTruth(
                visible_pole_in=spec.visible_pole_in,
                sign_bbox=sign_bbox,
                pole_bbox=pole_bbox,
            )
        degraded_sign = _degrade(sign_bbox, spec, rng)
        if degraded_sign is None:
            raise GeometryError(f"sign {i} degenerates under quantization; too small or far")
        detections.append(Detection(DetectionClass.STOP_SIGN, degraded_sign, 1.0))
        if pole_bbox is not None:
            degraded_pole = _degrade(pole_bbox, spec, rng)
            if degraded_pole is not None:
                detections.append(Detection(DetectionClass.POLE, degraded_pole, 1.0))

    assert truth is not None
    record = PhotoRecord(
        photo_id=spec.photo_id,
        location=spec.location,
        phase=spec.phase,
        image_width=spec.camera.image_width,
        image_height=spec.camera.image_height,
        detections=tuple(detections),
    )
    return record, truth


def generate_pair(
    pre_spec: SceneSpec,
    post_spec: SceneSpec,
    rng: np.random.Generator | None = None,
) -> tuple[PhotoRecord, PhotoRecord, float]:
    """Render a pre/post photo pair of the same sign; truth is the post water level."""
    if pre_spec.sign_height_in != post_spec.sign_height_in or (
        pre_spec.sign_bottom_height_in != post_spec.sign_bottom_height_in
    ):
        raise ValueError("pre and post scenes must describe the same sign geometry")
    if pre_spec.water_level_in != 0.0:
        raise ValueError("pre-flood scene must have water level 0")
    if pre_spec.location != post_spec.location:
        raise ValueError("pre and post scenes must share a location")
    if pre_spec.phase is not Phase.PRE_FLOOD or post_spec.phase is not Phase.POST_FLOOD:
        raise ValueError("pre/post scene phases must be pre-flood and post-flood")
    pre_record, _ = render_scene(pre_spec, rng)
    post_record, _ = render_scene(post_spec, rng)
    return pre_record, post_record, post_spec.water_level_in
