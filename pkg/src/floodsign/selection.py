"""Resolving one (sign, pole) observation out of a photo's detections.

A photo carries a single geolocation tag, so when several stop signs are
detected only one can be mapped: the largest sign bbox (closest to the
camera) wins, and among pole detections the one whose x center is closest
to the chosen sign's x center is taken as its pole.  All tie-breaks are
total orders so selection is deterministic and independent of detection
list order.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from .errors import GeometryError, NoPoleError, NoSignError
from .geometry import BBox, LatLon, SignObservation, SignSpec, pole_length_inches, ppi_ratio

logger = logging.getLogger(__name__)

DEFAULT_MIN_CONFIDENCE = 0.25


class DetectionClass(enum.Enum):
    STOP_SIGN = "stop_sign"
    POLE = "pole"


class Phase(enum.Enum):
    PRE_FLOOD = "pre"
    POST_FLOOD = "post"


@dataclass(frozen=True)
class Detection:
    """One predicted bounding box with its class and confidence."""

    cls: DetectionClass
    bbox: BBox
    confidence: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise GeometryError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class PhotoRecord:
    """One geotagged photo with its detections."""

    photo_id: str
    location: LatLon
    phase: Phase
    image_width: int
    image_height: int
    detections: tuple[Detection, ...]
    captured_at: str | None = None

    def __post_init__(self) -> None:
        if self.image_width <= 0 or self.image_height <= 0:
            raise GeometryError(
                f"image dimensions must be positive, got {self.image_width}x{self.image_height}"
            )
        for det in self.detections:
            b = det.bbox
            if b.x_min < 0 or b.y_min < 0 or b.x_max > self.image_width or b.y_max > self.image_height:
                raise GeometryError(
                    f"photo {self.photo_id}: detection bbox {b.as_list()} outside "
                    f"image bounds {self.image_width}x{self.image_height}"
                )


def select_primary_sign(detections: list[Detection] | tuple[Detection, ...]) -> Detection:
    """The stop sign with maximal bbox area.

    Ties break by higher confidence, then by smaller x_min.
    """
    signs = [d for d in detections if d.cls is DetectionClass.STOP_SIGN]
    if not signs:
        raise NoSignError("no stop sign detections")
    return min(signs, key=lambda d: (-d.bbox.area, -d.confidence, d.bbox.x_min))


def match_pole(sign: Detection, detections: list[Detection] | tuple[Detection, ...]) -> Detection:
    """The pole whose x center is closest to the sign's x center.

    Ties break by larger bbox height, then by smaller x_min.
    """
    poles = [d for d in detections if d.cls is DetectionClass.POLE]
    if not poles:
        raise NoPoleError("no pole detections")
    sign_cx = sign.bbox.x_center
    return min(
        poles,
        key=lambda d: (abs(d.bbox.x_center - sign_cx), -d.bbox.height, d.bbox.x_min),
    )


def build_observation(
    photo: PhotoRecord,
    spec: SignSpec = SignSpec(),
    min_confidence: float = DEFAULT_MIN_CONFIDENCE,
    *,
    missing_pole: str = "error",
) -> SignObservation:
    """Filter, select, and measure one observation from a photo.

    ``missing_pole`` controls what happens when a sign is found but no pole
    detection survives filtering: "error" raises NoPoleError (the default,
    for pre-flood baselines); "submerged" records a zero-length pole, the
    reading for a pole fully under water.
    """
    if missing_pole not in ("error", "submerged"):
        raise ValueError(f"missing_pole must be 'error' or 'submerged', got {missing_pole!r}")
    kept = [d for d in photo.detections if d.confidence >= min_confidence]
    sign = select_primary_sign(kept)
    n_signs = sum(1 for d in kept if d.cls is DetectionClass.STOP_SIGN)

    try:
        pole = match_pole(sign, kept)
    except NoPoleError:
        if missing_pole == "error":
            raise
        pole = None

    if pole is not None and pole.bbox.y_max <= sign.bbox.y_min:
        # A pole entirely above its sign is physically impossible; likely a
        # water reflection that the detector picked up.
        logger.warning(
            "photo %s: matched pole bbox lies entirely above the sign bbox",
            photo.photo_id,
        )

    ratio = ppi_ratio(sign.bbox, spec)
    pole_bbox = pole.bbox if pole is not None else None
    return SignObservation(
        photo_id=photo.photo_id,
        sign_bbox=sign.bbox,
        pole_bbox=pole_bbox,
        ppi=ratio,
        pole_length_in=pole_length_inches(pole_bbox, ratio),
        multi_sign_scene=n_signs > 1,
    )
