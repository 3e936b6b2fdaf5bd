"""Pixel-to-inch calibration and depth arithmetic.

A stop sign has a standardized physical height, so its bounding box gives a
pixels-per-inch ratio for everything co-planar with the sign face.  Applying
that ratio to the pole's bounding box yields the visible pole length in
inches, and the drop in visible pole length between a pre-flood and a
post-flood photo of the same sign is the flood depth at that location.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import CoordError, GeometryError

DEFAULT_SIGN_HEIGHT_IN = 30.0


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel rectangle; y grows downward (image frame).

    Coordinates are continuous.  Integer pixel indices should be widened to
    the interval they cover before constructing a box: a run of pixels
    ``first..last`` spans ``[first, last + 1)``, which
    :meth:`from_pixel_indices` does for you.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise GeometryError(
                f"degenerate bbox: ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @classmethod
    def from_pixel_indices(cls, x_first: int, y_first: int, x_last: int, y_last: int) -> "BBox":
        """Build a box from inclusive integer pixel indices."""
        return cls(float(x_first), float(y_first), float(x_last + 1), float(y_last + 1))

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def x_center(self) -> float:
        return (self.x_min + self.x_max) / 2.0

    @property
    def y_center(self) -> float:
        return (self.y_min + self.y_max) / 2.0

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def scale(self, sx: float, sy: float | None = None) -> "BBox":
        """Scale about the image origin; ``sy`` defaults to ``sx``."""
        if sy is None:
            sy = sx
        return BBox(self.x_min * sx, self.y_min * sy, self.x_max * sx, self.y_max * sy)

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class LatLon:
    """WGS84 geographic coordinates in degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat <= 90.0):
            raise CoordError(f"latitude out of range: {self.lat}")
        if not (-180.0 <= self.lon <= 180.0):
            raise CoordError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class SignSpec:
    """Physical size of the reference sign face.

    MUTCD stop signs are 30 in tall on single-lane residential roads and
    36 in on multi-lane roads; 30 in is the default.
    """

    physical_height_in: float = DEFAULT_SIGN_HEIGHT_IN

    def __post_init__(self) -> None:
        if self.physical_height_in <= 0:
            raise GeometryError(f"sign height must be > 0, got {self.physical_height_in}")


@dataclass(frozen=True)
class SignObservation:
    """A resolved (sign, pole) pair from one photo.

    ``pole_bbox`` is None when the pole is fully submerged (no visible pole
    detection), in which case ``pole_length_in`` is 0.
    """

    photo_id: str
    sign_bbox: BBox
    pole_bbox: BBox | None
    ppi: float
    pole_length_in: float
    multi_sign_scene: bool = False


class DepthFlag(enum.Enum):
    """Quality flags attached to a depth estimate.

    NEGATIVE_RAW: post-flood pole measured longer than pre-flood; the raw
    depth was negative and was clamped to 0.
    LOW_CONFIDENCE: baseline pairing was ambiguous (second-closest baseline
    within twice the distance of the closest).
    MULTI_SIGN_SCENE: at least one of the paired photos contained more than
    one stop-sign detection after confidence filtering.
    """

    NEGATIVE_RAW = "negative_raw"
    LOW_CONFIDENCE = "low_confidence"
    MULTI_SIGN_SCENE = "multi_sign_scene"


@dataclass(frozen=True)
class DepthEstimate:
    """Flood depth at one sign location from a paired pre/post observation."""

    location: LatLon
    pre_photo_id: str
    post_photo_id: str
    pre_pole_in: float
    post_pole_in: float
    depth_raw_in: float
    depth_in: float
    flags: frozenset[DepthFlag] = field(default_factory=frozenset)


def ppi_ratio(sign_bbox: BBox, spec: SignSpec = SignSpec()) -> float:
    """Pixels-per-inch ratio implied by the sign bbox height."""
    if sign_bbox.height <= 0:
        raise GeometryError(f"sign bbox height must be > 0, got {sign_bbox.height}")
    if spec.physical_height_in <= 0:
        raise GeometryError(f"sign spec height must be > 0, got {spec.physical_height_in}")
    return sign_bbox.height / spec.physical_height_in


def pole_length_inches(pole_bbox: BBox | None, ppi: float) -> float:
    """Visible pole length in inches; a missing (fully submerged) pole is 0."""
    if ppi <= 0:
        raise GeometryError(f"ppi must be > 0, got {ppi}")
    if pole_bbox is None:
        return 0.0
    return pole_bbox.height / ppi


def quantization_error_bound_in(
    sign_height_px: float, pole_height_px: float, spec: SignSpec = SignSpec()
) -> float:
    """Worst-case pole-length change (inches) from snapping bbox edges to
    the integer pixel grid.

    Rounding moves each edge by at most half a pixel, so each bbox height
    changes by at most one pixel; to first order that shifts the measured
    length by h/S per pixel of pole error plus (P/S)(h/S) per pixel of sign
    error, where h is the physical sign height and S, P are the continuous
    pixel heights.  The bound is valid (not just first order) for S >= 2.
    """
    if sign_height_px <= 0:
        raise GeometryError(f"sign height must be > 0, got {sign_height_px}")
    h = spec.physical_height_in
    return 2.0 * h / sign_height_px + 2.0 * (pole_height_px / sign_height_px) * (
        h / sign_height_px
    )


def estimate_depth(
    pre: SignObservation,
    post: SignObservation,
    location: LatLon,
    extra_flags: frozenset[DepthFlag] = frozenset(),
) -> DepthEstimate:
    """Flood depth as the drop in visible pole length from pre to post.

    A negative raw depth (post pole longer than pre) is plausible under
    detection noise: it is clamped to 0 and flagged rather than rejected.
    """
    depth_raw = pre.pole_length_in - post.pole_length_in
    flags = set(extra_flags)
    if depth_raw < 0:
        flags.add(DepthFlag.NEGATIVE_RAW)
    if pre.multi_sign_scene or post.multi_sign_scene:
        flags.add(DepthFlag.MULTI_SIGN_SCENE)
    return DepthEstimate(
        location=location,
        pre_photo_id=pre.photo_id,
        post_photo_id=post.photo_id,
        pre_pole_in=pre.pole_length_in,
        post_pole_in=post.pole_length_in,
        depth_raw_in=depth_raw,
        depth_in=max(0.0, depth_raw),
        flags=frozenset(flags),
    )
