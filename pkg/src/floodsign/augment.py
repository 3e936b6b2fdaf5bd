"""Annotation-aware training-image augmentation.

Implements the augmentation recipe used for the detector's training set:
HSV jitter (hue shifted within +/-18 degrees, saturation and exposure
scaled within [0.66, 1.5]), horizontal flips on half the images (never
vertical), mosaic composition of four images on half the images, all
resized to the 320x320 network input.  Every op keeps the bounding-box
bookkeeping exact and is reproducible bit-for-bit from its RNG.

The hue range is degrees on a 0-360 wheel; "exposure" is the HSV value
channel, scaled multiplicatively.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from PIL import Image

from .geometry import BBox
from .selection import DetectionClass

NETWORK_SIZE = 320
MOSAIC_SPLIT_RANGE = (0.3, 0.7)
MOSAIC_MIN_KEPT_AREA = 0.25


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Row-major 8-bit RGB image wrapped around a (h, w, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) pixel array, got shape {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {self.pixels.dtype}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True, eq=False)
class AnnotatedSample:
    """An image plus its class-labelled bounding boxes."""

    image: ImageBuffer
    boxes: tuple[tuple[DetectionClass, BBox], ...]

    def __post_init__(self) -> None:
        w, h = self.image.width, self.image.height
        for cls, b in self.boxes:
            if b.x_min < 0 or b.y_min < 0 or b.x_max > w or b.y_max > h:
                raise ValueError(f"box {b.as_list()} outside image bounds {w}x{h}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AnnotatedSample):
            return NotImplemented
        return self.image == other.image and self.boxes == other.boxes


@dataclass(frozen=True)
class AugmentConfig:
    hue_delta_range: tuple[float, float] = (-18.0, 18.0)
    sat_range: tuple[float, float] = (0.66, 1.5)
    exposure_range: tuple[float, float] = (0.66, 1.5)
    hflip_prob: float = 0.5
    mosaic_prob: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        for name, prob in (("hflip_prob", self.hflip_prob), ("mosaic_prob", self.mosaic_prob)):
            if not (0.0 <= prob <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {prob}")
        for name, (lo, hi) in (
            ("hue_delta_range", self.hue_delta_range),
            ("sat_range", self.sat_range),
            ("exposure_range", self.exposure_range),
        ):
            if lo > hi:
                raise ValueError(f"{name} must be (lo, hi) with lo <= hi, got ({lo}, {hi})")


def hflip(sample: AnnotatedSample) -> AnnotatedSample:
    """Mirror the image left-right and reflect every box across the y axis."""
    w = sample.image.width
    flipped = np.ascontiguousarray(sample.image.pixels[:, ::-1, :])
    boxes = tuple(
        (cls, BBox(w - b.x_max, b.y_min, w - b.x_min, b.y_max)) for cls, b in sample.boxes
    )
    return AnnotatedSample(image=ImageBuffer(flipped), boxes=boxes)


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Vectorized RGB -> HSV: input floats in [0, 1], hue in degrees [0, 360)."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)

    safe_c = np.where(c > 0, c, 1.0)
    h = np.zeros_like(v)
    h = np.where((c > 0) & (v == r), ((g - b) / safe_c) % 6.0, h)
    h = np.where((c > 0) & (v == g) & (v != r), (b - r) / safe_c + 2.0, h)
    h = np.where((c > 0) & (v == b) & (v != r) & (v != g), (r - g) / safe_c + 4.0, h)
    return np.stack([h * 60.0, s, v], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Vectorized HSV -> RGB inverse of :func:`rgb_to_hsv`."""
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    h6 = (h % 360.0) / 60.0
    c = v * s
    x = c * (1.0 - np.abs(h6 % 2.0 - 1.0))
    m = v - c

    sector = np.floor(h6).astype(int) % 6
    zeros = np.zeros_like(c)
    r = np.choose(sector, [c, x, zeros, zeros, x, c])
    g = np.choose(sector, [x, c, c, x, zeros, zeros])
    b = np.choose(sector, [zeros, zeros, x, c, c, x])
    return np.stack([r + m, g + m, b + m], axis=-1)


def apply_hsv(
    image: ImageBuffer, hue_delta: float, sat_factor: float, val_factor: float
) -> ImageBuffer:
    """Shift hue (wrapping mod 360) and scale saturation/value, clamped to [0, 1]."""
    hsv = rgb_to_hsv(image.pixels.astype(np.float64) / 255.0)
    hsv[..., 0] = (hsv[..., 0] + hue_delta) % 360.0
    hsv[..., 1] = np.clip(hsv[..., 1] * sat_factor, 0.0, 1.0)
    hsv[..., 2] = np.clip(hsv[..., 2] * val_factor, 0.0, 1.0)
    rgb = np.clip(np.rint(hsv_to_rgb(hsv) * 255.0), 0, 255).astype(np.uint8)
    return ImageBuffer(rgb)


def hsv_jitter(
    image: ImageBuffer, rng: np.random.Generator, config: AugmentConfig = AugmentConfig()
) -> ImageBuffer:
    """Randomized HSV shift; dimensions (and any annotations) are untouched."""
    hue_delta = rng.uniform(*config.hue_delta_range)
    sat_factor = rng.uniform(*config.sat_range)
    val_factor = rng.uniform(*config.exposure_range)
    return apply_hsv(image, hue_delta, sat_factor, val_factor)


def _resize_pixels(pixels: np.ndarray, width: int, height: int) -> np.ndarray:
    if pixels.shape[1] == width and pixels.shape[0] == height:
        return pixels.copy()
    resized = Image.fromarray(pixels).resize((width, height), Image.BILINEAR)
    return np.asarray(resized, dtype=np.uint8)


def _clip_box(b: BBox, x0: float, y0: float, x1: float, y1: float) -> BBox | None:
    cx0 = max(b.x_min, x0)
    cy0 = max(b.y_min, y0)
    cx1 = min(b.x_max, x1)
    cy1 = min(b.y_max, y1)
    if cx0 >= cx1 or cy0 >= cy1:
        return None
    return BBox(cx0, cy0, cx1, cy1)


def _place_quadrant_boxes(
    boxes: Sequence[tuple[DetectionClass, BBox]],
    src_w: int,
    src_h: int,
    dx: float,
    dy: float,
    qw: float,
    qh: float,
) -> list[tuple[DetectionClass, BBox]]:
    """Scale boxes into a quadrant, clip to it, and drop slivers.

    A box keeps its label; it is dropped when clipping leaves less than 25%
    of its scaled area.
    """
    sx, sy = qw / src_w, qh / src_h
    placed: list[tuple[DetectionClass, BBox]] = []
    for cls, b in boxes:
        scaled = BBox(b.x_min * sx + dx, b.y_min * sy + dy, b.x_max * sx + dx, b.y_max * sy + dy)
        clipped = _clip_box(scaled, dx, dy, dx + qw, dy + qh)
        if clipped is None or clipped.area < MOSAIC_MIN_KEPT_AREA * scaled.area:
            continue
        placed.append((cls, clipped))
    return placed


def mosaic(
    samples: Sequence[AnnotatedSample],
    rng: np.random.Generator,
    *,
    canvas: int = NETWORK_SIZE,
    split: tuple[int, int] | None = None,
) -> AnnotatedSample:
    """Compose four samples into one canvas split at a random interior point.

    The split point is drawn uniformly from the central [0.3, 0.7] band of
    the canvas (integer pixels); ``split`` forces it, e.g. for tests.  The
    inputs fill the top-left, top-right, bottom-left, and bottom-right
    quadrants in order.
    """
    if len(samples) != 4:
        raise ValueError(f"mosaic needs exactly 4 samples, got {len(samples)}")
    if split is None:
        lo = int(round(MOSAIC_SPLIT_RANGE[0] * canvas))
        hi = int(round(MOSAIC_SPLIT_RANGE[1] * canvas))
        cx = int(rng.integers(lo, hi + 1))
        cy = int(rng.integers(lo, hi + 1))
    else:
        cx, cy = split
    if not (0 < cx < canvas and 0 < cy < canvas):
        raise ValueError(f"split point ({cx}, {cy}) outside canvas {canvas}")

    quadrants = (
        (0, 0, cx, cy),
        (cx, 0, canvas - cx, cy),
        (0, cy, cx, canvas - cy),
        (cx, cy, canvas - cx, canvas - cy),
    )
    out = np.zeros((canvas, canvas, 3), dtype=np.uint8)
    boxes: list[tuple[DetectionClass, BBox]] = []
    for sample, (dx, dy, qw, qh) in zip(samples, quadrants):
        out[dy : dy + qh, dx : dx + qw] = _resize_pixels(sample.image.pixels, qw, qh)
        boxes.extend(
            _place_quadrant_boxes(
                sample.boxes, sample.image.width, sample.image.height, dx, dy, qw, qh
            )
        )
    return AnnotatedSample(image=ImageBuffer(out), boxes=tuple(boxes))


def resize_to_network(
    sample: AnnotatedSample, target: tuple[int, int] = (NETWORK_SIZE, NETWORK_SIZE)
) -> AnnotatedSample:
    """Bilinear resample to the network input size, scaling boxes per axis."""
    tw, th = target
    sx, sy = tw / sample.image.width, th / sample.image.height
    pixels = _resize_pixels(sample.image.pixels, tw, th)
    boxes = tuple((cls, b.scale(sx, sy)) for cls, b in sample.boxes)
    return AnnotatedSample(image=ImageBuffer(pixels), boxes=boxes)


def augment_pipeline(
    samples: Sequence[AnnotatedSample],
    config: AugmentConfig,
    rng: np.random.Generator,
    op_log: list[str] | None = None,
) -> AnnotatedSample:
    """Full augmentation chain for one output sample.

    Mosaic fires with probability ``mosaic_prob`` and consumes the first
    four samples; otherwise the first sample passes through.  A horizontal
    flip then fires with probability ``hflip_prob``, HSV jitter always
    applies, and the result is resized to the network input.  The RNG draw
    order is fixed, so a given seed reproduces the output byte for byte.
    """
    if not samples:
        raise ValueError("augment_pipeline needs at least one sample")

    def log(op: str) -> None:
        if op_log is not None:
            op_log.append(op)

    if rng.random() < config.mosaic_prob:
        sample = mosaic(samples[:4], rng)
        log("mosaic")
    else:
        sample = samples[0]
    if rng.random() < config.hflip_prob:
        sample = hflip(sample)
        log("hflip")
    jittered = hsv_jitter(sample.image, rng, config)
    log("hsv_jitter")
    sample = AnnotatedSample(image=jittered, boxes=sample.boxes)
    log("resize")
    return resize_to_network(sample)


def rng_for_sample(seed: int, sample_index: int) -> np.random.Generator:
    """Per-sample generator so batch augmentation stays deterministic."""
    return np.random.default_rng(np.random.SeedSequence([seed, sample_index]))
