"""File formats and configuration.

Formats handled here:

* Photo records: JSON Lines, one object per line::

    {"photo_id": "p1", "lat": 49.05, "lon": -122.33, "phase": "pre",
     "width": 1280, "height": 1280, "captured_at": "2021-11-16T10:00:00Z",
     "detections": [{"class": "stop_sign", "confidence": 0.98,
                     "bbox": [x_min, y_min, x_max, y_max]}]}

  ``captured_at`` is optional.  Coordinates are WGS84 degrees; bbox
  coordinates are pixels with y growing downward.

* Darknet annotations: one ``class_id cx cy w h`` line per box, all values
  normalized to [0, 1]; class 0 is the stop sign, class 1 the pole.

* Ground-truth boxes: JSON Lines of
  ``{"photo_id": ..., "class": ..., "bbox": [...]}``.

* Depth/pole evaluation records: a single JSON object with optional
  ``depth_records`` and ``pole_records`` arrays (see the README).

* Registry: a single JSON object with ``pairing_radius_m`` and ``entries``.

* Flood map: RFC 7946 GeoJSON FeatureCollection of Point features, sorted
  by id, coordinates to 6 decimal places, byte-stable across runs.

* Config: flat ``key = value`` text; unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from PIL import Image

from .augment import AnnotatedSample, AugmentConfig, ImageBuffer
from .errors import ConfigError, CoordError, FormatError, GeometryError
from .geometry import BBox, DepthEstimate, LatLon, SignObservation
from .metrics import (
    DEFAULT_IOU_THRESHOLD,
    DEFAULT_K_FOLDS,
    DepthRecord,
    GroundTruthBox,
    PoleLengthRecord,
)
from .oracle import CameraSpec, SceneSpec
from .registry import DEFAULT_PAIRING_RADIUS_M, BaselineEntry, Registry
from .selection import DEFAULT_MIN_CONFIDENCE, Detection, DetectionClass, Phase, PhotoRecord

INCHES_PER_FOOT = 12.0
METERS_PER_INCH = 0.0254

DARKNET_CLASS_IDS = {DetectionClass.STOP_SIGN: 0, DetectionClass.POLE: 1}
DARKNET_CLASSES = {v: k for k, v in DARKNET_CLASS_IDS.items()}


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class PipelineConfig:
    sign_height_in: float = 30.0
    min_confidence: float = DEFAULT_MIN_CONFIDENCE
    pairing_radius_m: float = DEFAULT_PAIRING_RADIUS_M
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    k_folds: int = DEFAULT_K_FOLDS
    seed: int = 0
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    def __post_init__(self) -> None:
        if self.sign_height_in <= 0:
            raise ConfigError(f"sign_height_in must be > 0, got {self.sign_height_in}")
        if not (0.0 <= self.min_confidence <= 1.0):
            raise ConfigError(f"min_confidence must be in [0, 1], got {self.min_confidence}")
        if self.pairing_radius_m <= 0:
            raise ConfigError(f"pairing_radius_m must be > 0, got {self.pairing_radius_m}")
        if not (0.0 < self.iou_threshold <= 1.0):
            raise ConfigError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")
        if self.k_folds < 1:
            raise ConfigError(f"k_folds must be >= 1, got {self.k_folds}")


def _parse_pair(value: str, key: str) -> tuple[float, float]:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected 'lo,hi', got {value!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    return lo, hi


_SCALAR_KEYS: dict[str, type] = {
    "sign_height_in": float,
    "min_confidence": float,
    "pairing_radius_m": float,
    "iou_threshold": float,
    "k_folds": int,
    "seed": int,
    "hflip_prob": float,
    "mosaic_prob": float,
}
_PAIR_KEYS = ("hue_delta_range", "sat_range", "exposure_range")


def parse_config_text(text: str, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    """Parse flat ``key = value`` config text; ``overrides`` win over the file."""
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _SCALAR_KEYS:
            try:
                values[key] = _SCALAR_KEYS[key](value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {key}: {exc}") from exc
        elif key in _PAIR_KEYS:
            values[key] = _parse_pair(value, key)
        else:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return build_config(values)


def build_config(values: dict[str, Any]) -> PipelineConfig:
    aug_fields = {k: values[k] for k in ("hflip_prob", "mosaic_prob", *_PAIR_KEYS) if k in values}
    if "seed" in values:
        aug_fields["seed"] = values["seed"]
    try:
        augment = AugmentConfig(**aug_fields)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    pipeline_fields = {
        k: values[k]
        for k in ("sign_height_in", "min_confidence", "pairing_radius_m", "iou_threshold", "k_folds", "seed")
        if k in values
    }
    return PipelineConfig(augment=augment, **pipeline_fields)


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    if path is None:
        return build_config(dict(overrides or {}))
    return parse_config_text(Path(path).read_text(encoding="utf-8"), overrides)


# ---------------------------------------------------------------------------
# Photo records (JSONL)


def _bbox_from_list(values: Any) -> BBox:
    if not isinstance(values, (list, tuple)) or len(values) != 4:
        raise FormatError(f"bbox must be [x_min, y_min, x_max, y_max], got {values!r}")
    return BBox(*(float(v) for v in values))


def photo_record_from_dict(obj: dict[str, Any]) -> PhotoRecord:
    try:
        detections = tuple(
            Detection(
                cls=DetectionClass(d["class"]),
                bbox=_bbox_from_list(d["bbox"]),
                confidence=float(d["confidence"]),
            )
            for d in obj.get("detections", [])
        )
        return PhotoRecord(
            photo_id=str(obj["photo_id"]),
            location=LatLon(float(obj["lat"]), float(obj["lon"])),
            phase=Phase(obj["phase"]),
            image_width=int(obj["width"]),
            image_height=int(obj["height"]),
            detections=detections,
            captured_at=obj.get("captured_at"),
        )
    except KeyError as exc:
        raise FormatError(f"missing field {exc.args[0]!r}") from exc
    except (ValueError, GeometryError, CoordError) as exc:
        raise FormatError(str(exc)) from exc


def photo_record_to_dict(record: PhotoRecord) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "photo_id": record.photo_id,
        "lat": record.location.lat,
        "lon": record.location.lon,
        "phase": record.phase.value,
        "width": record.image_width,
        "height": record.image_height,
        "detections": [
            {"class": d.cls.value, "confidence": d.confidence, "bbox": d.bbox.as_list()}
            for d in record.detections
        ],
    }
    if record.captured_at is not None:
        obj["captured_at"] = record.captured_at
    return obj


def load_photos(path: str | Path) -> list[PhotoRecord]:
    """Load photo records from JSONL; every problem names its line number."""
    path = Path(path)
    records: list[PhotoRecord] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            try:
                record = photo_record_from_dict(obj)
            except FormatError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            if record.photo_id in seen:
                raise FormatError(
                    f"{path}:{lineno}: duplicate photo_id {record.photo_id!r} "
                    f"(first seen on line {seen[record.photo_id]})"
                )
            seen[record.photo_id] = lineno
            records.append(record)
    return records


def save_photos(records: Iterable[PhotoRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(photo_record_to_dict(record), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Darknet annotations


def load_darknet_annotations(
    txt_path: str | Path, image_w: int, image_h: int
) -> list[tuple[DetectionClass, BBox]]:
    """Parse normalized center-format lines into pixel corner boxes."""
    path = Path(txt_path)
    boxes: list[tuple[DetectionClass, BBox]] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 5:
                raise FormatError(f"{path}:{lineno}: expected 'class cx cy w h', got {line!r}")
            try:
                class_id = int(parts[0])
                cx, cy, w, h = (float(p) for p in parts[1:])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            if class_id not in DARKNET_CLASSES:
                raise FormatError(f"{path}:{lineno}: unknown class id {class_id}")
            for name, v in (("cx", cx), ("cy", cy), ("w", w), ("h", h)):
                if not (0.0 <= v <= 1.0):
                    raise FormatError(f"{path}:{lineno}: {name}={v} outside [0, 1]")
            boxes.append(
                (
                    DARKNET_CLASSES[class_id],
                    BBox(
                        (cx - w / 2.0) * image_w,
                        (cy - h / 2.0) * image_h,
                        (cx + w / 2.0) * image_w,
                        (cy + h / 2.0) * image_h,
                    ),
                )
            )
    return boxes


def save_darknet_annotations(
    boxes: Sequence[tuple[DetectionClass, BBox]], txt_path: str | Path, image_w: int, image_h: int
) -> None:
    """Write boxes in normalized center format at full float precision."""
    lines = []
    for cls, b in boxes:
        cx = (b.x_min + b.x_max) / 2.0 / image_w
        cy = (b.y_min + b.y_max) / 2.0 / image_h
        w = b.width / image_w
        h = b.height / image_h
        lines.append(f"{DARKNET_CLASS_IDS[cls]} {cx!r} {cy!r} {w!r} {h!r}")
    Path(txt_path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


# ---------------------------------------------------------------------------
# Ground truths and evaluation records


def load_ground_truths(path: str | Path) -> list[GroundTruthBox]:
    path = Path(path)
    truths: list[GroundTruthBox] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                truths.append(
                    GroundTruthBox(
                        photo_id=str(obj["photo_id"]),
                        cls=DetectionClass(obj["class"]),
                        bbox=_bbox_from_list(obj["bbox"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, ValueError, GeometryError, FormatError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return truths


def load_eval_records(
    path: str | Path,
) -> tuple[list[DepthRecord], list[PoleLengthRecord]]:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON: {exc}") from exc
    try:
        depth_records = [
            DepthRecord(
                id=str(r["id"]),
                location_label=str(r.get("location", "")),
                detected_depth_in=float(r["detected_depth_in"]),
                ground_truth_depth_in=float(r["ground_truth_depth_in"]),
            )
            for r in obj.get("depth_records", [])
        ]
        pole_records = [
            PoleLengthRecord(
                photo_id=str(r["photo_id"]),
                detected_in=float(r["detected_in"]),
                truth_in=float(r["truth_in"]),
                phase=Phase(r["phase"]),
                sign_id=r.get("sign_id"),
            )
            for r in obj.get("pole_records", [])
        ]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return depth_records, pole_records


# ---------------------------------------------------------------------------
# Synthetic scene specs


def load_scene_pairs(path: str | Path) -> list[tuple[str, SceneSpec, SceneSpec]]:
    """Parse a scenes JSON file into (id, pre_spec, post_spec) triples.

    Schema: ``{"pairs": [{"id", "lat", "lon", "sign_bottom_height_in",
    "water_level_in", "sign_height_in"?, "quantize"?, "camera"?,
    "pre_camera"?}]}`` where a camera object may set ``focal_px``,
    ``distance_in``, ``image_width``, ``image_height``, and
    ``lateral_offset_in``.
    """
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON: {exc}") from exc

    def camera_from(d: dict[str, Any] | None) -> CameraSpec:
        return CameraSpec(**d) if d else CameraSpec()

    pairs: list[tuple[str, SceneSpec, SceneSpec]] = []
    try:
        for entry in obj["pairs"]:
            pair_id = str(entry["id"])
            common = {
                "sign_bottom_height_in": float(entry["sign_bottom_height_in"]),
                "sign_height_in": float(entry.get("sign_height_in", 30.0)),
                "quantize": bool(entry.get("quantize", False)),
                "location": LatLon(float(entry["lat"]), float(entry["lon"])),
            }
            post_camera = camera_from(entry.get("camera"))
            pre_camera = camera_from(entry.get("pre_camera", entry.get("camera")))
            pre_spec = SceneSpec(
                camera=pre_camera,
                water_level_in=0.0,
                photo_id=f"pre-{pair_id}",
                phase=Phase.PRE_FLOOD,
                **common,
            )
            post_spec = SceneSpec(
                camera=post_camera,
                water_level_in=float(entry["water_level_in"]),
                photo_id=f"post-{pair_id}",
                phase=Phase.POST_FLOOD,
                **common,
            )
            pairs.append((pair_id, pre_spec, post_spec))
    except (KeyError, TypeError, ValueError, CoordError) as exc:
        raise FormatError(f"{path}: bad scene entry: {exc}") from exc
    return pairs


# ---------------------------------------------------------------------------
# Registry JSON


def registry_to_dict(registry: Registry) -> dict[str, Any]:
    return {
        "pairing_radius_m": registry.pairing_radius_m,
        "entries": [
            {
                "photo_id": e.source_photo_id,
                "lat": e.location.lat,
                "lon": e.location.lon,
                "sign_bbox": e.observation.sign_bbox.as_list(),
                "pole_bbox": e.observation.pole_bbox.as_list() if e.observation.pole_bbox else None,
                "ppi": e.observation.ppi,
                "pole_length_in": e.observation.pole_length_in,
                "multi_sign_scene": e.observation.multi_sign_scene,
            }
            for e in registry.entries
        ],
    }


def registry_from_dict(obj: dict[str, Any]) -> Registry:
    try:
        registry = Registry(pairing_radius_m=float(obj["pairing_radius_m"]))
        for e in obj["entries"]:
            obs = SignObservation(
                photo_id=str(e["photo_id"]),
                sign_bbox=_bbox_from_list(e["sign_bbox"]),
                pole_bbox=_bbox_from_list(e["pole_bbox"]) if e.get("pole_bbox") else None,
                ppi=float(e["ppi"]),
                pole_length_in=float(e["pole_length_in"]),
                multi_sign_scene=bool(e.get("multi_sign_scene", False)),
            )
            registry.entries.append(
                BaselineEntry(
                    location=LatLon(float(e["lat"]), float(e["lon"])),
                    observation=obs,
                    source_photo_id=str(e["photo_id"]),
                )
            )
    except (KeyError, ValueError, GeometryError, CoordError) as exc:
        raise FormatError(f"bad registry entry: {exc}") from exc
    return registry


def save_registry(registry: Registry, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(registry_to_dict(registry), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_registry(path: str | Path) -> Registry:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON: {exc}") from exc
    return registry_from_dict(obj)


# ---------------------------------------------------------------------------
# GeoJSON flood map


def _estimate_properties(feature_id: int, est: DepthEstimate) -> dict[str, Any]:
    return {
        "id": feature_id,
        "depth_in": est.depth_in,
        "depth_ft": est.depth_in / INCHES_PER_FOOT,
        "depth_m": est.depth_in * METERS_PER_INCH,
        "depth_raw_in": est.depth_raw_in,
        "pre_photo_id": est.pre_photo_id,
        "post_photo_id": est.post_photo_id,
        "flags": sorted(f.value for f in est.flags),
    }


def flood_map_geojson(estimates: Sequence[DepthEstimate]) -> dict[str, Any]:
    """FeatureCollection with one Point per estimate, ids assigned in
    post-photo-id order so output bytes are stable."""
    ordered = sorted(estimates, key=lambda e: e.post_photo_id)
    features = [
        {
            "type": "Feature",
            "geometry": {
                "type": "Point",
                "coordinates": [round(est.location.lon, 6), round(est.location.lat, 6)],
            },
            "properties": _estimate_properties(i, est),
        }
        for i, est in enumerate(ordered, start=1)
    ]
    return {"type": "FeatureCollection", "features": features}


def emit_geojson(estimates: Sequence[DepthEstimate], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(flood_map_geojson(estimates), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# PNG images (augmentation I/O)


def load_image(path: str | Path) -> ImageBuffer:
    with Image.open(path) as img:
        return ImageBuffer(np.asarray(img.convert("RGB"), dtype=np.uint8))


def save_image(image: ImageBuffer, path: str | Path) -> None:
    Image.fromarray(image.pixels).save(path, format="PNG")


def load_annotated_sample(image_path: str | Path) -> AnnotatedSample:
    """Load a PNG plus its sibling ``.txt`` Darknet annotation file."""
    image = load_image(image_path)
    txt = Path(image_path).with_suffix(".txt")
    boxes: list[tuple[DetectionClass, BBox]] = []
    if txt.exists():
        boxes = load_darknet_annotations(txt, image.width, image.height)
    return AnnotatedSample(image=image, boxes=tuple(boxes))


def save_annotated_sample(sample: AnnotatedSample, image_path: str | Path) -> None:
    save_image(sample.image, image_path)
    save_darknet_annotations(
        sample.boxes, Path(image_path).with_suffix(".txt"), sample.image.width, sample.image.height
    )
