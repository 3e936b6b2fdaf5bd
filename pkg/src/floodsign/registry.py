"""Baseline registry: pre-flood observations keyed by geolocation.

Each post-flood photo is paired with the nearest pre-flood baseline within
a configurable radius.  Lookups scan linearly, which is fine at desk scale;
a spatial index is a documented extension point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import NoBaselineError, PhaseError, UnusableBaselineError
from .geometry import LatLon, SignObservation
from .selection import Phase, PhotoRecord

EARTH_RADIUS_M = 6_371_000.0
DEFAULT_PAIRING_RADIUS_M = 25.0
DEDUP_RADIUS_M = 1.0

# Second-nearest baseline within this multiple of the nearest distance makes
# the pairing ambiguous.
AMBIGUITY_FACTOR = 2.0


def haversine_m(a: LatLon, b: LatLon) -> float:
    """Great-circle distance in meters on a sphere of radius 6,371,000 m."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


@dataclass(frozen=True)
class BaselineEntry:
    """One pre-flood observation anchored at a location."""

    location: LatLon
    observation: SignObservation
    source_photo_id: str

    def __post_init__(self) -> None:
        if self.observation.pole_length_in <= 0:
            raise UnusableBaselineError(
                f"baseline {self.source_photo_id}: zero visible pole cannot anchor depth"
            )


@dataclass
class Registry:
    """Collection of baselines; mutable until frozen, then read-only."""

    pairing_radius_m: float = DEFAULT_PAIRING_RADIUS_M
    entries: list[BaselineEntry] = field(default_factory=list)
    _frozen: bool = field(default=False, repr=False)

    def __post_init__(self) -> None:
        if self.pairing_radius_m <= 0:
            raise ValueError(f"pairing_radius_m must be > 0, got {self.pairing_radius_m}")

    def freeze(self) -> "Registry":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def nearest(self, location: LatLon) -> list[tuple[float, BaselineEntry]]:
        """All entries as (distance_m, entry), nearest first; ties by photo id."""
        pairs = [(haversine_m(location, e.location), e) for e in self.entries]
        pairs.sort(key=lambda p: (p[0], p[1].source_photo_id))
        return pairs


def register_baseline(registry: Registry, photo: PhotoRecord, obs: SignObservation) -> Registry:
    """Add a baseline, deduplicating entries within 1 m of each other.

    Two baselines within 1 m are taken to be the same physical sign; the one
    with the larger sign bbox area (better-resolved view) is kept.
    """
    if registry.frozen:
        raise RuntimeError("registry is frozen")
    if photo.phase is not Phase.PRE_FLOOD:
        raise PhaseError(f"photo {photo.photo_id} is not a pre-flood photo")
    entry = BaselineEntry(location=photo.location, observation=obs, source_photo_id=photo.photo_id)

    colliding = [
        e for e in registry.entries if haversine_m(e.location, entry.location) < DEDUP_RADIUS_M
    ]
    if colliding:
        best_existing = max(colliding, key=lambda e: e.observation.sign_bbox.area)
        if entry.observation.sign_bbox.area > best_existing.observation.sign_bbox.area:
            registry.entries = [e for e in registry.entries if e not in colliding]
            registry.entries.append(entry)
        # else: keep the existing, drop the newcomer
    else:
        registry.entries.append(entry)
    return registry


def pair(registry: Registry, post_photo: PhotoRecord) -> BaselineEntry:
    """Nearest baseline within the pairing radius; ties by smallest photo id."""
    if post_photo.phase is not Phase.POST_FLOOD:
        raise PhaseError(f"photo {post_photo.photo_id} is not a post-flood photo")
    ranked = registry.nearest(post_photo.location)
    if not ranked or ranked[0][0] > registry.pairing_radius_m:
        raise NoBaselineError(
            f"photo {post_photo.photo_id}: no baseline within {registry.pairing_radius_m} m"
        )
    return ranked[0][1]


def pairing_is_ambiguous(registry: Registry, post_photo: PhotoRecord) -> bool:
    """True when the second-nearest in-radius baseline sits within twice the
    nearest distance, i.e. two distinct real signs compete for the photo."""
    ranked = [p for p in registry.nearest(post_photo.location) if p[0] <= registry.pairing_radius_m]
    if len(ranked) < 2:
        return False
    return ranked[1][0] <= AMBIGUITY_FACTOR * ranked[0][0]
