"""Geographic and temporal primitives: points, sequences, distances, speeds.

All distances are in meters, all durations in seconds.  Point-to-point
distances are great-circle (haversine) on a sphere of radius
``EARTH_RADIUS_M``; point-to-segment distances use a local equirectangular
projection centered on the query point, which keeps the error well under
0.1% at metropolitan scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidCoordinateError, UndefinedSpeedError

EARTH_RADIUS_M = 6_371_000.0

LatLon = tuple[float, float]


def _check_latlon(lat: float, lon: float) -> None:
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise InvalidCoordinateError(f"non-finite coordinate ({lat}, {lon})")
    if not (-90.0 <= lat <= 90.0):
        raise InvalidCoordinateError(f"latitude {lat} outside [-90, 90]")
    if not (-180.0 <= lon <= 180.0):
        raise InvalidCoordinateError(f"longitude {lon} outside [-180, 180]")


@dataclass(frozen=True)
class LocationPoint:
    """One timestamped geographic observation of one anonymized device."""

    device_id: str
    latitude: float
    longitude: float
    timestamp: float  # seconds since epoch, UTC
    accuracy: Optional[float] = None  # meters, larger is worse
    instantaneous_speed: Optional[float] = None  # m/s

    def __post_init__(self) -> None:
        _check_latlon(self.latitude, self.longitude)
        for name, value in (("accuracy", self.accuracy),
                            ("instantaneous_speed", self.instantaneous_speed)):
            if value is not None and (not math.isfinite(value) or value < 0):
                raise InvalidCoordinateError(
                    f"{name} must be finite and non-negative, got {value}")

    @property
    def latlon(self) -> LatLon:
        return (self.latitude, self.longitude)


@dataclass
class PointSequence:
    """Time-ordered location points of a single device.

    Construction sorts by timestamp and collapses equal-timestamp
    duplicates keeping the first record, so downstream window algorithms
    can rely on strictly increasing timestamps.
    """

    device_id: str
    points: list[LocationPoint] = field(default_factory=list)

    def __post_init__(self) -> None:
        for p in self.points:
            if p.device_id != self.device_id:
                raise ValueError(
                    f"point device_id {p.device_id!r} != sequence "
                    f"device_id {self.device_id!r}")
        self.points = sorted(self.points, key=lambda p: p.timestamp)
        deduped: list[LocationPoint] = []
        for p in self.points:
            if deduped and p.timestamp == deduped[-1].timestamp:
                continue  # keep first record at each timestamp
            deduped.append(p)
        self.points = deduped

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


@dataclass(frozen=True)
class GeoSegment:
    """A straight segment between two lat/lon endpoints."""

    start: LatLon
    end: LatLon

    def __post_init__(self) -> None:
        _check_latlon(*self.start)
        _check_latlon(*self.end)


def haversine_distance(a: LatLon, b: LatLon) -> float:
    """Great-circle distance in meters between two (lat, lon) pairs."""
    _check_latlon(*a)
    _check_latlon(*b)
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2.0) ** 2 \
        + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def pairwise_speed(a: LocationPoint, b: LocationPoint) -> float:
    """Average speed (m/s) between two successive location points.

    Uses absolute displacement over positive duration; raises
    UndefinedSpeedError when b does not strictly follow a in time.
    """
    dt = b.timestamp - a.timestamp
    if dt <= 0:
        raise UndefinedSpeedError(
            f"non-positive time delta {dt} between points")
    return haversine_distance(a.latlon, b.latlon) / dt


def _project_local(lats: np.ndarray, lons: np.ndarray,
                   origin: LatLon) -> tuple[np.ndarray, np.ndarray]:
    """Equirectangular projection (meters) centered on ``origin``."""
    olat, olon = origin
    scale = math.cos(math.radians(olat))
    x = EARTH_RADIUS_M * np.radians(lons - olon) * scale
    y = EARTH_RADIUS_M * np.radians(lats - olat)
    return x, y


def _haversine_many(p: LatLon, lats: np.ndarray,
                    lons: np.ndarray) -> np.ndarray:
    lat1, lon1 = math.radians(p[0]), math.radians(p[1])
    lat2 = np.radians(lats)
    lon2 = np.radians(lons)
    h = np.sin((lat2 - lat1) / 2.0) ** 2 \
        + math.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def segments_point_distance(p: LatLon,
                            lat1: np.ndarray, lon1: np.ndarray,
                            lat2: np.ndarray, lon2: np.ndarray) -> np.ndarray:
    """Planar point-to-segment distances from ``p`` to many segments.

    Vectorized over segment endpoint arrays; degenerate segments
    (start == end) fall back to point distance.  The planar value is
    capped by the haversine distances to the two endpoints, which bounds
    the projection distortion for far-away points.  This single routine
    is used by both the spatial-grid path and the linear-scan path so
    their results are bit-identical.
    """
    _check_latlon(*p)
    x1, y1 = _project_local(lat1, lon1, p)
    x2, y2 = _project_local(lat2, lon2, p)
    dx = x2 - x1
    dy = y2 - y1
    seg_len_sq = dx * dx + dy * dy
    # parameter of the projection of the origin (= p) onto each segment
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(seg_len_sq > 0.0,
                     -(x1 * dx + y1 * dy) / seg_len_sq, 0.0)
    t = np.clip(t, 0.0, 1.0)
    cx = x1 + t * dx
    cy = y1 + t * dy
    planar = np.sqrt(cx * cx + cy * cy)
    cap = np.minimum(_haversine_many(p, lat1, lon1),
                     _haversine_many(p, lat2, lon2))
    return np.minimum(planar, cap)


def segment_point_distance(p: LatLon, s: GeoSegment) -> float:
    """Minimum distance in meters from point ``p`` to segment ``s``."""
    d = segments_point_distance(
        p,
        np.array([s.start[0]]), np.array([s.start[1]]),
        np.array([s.end[0]]), np.array([s.end[1]]))
    return float(d[0])


def sequence_speeds(points: Sequence[LocationPoint]) -> list[float]:
    """Per-point speed used by the stay-region speed constraint.

    Instantaneous speed when recorded; otherwise the pairwise speed from
    the previous point (the first point defaults to 0).
    """
    speeds: list[float] = []
    for i, p in enumerate(points):
        if p.instantaneous_speed is not None:
            speeds.append(p.instantaneous_speed)
        elif i == 0:
            speeds.append(0.0)
        else:
            speeds.append(pairwise_speed(points[i - 1], p))
    return speeds


def group_by_device(points: Iterable[LocationPoint]) -> list[PointSequence]:
    """Split a point stream into per-device time-ordered sequences."""
    by_device: dict[str, list[LocationPoint]] = {}
    for p in points:
        by_device.setdefault(p.device_id, []).append(p)
    return [PointSequence(device_id=d, points=ps)
            for d, ps in sorted(by_device.items())]
