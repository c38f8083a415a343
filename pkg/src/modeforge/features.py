"""Per-trip feature construction and min-max normalization.

Eleven trajectory features (distances, times, speed statistics, record
rate) plus three network-proximity features (mean distance of the trip's
points to the nearest rail / bus / highway line).  Feature matrices are
normalized to [0, 1] with a scaler fitted on training rows only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateTripError, DimensionError
from .geo import haversine_distance, pairwise_speed
from .network import ModalNetwork
from .trips import Trip

TRAJECTORY_FEATURES = (
    "trip_distance",
    "trip_time",
    "od_euclidean",
    "avg_speed",
    "max_instant_speed",
    "speed_q05",
    "speed_q25",
    "speed_q50",
    "speed_q75",
    "speed_q95",
    "avg_record_rate",
)

NETWORK_FEATURES = ("avg_dist_rail", "avg_dist_bus", "avg_dist_highway")

ALL_FEATURES = TRAJECTORY_FEATURES + NETWORK_FEATURES


@dataclass(frozen=True)
class TrajectoryFeatures:
    trip_distance: float
    trip_time: float
    od_euclidean: float
    avg_speed: float
    max_instant_speed: float
    speed_q05: float
    speed_q25: float
    speed_q50: float
    speed_q75: float
    speed_q95: float
    avg_record_rate: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in TRAJECTORY_FEATURES])


@dataclass(frozen=True)
class NetworkFeatures:
    avg_dist_rail: float
    avg_dist_bus: float
    avg_dist_highway: float

    def as_array(self) -> np.ndarray:
        return np.array([self.avg_dist_rail, self.avg_dist_bus,
                         self.avg_dist_highway])


@dataclass
class FeatureVector:
    """Raw and (optionally) normalized features of one trip."""

    trip_id: str
    raw: np.ndarray  # length len(ALL_FEATURES), fixed order
    normalized: Optional[np.ndarray] = None
    label: Optional[str] = None

    def __post_init__(self) -> None:
        self.raw = np.asarray(self.raw, dtype=float)
        if self.raw.shape != (len(ALL_FEATURES),):
            raise DimensionError(
                f"raw feature vector must have {len(ALL_FEATURES)} entries, "
                f"got shape {self.raw.shape}")


@dataclass
class FeatureScaler:
    """Per-feature min/max from the training split; maps to [0, 1]."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self) -> None:
        self.minimum = np.asarray(self.minimum, dtype=float)
        self.maximum = np.asarray(self.maximum, dtype=float)
        if self.minimum.shape != self.maximum.shape:
            raise DimensionError("scaler min/max shapes differ")
        if np.any(self.maximum < self.minimum):
            raise ValueError("scaler max must be >= min per feature")

    def transform(self, x: np.ndarray) -> np.ndarray:
        """(x - min) / (max - min); constant features map to 0; clamps."""
        x = np.asarray(x, dtype=float)
        span = self.maximum - self.minimum
        out = np.where(span > 0.0, (x - self.minimum) / np.where(span > 0, span, 1.0), 0.0)
        return np.clip(out, 0.0, 1.0)

    def inverse(self, z: np.ndarray) -> np.ndarray:
        span = self.maximum - self.minimum
        return self.minimum + np.asarray(z, dtype=float) * span

    def to_dict(self) -> dict:
        return {"minimum": self.minimum.tolist(),
                "maximum": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        return cls(minimum=np.array(d["minimum"]),
                   maximum=np.array(d["maximum"]))


def _speed_sample(trip: Trip) -> np.ndarray:
    """Speeds used for the max / quantile features.

    Instantaneous speeds recorded by the device when present; otherwise
    the pairwise speeds between successive points.
    """
    inst = [p.instantaneous_speed for p in trip.points
            if p.instantaneous_speed is not None]
    if inst:
        return np.array(inst, dtype=float)
    return np.array([pairwise_speed(a, b)
                     for a, b in zip(trip.points, trip.points[1:])])


def trajectory_features(trip: Trip) -> TrajectoryFeatures:
    """Compute the eleven trajectory features of one trip."""
    if trip.duration <= 0:
        raise DegenerateTripError(f"trip {trip.trip_id} has zero duration")
    pts = trip.points
    trip_distance = sum(haversine_distance(a.latlon, b.latlon)
                        for a, b in zip(pts, pts[1:]))
    trip_time = trip.duration
    od = haversine_distance(trip.origin, trip.destination)
    speeds = _speed_sample(trip)
    q05, q25, q50, q75, q95 = np.quantile(speeds, [0.05, 0.25, 0.50, 0.75, 0.95])
    return TrajectoryFeatures(
        trip_distance=trip_distance,
        trip_time=trip_time,
        od_euclidean=od,
        avg_speed=trip_distance / trip_time,
        max_instant_speed=float(speeds.max()),
        speed_q05=float(q05),
        speed_q25=float(q25),
        speed_q50=float(q50),
        speed_q75=float(q75),
        speed_q95=float(q95),
        avg_record_rate=len(pts) / trip_time,
    )


def nearest_line_distance(p, net: ModalNetwork) -> float:
    """Distance in meters from a (lat, lon) point to the nearest line."""
    d, _ = net.nearest_segment(p)
    return d


def network_features(trip: Trip, rail: ModalNetwork, bus: ModalNetwork,
                     highway: ModalNetwork) -> NetworkFeatures:
    """Mean per-point nearest-line distance for each modal network."""
    sums = [0.0, 0.0, 0.0]
    for p in trip.points:
        for k, net in enumerate((rail, bus, highway)):
            sums[k] += nearest_line_distance(p.latlon, net)
    n = len(trip.points)
    return NetworkFeatures(avg_dist_rail=sums[0] / n,
                           avg_dist_bus=sums[1] / n,
                           avg_dist_highway=sums[2] / n)


def build_feature_vector(trip: Trip, rail: ModalNetwork, bus: ModalNetwork,
                         highway: ModalNetwork) -> FeatureVector:
    raw = np.concatenate([
        trajectory_features(trip).as_array(),
        network_features(trip, rail, bus, highway).as_array(),
    ])
    return FeatureVector(trip_id=trip.trip_id, raw=raw, label=trip.mode_label)


def fit_scaler(vectors: Sequence[FeatureVector]) -> FeatureScaler:
    """Fit per-feature min/max on a training set of raw vectors."""
    if not vectors:
        raise ValueError("cannot fit a scaler on an empty matrix")
    matrix = np.stack([v.raw for v in vectors])
    return FeatureScaler(minimum=matrix.min(axis=0), maximum=matrix.max(axis=0))


def apply_scaler(scaler: FeatureScaler,
                 vectors: Sequence[FeatureVector]) -> None:
    """Populate ``normalized`` on each vector in place."""
    for v in vectors:
        v.normalized = scaler.transform(v.raw)


def feature_matrix(vectors: Sequence[FeatureVector],
                   include_network: bool = True) -> np.ndarray:
    """Stack normalized vectors, optionally dropping network columns."""
    rows = []
    for v in vectors:
        if v.normalized is None:
            raise ValueError(f"vector {v.trip_id} is not normalized")
        rows.append(v.normalized if include_network
                    else v.normalized[:len(TRAJECTORY_FEATURES)])
    return np.stack(rows)
