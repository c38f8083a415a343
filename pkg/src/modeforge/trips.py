"""Cleaning of raw location streams and segmentation into trips.

Two splitters are provided:

* ``split_by_stay_regions`` cuts at detected stay regions (dwell within a
  roam radius under a speed cap), suited to dense survey-grade traces.
* ``split_by_thresholds`` walks consecutive observations and starts a new
  trip whenever the gap to the next point exceeds any of three thresholds
  (distance, speed, time), suited to sparse passively collected traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .geo import (
    LatLon,
    LocationPoint,
    PointSequence,
    haversine_distance,
    pairwise_speed,
    sequence_speeds,
)

MODES = ("Car", "Metro", "Bus", "Walk")


@dataclass(frozen=True)
class FilterConfig:
    """Thresholds for the accuracy and jump-speed filters."""

    min_accuracy: float = 100.0  # meters; records with worse accuracy dropped
    max_jump_speed: float = 150.0  # m/s

    def __post_init__(self) -> None:
        if not (self.min_accuracy > 0 and math.isfinite(self.min_accuracy)):
            raise ValueError("min_accuracy must be positive and finite")
        if not (self.max_jump_speed > 0 and math.isfinite(self.max_jump_speed)):
            raise ValueError("max_jump_speed must be positive and finite")


@dataclass(frozen=True)
class StayRegionConfig:
    """Roam distance D (m), dwell time T (s), speed cap V (m/s)."""

    max_roam_distance: float = 100.0
    min_dwell_time: float = 300.0
    max_speed: float = 1.5

    def __post_init__(self) -> None:
        if self.max_roam_distance <= 0:
            raise ValueError("max_roam_distance must be > 0")
        if self.min_dwell_time <= 0:
            raise ValueError("min_dwell_time must be > 0")
        if self.max_speed < 0:
            raise ValueError("max_speed must be >= 0")


@dataclass(frozen=True)
class TripSplitConfig:
    """Thresholds for consecutive-observation trip identification."""

    max_distance_from: float = 2_000.0  # meters
    max_speed_from: float = 69.4  # m/s (250 km/h)
    max_time_from: float = 1_800.0  # seconds

    def __post_init__(self) -> None:
        if min(self.max_distance_from, self.max_speed_from,
               self.max_time_from) <= 0:
            raise ValueError("all trip-split thresholds must be > 0")


@dataclass(frozen=True)
class StayRegion:
    """A contiguous dwell: slice [start_index, end_index] of a sequence."""

    device_id: str
    start_index: int
    end_index: int  # inclusive
    anchor: LatLon
    entry_time: float
    exit_time: float

    @property
    def n_points(self) -> int:
        return self.end_index - self.start_index + 1


@dataclass
class Trip:
    """An ordered point run between two trip ends."""

    trip_id: str
    device_id: str
    points: list[LocationPoint]
    mode_label: Optional[str] = None
    label_source: Optional[str] = None  # "ground_truth" or "imputed"

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ValueError("a trip needs at least 2 points")
        ts = [p.timestamp for p in self.points]
        if ts != sorted(ts) or ts[-1] <= ts[0]:
            raise ValueError("trip points must be time-ordered with positive duration")
        if self.mode_label is not None and self.mode_label not in MODES:
            raise ValueError(f"unknown mode label {self.mode_label!r}")

    @property
    def origin(self) -> LatLon:
        return self.points[0].latlon

    @property
    def destination(self) -> LatLon:
        return self.points[-1].latlon

    @property
    def start_time(self) -> float:
        return self.points[0].timestamp

    @property
    def end_time(self) -> float:
        return self.points[-1].timestamp

    @property
    def duration(self) -> float:
        return self.end_time - self.start_time


def filter_points(seq: PointSequence, cfg: FilterConfig) -> PointSequence:
    """Drop low-accuracy records and physically implausible jumps.

    A point survives the accuracy filter when it has no accuracy value or
    its accuracy is <= min_accuracy.  Scanning left to right, a point is
    dropped when its pairwise speed from the previous *retained* point
    exceeds max_jump_speed.
    """
    kept: list[LocationPoint] = []
    for p in seq.points:
        if p.accuracy is not None and p.accuracy > cfg.min_accuracy:
            continue
        if kept and pairwise_speed(kept[-1], p) > cfg.max_jump_speed:
            continue
        kept.append(p)
    return PointSequence(device_id=seq.device_id, points=kept)


def detect_stay_regions(seq: PointSequence,
                        cfg: StayRegionConfig) -> list[StayRegion]:
    """Greedy left-to-right stay-region scan.

    The anchor is the first unconsumed point; the run extends while every
    member stays within max_roam_distance of the anchor and under the
    speed cap.  The run becomes a region iff its dwell reaches
    min_dwell_time (inclusive); otherwise the anchor advances one point.
    """
    points = seq.points
    n = len(points)
    speeds = sequence_speeds(points)
    regions: list[StayRegion] = []
    i = 0
    while i < n:
        if speeds[i] > cfg.max_speed:
            i += 1
            continue
        anchor = points[i].latlon
        j = i
        while j + 1 < n:
            nxt = points[j + 1]
            if speeds[j + 1] > cfg.max_speed:
                break
            if haversine_distance(anchor, nxt.latlon) > cfg.max_roam_distance:
                break
            j += 1
        dwell = points[j].timestamp - points[i].timestamp
        if dwell >= cfg.min_dwell_time:
            regions.append(StayRegion(
                device_id=seq.device_id,
                start_index=i,
                end_index=j,
                anchor=anchor,
                entry_time=points[i].timestamp,
                exit_time=points[j].timestamp,
            ))
            i = j + 1
        else:
            i += 1
    return regions


def _make_trip(device_id: str, points: list[LocationPoint],
               counter: int) -> Trip:
    return Trip(trip_id=f"{device_id}-{counter:04d}",
                device_id=device_id, points=points)


def split_by_stay_regions(seq: PointSequence,
                          regions: list[StayRegion]) -> list[Trip]:
    """Cut a sequence into trips at its stay regions.

    Each trip runs from the exit point of the preceding region (or the
    sequence start) to the entry point of the following region (or the
    sequence end), boundary points included.  Single-point results are
    discarded.
    """
    points = seq.points
    n = len(points)
    if n == 0:
        return []
    bounds: list[tuple[int, int]] = []
    start = 0
    for r in regions:
        bounds.append((start, r.start_index))
        start = r.end_index
    bounds.append((start, n - 1))
    trips: list[Trip] = []
    for lo, hi in bounds:
        if hi - lo + 1 >= 2:
            trips.append(_make_trip(seq.device_id, points[lo:hi + 1],
                                    len(trips)))
    return trips


def split_by_thresholds(seq: PointSequence,
                        cfg: TripSplitConfig) -> list[Trip]:
    """Consecutive-observation trip identification.

    The first observation opens a trip; the next point joins the current
    trip iff its distance-from, time-from, and speed-from the current
    point are all within the configured thresholds (a zero time gap after
    deduplication cannot occur, but is treated as same-trip).  Trips that
    end up with a single point are removed.
    """
    points = seq.points
    if len(points) < 2:
        return []
    runs: list[list[LocationPoint]] = [[points[0]]]
    for prev, nxt in zip(points, points[1:]):
        dist = haversine_distance(prev.latlon, nxt.latlon)
        dt = nxt.timestamp - prev.timestamp
        if dt == 0:
            same = True
        else:
            speed = dist / dt
            same = (dist <= cfg.max_distance_from
                    and dt <= cfg.max_time_from
                    and speed <= cfg.max_speed_from)
        if same:
            runs[-1].append(nxt)
        else:
            runs.append([nxt])
    trips: list[Trip] = []
    for run in runs:
        if len(run) >= 2:
            trips.append(_make_trip(seq.device_id, run, len(trips)))
    return trips
