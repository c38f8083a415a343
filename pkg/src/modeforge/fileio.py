"""Delimited file formats exchanged between pipeline stages.

Formats
-------
points CSV      device_id,timestamp,latitude,longitude,accuracy,speed
                (accuracy/speed may be empty; timestamp is UTC epoch
                seconds or RFC 3339, auto-detected per file)
trips CSV       trip_id,device_id,start_time,end_time,n_points,
                origin_lat,origin_lon,dest_lat,dest_lon[,mode,label_source]
membership CSV  trip_id,point_index,device_id,timestamp,latitude,longitude,
                accuracy,speed
features CSV    trip_id, 14 raw columns, 14 normalized columns, label
reference CSV   mode,bin_lo,bin_hi,proportion
"""

from __future__ import annotations

import csv
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .features import ALL_FEATURES, FeatureVector
from .geo import LocationPoint
from .synth import GroundTruthTrip
from .trips import MODES, Trip

POINTS_HEADER = ["device_id", "timestamp", "latitude", "longitude",
                 "accuracy", "speed"]
TRIPS_HEADER = ["trip_id", "device_id", "start_time", "end_time", "n_points",
                "origin_lat", "origin_lon", "dest_lat", "dest_lon",
                "mode", "label_source"]
MEMBERSHIP_HEADER = ["trip_id", "point_index", "device_id", "timestamp",
                     "latitude", "longitude", "accuracy", "speed"]
FEATURES_HEADER = (["trip_id"]
                   + [f"raw_{n}" for n in ALL_FEATURES]
                   + [f"norm_{n}" for n in ALL_FEATURES]
                   + ["label"])


def _parse_timestamp(text: str) -> float:
    """Epoch seconds from either a numeric or an RFC 3339 timestamp."""
    try:
        return float(text)
    except ValueError:
        pass
    iso = text.replace("Z", "+00:00")
    dt = datetime.fromisoformat(iso)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def read_points(path: str | Path) -> list[LocationPoint]:
    path = Path(path)
    points: list[LocationPoint] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"device_id", "timestamp", "latitude", "longitude"} \
            - set(reader.fieldnames or [])
        if missing:
            raise ConfigError(f"{path}: missing columns {sorted(missing)}")
        for row_no, row in enumerate(reader):
            try:
                acc = row.get("accuracy") or None
                spd = row.get("speed") or None
                points.append(LocationPoint(
                    device_id=row["device_id"],
                    latitude=float(row["latitude"]),
                    longitude=float(row["longitude"]),
                    timestamp=_parse_timestamp(row["timestamp"]),
                    accuracy=float(acc) if acc is not None else None,
                    instantaneous_speed=float(spd) if spd is not None else None,
                ))
            except (ValueError, KeyError) as exc:
                raise ConfigError(f"{path}: record {row_no}: {exc}") from exc
    return points


def write_points(points: Iterable[LocationPoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(POINTS_HEADER)
        for p in points:
            writer.writerow([
                p.device_id, repr(p.timestamp),
                repr(p.latitude), repr(p.longitude),
                "" if p.accuracy is None else repr(p.accuracy),
                "" if p.instantaneous_speed is None
                else repr(p.instantaneous_speed),
            ])


def write_trips(trips: Sequence[Trip], trips_path: str | Path,
                membership_path: Optional[str | Path] = None) -> None:
    with open(trips_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIPS_HEADER)
        for t in trips:
            writer.writerow([
                t.trip_id, t.device_id, repr(t.start_time), repr(t.end_time),
                len(t.points),
                repr(t.origin[0]), repr(t.origin[1]),
                repr(t.destination[0]), repr(t.destination[1]),
                t.mode_label or "", t.label_source or "",
            ])
    if membership_path is not None:
        with open(membership_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(MEMBERSHIP_HEADER)
            for t in trips:
                for i, p in enumerate(t.points):
                    writer.writerow([
                        t.trip_id, i, p.device_id, repr(p.timestamp),
                        repr(p.latitude), repr(p.longitude),
                        "" if p.accuracy is None else repr(p.accuracy),
                        "" if p.instantaneous_speed is None
                        else repr(p.instantaneous_speed),
                    ])


def read_trips(membership_path: str | Path,
               trips_path: Optional[str | Path] = None) -> list[Trip]:
    """Rebuild Trip objects from a membership CSV (labels from trips CSV)."""
    labels: dict[str, tuple[Optional[str], Optional[str]]] = {}
    if trips_path is not None:
        with open(trips_path, newline="") as fh:
            for row in csv.DictReader(fh):
                labels[row["trip_id"]] = (row.get("mode") or None,
                                          row.get("label_source") or None)
    grouped: dict[str, list[LocationPoint]] = {}
    order: list[str] = []
    with open(membership_path, newline="") as fh:
        for row in csv.DictReader(fh):
            tid = row["trip_id"]
            if tid not in grouped:
                grouped[tid] = []
                order.append(tid)
            acc = row.get("accuracy") or None
            spd = row.get("speed") or None
            grouped[tid].append(LocationPoint(
                device_id=row["device_id"],
                latitude=float(row["latitude"]),
                longitude=float(row["longitude"]),
                timestamp=_parse_timestamp(row["timestamp"]),
                accuracy=float(acc) if acc is not None else None,
                instantaneous_speed=float(spd) if spd is not None else None,
            ))
    trips = []
    for tid in order:
        mode, source = labels.get(tid, (None, None))
        trips.append(Trip(trip_id=tid, device_id=grouped[tid][0].device_id,
                          points=grouped[tid], mode_label=mode,
                          label_source=source))
    return trips


def write_features(vectors: Sequence[FeatureVector],
                   path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FEATURES_HEADER)
        for v in vectors:
            norm = (v.normalized if v.normalized is not None
                    else np.full(len(ALL_FEATURES), np.nan))
            writer.writerow([v.trip_id]
                            + [repr(float(x)) for x in v.raw]
                            + [repr(float(x)) for x in norm]
                            + [v.label or ""])


def read_features(path: str | Path) -> list[FeatureVector]:
    vectors = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            raw = np.array([float(row[f"raw_{n}"]) for n in ALL_FEATURES])
            norm = np.array([float(row[f"norm_{n}"]) for n in ALL_FEATURES])
            vectors.append(FeatureVector(
                trip_id=row["trip_id"], raw=raw,
                normalized=None if np.isnan(norm).any() else norm,
                label=row.get("label") or None))
    return vectors


def write_ground_truth(truths: Sequence[GroundTruthTrip],
                       path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trip_id", "device_id", "mode",
                         "start_time", "end_time"])
        for t in truths:
            writer.writerow([t.trip_id, t.device_id, t.mode,
                             repr(t.start_time), repr(t.end_time)])


def read_ground_truth(path: str | Path) -> list[GroundTruthTrip]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(GroundTruthTrip(
                trip_id=row["trip_id"], device_id=row["device_id"],
                mode=row["mode"],
                start_time=float(row["start_time"]),
                end_time=float(row["end_time"])))
    return out


def read_reference_histograms(path: str | Path,
                              bin_edges: Sequence[float],
                              ) -> dict[str, np.ndarray]:
    """Reference per-mode bin proportions (mode,bin_lo,bin_hi,proportion).

    Rows must match the supplied bin edges; missing bins default to 0.
    """
    edges = list(bin_edges)
    n_bins = len(edges) - 1
    out = {m: np.zeros(n_bins) for m in MODES}
    with open(path, newline="") as fh:
        for row_no, row in enumerate(csv.DictReader(fh)):
            mode = row["mode"]
            if mode not in out:
                raise ConfigError(f"{path}: row {row_no}: unknown mode {mode!r}")
            lo = float(row["bin_lo"])
            match = [i for i in range(n_bins) if abs(edges[i] - lo) < 1e-9]
            if not match:
                raise ConfigError(
                    f"{path}: row {row_no}: bin_lo {lo} not in configured edges")
            out[mode][match[0]] = float(row["proportion"])
    return out
