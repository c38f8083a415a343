"""Synthetic labeled-trajectory generator.

Stands in for proprietary survey and vendor feeds: emits raw location
points plus ground-truth trip spans with mode labels, deterministically
per seed.  Bus and metro trajectories follow bus / rail polylines with
lateral noise, car trips follow highway polylines, walk trips wander
freely.  Metro trips suffer configurable observation dropout emulating
signal loss; each trip is book-ended by a stationary dwell so that trip
extraction can be exercised end to end.

All speed profiles, dwell lengths, and noise levels here are invented
defaults with no empirical calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .geo import EARTH_RADIUS_M, LatLon, LocationPoint, haversine_distance
from .trips import MODES

# mode -> network a trip adheres to (walk is unconstrained)
MODE_NETWORK = {"Car": "highway", "Metro": "rail", "Bus": "bus"}

_DEG_PER_M_LAT = 180.0 / (math.pi * EARTH_RADIUS_M)


@dataclass(frozen=True)
class SyntheticSpec:
    trips_per_mode: dict[str, int] = field(
        default_factory=lambda: {"Car": 195, "Bus": 160, "Metro": 534,
                                 "Walk": 120})
    seed: int = 0
    record_interval: float = 30.0  # seconds between moving fixes
    gps_noise_sigma: float = 12.0  # meters, lateral
    metro_noise_sigma: float = 40.0  # urban canyon / underground fixes
    metro_dropout: tuple[float, float] = (0.3, 0.6)  # per-trip range
    car_dropout: tuple[float, float] = (0.0, 0.25)
    # per-trip mean speed ranges, m/s; overlapping on purpose so speed
    # alone cannot fully separate the motorized modes
    speed_range: dict[str, tuple[float, float]] = field(
        default_factory=lambda: {"Walk": (1.1, 1.7), "Bus": (4.0, 9.0),
                                 "Car": (6.0, 16.0), "Metro": (10.0, 18.0)})
    trip_length_range: dict[str, tuple[float, float]] = field(
        default_factory=lambda: {"Walk": (1_000.0, 2_500.0),
                                 "Bus": (3_000.0, 9_000.0),
                                 "Car": (4_000.0, 15_000.0),
                                 "Metro": (4_000.0, 15_000.0)})
    dwell_range: tuple[float, float] = (900.0, 1_800.0)  # stay at each end
    dwell_interval: float = 60.0  # seconds between stationary fixes
    bus_stop_every: tuple[float, float] = (120.0, 240.0)  # seconds of motion
    bus_stop_dwell: tuple[float, float] = (20.0, 45.0)
    base_timestamp: float = 1_498_867_200.0  # 2017-07-01T00:00:00Z

    def __post_init__(self) -> None:
        for mode in self.trips_per_mode:
            if mode not in MODES:
                raise ConfigError(f"unknown mode {mode!r} in trips_per_mode")
            if self.trips_per_mode[mode] < 0:
                raise ConfigError("trip counts must be non-negative")


@dataclass(frozen=True)
class GroundTruthTrip:
    trip_id: str
    device_id: str
    mode: str
    start_time: float
    end_time: float


def mode_counts_from_mix(total: int, mix: dict[str, float]) -> dict[str, int]:
    """Largest-remainder apportionment of ``total`` trips over modes."""
    weights = {m: mix.get(m, 0.0) for m in MODES}
    wsum = sum(weights.values())
    if total < 0 or wsum <= 0:
        raise ConfigError("total must be >= 0 and mix weights must sum > 0")
    quotas = {m: total * w / wsum for m, w in weights.items()}
    counts = {m: int(math.floor(q)) for m, q in quotas.items()}
    remainders = sorted(((quotas[m] - counts[m], -MODES.index(m), m)
                         for m in MODES), reverse=True)
    for _, _, m in remainders[:total - sum(counts.values())]:
        counts[m] += 1
    return counts


def _offset_latlon(p: LatLon, north_m: float, east_m: float) -> LatLon:
    lat = p[0] + north_m * _DEG_PER_M_LAT
    lon = p[1] + east_m * _DEG_PER_M_LAT / max(0.01, math.cos(math.radians(p[0])))
    return (lat, lon)


class _PolylinePath:
    """Arc-length parametrized position along a polyline."""

    def __init__(self, vertices: Sequence[LatLon]):
        self.vertices = list(vertices)
        self.cum = [0.0]
        for a, b in zip(vertices, vertices[1:]):
            self.cum.append(self.cum[-1] + haversine_distance(a, b))

    @property
    def length(self) -> float:
        return self.cum[-1]

    def at(self, s: float) -> LatLon:
        s = min(max(s, 0.0), self.length)
        i = 1
        while i < len(self.cum) - 1 and self.cum[i] < s:
            i += 1
        seg_len = self.cum[i] - self.cum[i - 1]
        t = 0.0 if seg_len == 0 else (s - self.cum[i - 1]) / seg_len
        a, b = self.vertices[i - 1], self.vertices[i]
        return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))


def _route_positions(mode: str, length_m: float,
                     polylines: dict[str, list[list[LatLon]]],
                     bbox: tuple[float, float, float, float],
                     rng: np.random.Generator):
    """Yield positions along the trip route at 1 m arc-length resolution.

    Returns a callable distance->LatLon and the usable trip length.
    """
    if mode == "Walk":
        lat = rng.uniform(bbox[0], bbox[1])
        lon = rng.uniform(bbox[2], bbox[3])
        heading = rng.uniform(0, 2 * math.pi)

        def walk_at(s: float, _o=(lat, lon), _h=heading) -> LatLon:
            # gentle sinusoidal wander around the base heading
            h = _h + 0.3 * math.sin(s / 400.0)
            return _offset_latlon(_o, s * math.cos(h), s * math.sin(h))

        return walk_at, length_m
    tag = MODE_NETWORK[mode]
    lines = polylines.get(tag) or []
    if not lines:
        raise ConfigError(f"{mode} trips need a {tag} network")
    weights = np.array([max(1.0, _PolylinePath(l).length) for l in lines])
    line = lines[int(rng.choice(len(lines), p=weights / weights.sum()))]
    path = _PolylinePath(line)
    usable = min(length_m, path.length)
    start = rng.uniform(0.0, max(0.0, path.length - usable))
    forward = bool(rng.integers(0, 2))

    def route_at(s: float) -> LatLon:
        return path.at(start + s if forward else start + usable - s)

    return route_at, usable


def _network_bbox(polylines: dict[str, list[list[LatLon]]],
                  ) -> tuple[float, float, float, float]:
    lats = [v[0] for lines in polylines.values() for l in lines for v in l]
    lons = [v[1] for lines in polylines.values() for l in lines for v in l]
    if not lats:
        return (38.80, 39.10, -77.20, -76.90)  # default study box
    return (min(lats), max(lats), min(lons), max(lons))


def generate_synthetic(spec: SyntheticSpec,
                       polylines: dict[str, list[list[LatLon]]],
                       ) -> tuple[list[LocationPoint], list[GroundTruthTrip]]:
    """Generate labeled points and ground-truth trips, one device per trip.

    Each device dwells at the trip origin, travels, then dwells at the
    destination, so both stay-region and threshold trip extraction can be
    run against the output.
    """
    rng = np.random.default_rng(spec.seed)
    bbox = _network_bbox(polylines)
    points: list[LocationPoint] = []
    truths: list[GroundTruthTrip] = []
    jobs = [mode for mode in MODES
            for _ in range(spec.trips_per_mode.get(mode, 0))]
    for dev_no, mode in enumerate(jobs):
        device_id = f"dev{dev_no:05d}"
        trip_id = f"gt-{dev_no:05d}"
        t0 = spec.base_timestamp + dev_no * 86_400.0 / max(1, len(jobs))
        dev_points, truth = _generate_device(
            device_id, trip_id, mode, t0, spec, polylines, bbox, rng)
        points.extend(dev_points)
        truths.append(truth)
    return points, truths


def _stationary_fixes(device_id: str, where: LatLon, t_start: float,
                      duration: float, spec: SyntheticSpec,
                      rng: np.random.Generator) -> list[LocationPoint]:
    out = []
    t = t_start
    while t <= t_start + duration:
        pos = _offset_latlon(where, rng.normal(0, 2.0), rng.normal(0, 2.0))
        out.append(LocationPoint(
            device_id=device_id, latitude=pos[0], longitude=pos[1],
            timestamp=t, accuracy=float(rng.uniform(5, 30)),
            instantaneous_speed=0.0))
        t += spec.dwell_interval
    return out


def _generate_device(device_id: str, trip_id: str, mode: str, t0: float,
                     spec: SyntheticSpec,
                     polylines: dict[str, list[list[LatLon]]],
                     bbox, rng: np.random.Generator,
                     ) -> tuple[list[LocationPoint], GroundTruthTrip]:
    length = rng.uniform(*spec.trip_length_range[mode])
    route_at, usable = _route_positions(mode, length, polylines, bbox, rng)
    mean_speed = rng.uniform(*spec.speed_range[mode])
    noise = spec.metro_noise_sigma if mode == "Metro" else spec.gps_noise_sigma

    # moving fixes
    moving: list[tuple[float, LatLon, float]] = []  # (t, pos, speed)
    s = 0.0
    t = t0
    next_bus_stop = t + rng.uniform(*spec.bus_stop_every)
    while s < usable:
        speed = max(0.3, rng.normal(mean_speed, 0.15 * mean_speed))
        pos = route_at(s)
        pos = _offset_latlon(pos, rng.normal(0, noise), rng.normal(0, noise))
        moving.append((t, pos, speed))
        if mode == "Bus" and t >= next_bus_stop:
            t += rng.uniform(*spec.bus_stop_dwell)
            next_bus_stop = t + rng.uniform(*spec.bus_stop_every)
        s += speed * spec.record_interval
        t += spec.record_interval

    # observation dropout (signal loss); endpoints always kept
    if mode == "Metro":
        dropout = rng.uniform(*spec.metro_dropout)
    elif mode == "Car":
        dropout = rng.uniform(*spec.car_dropout)
    else:
        dropout = 0.0
    kept = [m for i, m in enumerate(moving)
            if i in (0, len(moving) - 1) or rng.uniform() >= dropout]

    trip_start = kept[0][0]
    trip_end = kept[-1][0]
    pre_dwell = rng.uniform(*spec.dwell_range)
    post_dwell = rng.uniform(*spec.dwell_range)
    out = _stationary_fixes(device_id, kept[0][1], trip_start - pre_dwell,
                            pre_dwell - spec.record_interval, spec, rng)
    for t, pos, speed in kept:
        out.append(LocationPoint(
            device_id=device_id, latitude=pos[0], longitude=pos[1],
            timestamp=t, accuracy=float(rng.uniform(5, 30)),
            instantaneous_speed=float(speed)))
    out.extend(_stationary_fixes(device_id, kept[-1][1],
                                 trip_end + spec.record_interval, post_dwell,
                                 spec, rng))
    truth = GroundTruthTrip(trip_id=trip_id, device_id=device_id, mode=mode,
                            start_time=trip_start, end_time=trip_end)
    return out, truth


# ---------------------------------------------------------------------------
# Stylized demo networks


def demo_network_polylines() -> dict[str, list[list[LatLon]]]:
    """Stylized metro-area networks in a ~33 x 26 km box.

    Highways run east-west, bus lines north-south, rail lines diagonally,
    so each mode's trips hug a geometrically distinct line family.
    """
    lat_lo, lat_hi = 38.80, 39.10
    lon_lo, lon_hi = -77.20, -76.90
    highway = [[(lat, lon_lo), (lat, lon_hi)]
               for lat in np.arange(38.82, 39.09, 0.04)]
    bus = [[(lat_lo, lon), (lat_hi, lon)]
           for lon in np.arange(-77.18, -76.91, 0.04)]
    rail = []
    for off in np.arange(0.0, 0.11, 0.025):
        rail.append([(lat_lo, float(lon_lo + off)),
                     (lat_hi, float(lon_lo + 0.2 + off))])
    return {"highway": highway, "bus": bus, "rail": rail}


def write_demo_networks(out_dir) -> dict[str, str]:
    """Write the demo networks to disk: GeoJSON for rail and highway,
    GTFS shapes.txt for bus.  Returns the written paths per mode tag."""
    import json
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    polylines = demo_network_polylines()
    paths: dict[str, str] = {}
    for tag in ("rail", "highway"):
        doc = {"type": "FeatureCollection", "features": [
            {"type": "Feature", "properties": {"mode": tag},
             "geometry": {"type": "LineString",
                          "coordinates": [[lon, lat] for lat, lon in line]}}
            for line in polylines[tag]]}
        path = out_dir / f"{tag}.geojson"
        path.write_text(json.dumps(doc))
        paths[tag] = str(path)
    shapes_path = out_dir / "bus_shapes.txt"
    with open(shapes_path, "w") as fh:
        fh.write("shape_id,shape_pt_lat,shape_pt_lon,shape_pt_sequence\n")
        for i, line in enumerate(polylines["bus"]):
            for j, (lat, lon) in enumerate(line):
                fh.write(f"bus{i:03d},{lat:.6f},{lon:.6f},{j}\n")
    paths["bus"] = str(shapes_path)
    return paths
