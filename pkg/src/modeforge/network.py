"""Modal network geometries (rail / bus / highway) behind a grid index.

Polylines from GeoJSON or GTFS ``shapes.txt`` are decomposed into straight
segments.  A uniform lat/lon grid maps each cell to the segments whose
bounding box overlaps it; nearest-segment queries expand outward ring by
ring and are guaranteed to return exactly the linear-scan answer (same
distance, same segment, ties broken by lowest segment index).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyNetworkError, NetworkParseError
from .geo import EARTH_RADIUS_M, GeoSegment, LatLon, segments_point_distance

MODE_TAGS = ("rail", "bus", "highway")

_METERS_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0


class ModalNetwork:
    """Immutable set of mode-tagged segments with a uniform grid index."""

    def __init__(self, mode_tag: str, segments: Sequence[GeoSegment],
                 cell_size_deg: float = 0.01):
        if mode_tag not in MODE_TAGS:
            raise ValueError(f"unknown mode tag {mode_tag!r}")
        if cell_size_deg <= 0:
            raise ValueError("cell_size_deg must be > 0")
        self.mode_tag = mode_tag
        self.segments = list(segments)
        self.cell_size_deg = cell_size_deg
        n = len(self.segments)
        self._lat1 = np.array([s.start[0] for s in self.segments])
        self._lon1 = np.array([s.start[1] for s in self.segments])
        self._lat2 = np.array([s.end[0] for s in self.segments])
        self._lon2 = np.array([s.end[1] for s in self.segments])
        self._grid: dict[tuple[int, int], list[int]] = {}
        if n:
            lat_lo = np.minimum(self._lat1, self._lat2)
            lat_hi = np.maximum(self._lat1, self._lat2)
            lon_lo = np.minimum(self._lon1, self._lon2)
            lon_hi = np.maximum(self._lon1, self._lon2)
            for idx in range(n):
                for ci in range(self._cell(lat_lo[idx]),
                                self._cell(lat_hi[idx]) + 1):
                    for cj in range(self._cell(lon_lo[idx]),
                                    self._cell(lon_hi[idx]) + 1):
                        self._grid.setdefault((ci, cj), []).append(idx)
            self._ci_min = self._cell(float(lat_lo.min()))
            self._ci_max = self._cell(float(lat_hi.max()))
            self._cj_min = self._cell(float(lon_lo.min()))
            self._cj_max = self._cell(float(lon_hi.max()))

    def __len__(self) -> int:
        return len(self.segments)

    def _cell(self, coord: float) -> int:
        return int(math.floor(coord / self.cell_size_deg))

    def _distances(self, p: LatLon, idx: np.ndarray) -> np.ndarray:
        return segments_point_distance(
            p, self._lat1[idx], self._lon1[idx],
            self._lat2[idx], self._lon2[idx])

    def nearest_segment_linear(self, p: LatLon) -> tuple[float, int]:
        """Linear-scan oracle: (distance_m, segment index)."""
        if not self.segments:
            raise EmptyNetworkError(f"{self.mode_tag} network has no segments")
        d = self._distances(p, np.arange(len(self.segments)))
        best = int(np.argmin(d))  # argmin breaks ties by lowest index
        return float(d[best]), best

    def nearest_segment(self, p: LatLon) -> tuple[float, int]:
        """Grid-accelerated nearest segment, identical to the linear scan.

        Candidate cells are visited in expanding Chebyshev rings around the
        query cell; the search stops once the best distance found cannot be
        beaten by any segment registered only in farther rings.
        """
        if not self.segments:
            raise EmptyNetworkError(f"{self.mode_tag} network has no segments")
        ci = self._cell(p[0])
        cj = self._cell(p[1])
        # conservative meters-per-degree lower bound at this latitude
        scale = _METERS_PER_DEG * min(1.0, math.cos(math.radians(p[0])))
        max_ring = max(abs(ci - self._ci_min), abs(ci - self._ci_max),
                       abs(cj - self._cj_min), abs(cj - self._cj_max))
        best_d = math.inf
        best_idx = -1
        seen: set[int] = set()
        for ring in range(max_ring + 1):
            if best_idx >= 0 and scale > 0:
                # segments in ring k are at least (k-1)*cell away in degrees
                lower_bound = (ring - 1) * self.cell_size_deg * scale
                if lower_bound > best_d:
                    break
            cand: list[int] = []
            for ii, jj in _ring_cells(ci, cj, ring):
                for idx in self._grid.get((ii, jj), ()):
                    if idx not in seen:
                        seen.add(idx)
                        cand.append(idx)
            if not cand:
                continue
            idx_arr = np.array(sorted(cand))
            d = self._distances(p, idx_arr)
            k = int(np.argmin(d))
            if d[k] < best_d or (d[k] == best_d and idx_arr[k] < best_idx):
                best_d = float(d[k])
                best_idx = int(idx_arr[k])
        return best_d, best_idx


def _ring_cells(ci: int, cj: int, ring: int) -> Iterable[tuple[int, int]]:
    if ring == 0:
        yield (ci, cj)
        return
    for jj in range(cj - ring, cj + ring + 1):
        yield (ci - ring, jj)
        yield (ci + ring, jj)
    for ii in range(ci - ring + 1, ci + ring):
        yield (ii, cj - ring)
        yield (ii, cj + ring)


def _polyline_segments(vertices: Sequence[LatLon]) -> list[GeoSegment]:
    return [GeoSegment(start=a, end=b)
            for a, b in zip(vertices, vertices[1:]) if a != b]


def geojson_polylines(path: str | Path) -> list[list[LatLon]]:
    """Vertex lists of every LineString / MultiLineString in a GeoJSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise NetworkParseError(f"{path}: cannot read GeoJSON: {exc}") from exc
    features = doc.get("features", [doc] if "geometry" in doc else [])
    polylines: list[list[LatLon]] = []
    for i, feat in enumerate(features):
        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        coords = geom.get("coordinates")
        try:
            if gtype == "LineString":
                lines = [coords]
            elif gtype == "MultiLineString":
                lines = coords
            else:
                raise ValueError(f"unsupported geometry type {gtype!r}")
            for line in lines:
                # GeoJSON order is (lon, lat)
                polylines.append([(float(lat), float(lon))
                                  for lon, lat in line])
        except (TypeError, ValueError) as exc:
            raise NetworkParseError(
                f"{path}: feature {i}: {exc}") from exc
    return polylines


def gtfs_shape_polylines(path: str | Path) -> list[list[LatLon]]:
    """Vertex lists from a GTFS shapes.txt, one per shape_id.

    Rows are grouped by shape_id and sorted by shape_pt_sequence, so
    out-of-order files are handled.
    """
    path = Path(path)
    shapes: dict[str, list[tuple[int, float, float]]] = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row_no, row in enumerate(reader):
                try:
                    shapes.setdefault(row["shape_id"], []).append((
                        int(row["shape_pt_sequence"]),
                        float(row["shape_pt_lat"]),
                        float(row["shape_pt_lon"]),
                    ))
                except (KeyError, TypeError, ValueError) as exc:
                    raise NetworkParseError(
                        f"{path}: row {row_no}: {exc}") from exc
    except OSError as exc:
        raise NetworkParseError(f"{path}: cannot read shapes: {exc}") from exc
    return [[(lat, lon) for _, lat, lon in sorted(shapes[sid])]
            for sid in sorted(shapes)]


def read_polylines(path: str | Path) -> list[list[LatLon]]:
    """Dispatch on file type: GeoJSON by extension, else GTFS shapes CSV."""
    suffix = Path(path).suffix.lower()
    if suffix in (".geojson", ".json"):
        return geojson_polylines(path)
    return gtfs_shape_polylines(path)


def load_geojson(path: str | Path, mode_tag: str,
                 cell_size_deg: float = 0.01) -> ModalNetwork:
    """Load LineString / MultiLineString features from a GeoJSON file."""
    segments: list[GeoSegment] = []
    for line in geojson_polylines(path):
        segments.extend(_polyline_segments(line))
    return ModalNetwork(mode_tag, segments, cell_size_deg)


def load_gtfs_shapes(path: str | Path, mode_tag: str,
                     cell_size_deg: float = 0.01) -> ModalNetwork:
    """Load polylines from a GTFS shapes.txt file."""
    segments: list[GeoSegment] = []
    for line in gtfs_shape_polylines(path):
        segments.extend(_polyline_segments(line))
    return ModalNetwork(mode_tag, segments, cell_size_deg)


def load_network(path: str | Path, mode_tag: str,
                 cell_size_deg: float = 0.01) -> ModalNetwork:
    """Dispatch on file type: GeoJSON by extension, else GTFS shapes CSV."""
    suffix = Path(path).suffix.lower()
    if suffix in (".geojson", ".json"):
        return load_geojson(path, mode_tag, cell_size_deg)
    return load_gtfs_shapes(path, mode_tag, cell_size_deg)


def load_networks(rail_path: str | Path, bus_path: str | Path,
                  highway_path: str | Path,
                  cell_size_deg: float = 0.01,
                  ) -> tuple[ModalNetwork, ModalNetwork, ModalNetwork]:
    """Load the three modal networks used by the feature engine."""
    return (load_network(rail_path, "rail", cell_size_deg),
            load_network(bus_path, "bus", cell_size_deg),
            load_network(highway_path, "highway", cell_size_deg))
