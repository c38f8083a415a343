import json

import numpy as np
import pytest

from modeforge.errors import EmptyNetworkError, NetworkParseError
from modeforge.geo import GeoSegment, segment_point_distance
from modeforge.network import (
    ModalNetwork,
    geojson_polylines,
    gtfs_shape_polylines,
    load_network,
    load_networks,
)


def _write_geojson(path, lines):
    doc = {"type": "FeatureCollection",
           "features": [{"type": "Feature", "properties": {},
                         "geometry": {"type": "LineString",
                                      "coordinates": [[lon, lat]
                                                      for lat, lon in line]}}
                        for line in lines]}
    path.write_text(json.dumps(doc))
    return path


class TestGeoJsonLoader:
    def test_three_vertex_linestring_two_segments(self, tmp_path):
        p = _write_geojson(tmp_path / "rail.geojson",
                           [[(38.90, -77.05), (38.95, -77.00),
                             (39.00, -76.95)]])
        net = load_network(p, "rail")
        assert len(net) == 2
        assert net.segments[0] == GeoSegment((38.90, -77.05), (38.95, -77.00))
        assert net.segments[1] == GeoSegment((38.95, -77.00), (39.00, -76.95))

    def test_multilinestring(self, tmp_path):
        doc = {"type": "Feature",
               "geometry": {"type": "MultiLineString",
                            "coordinates": [[[-77.0, 38.9], [-77.0, 39.0]],
                                            [[-76.9, 38.9], [-76.9, 39.0]]]}}
        p = tmp_path / "net.json"
        p.write_text(json.dumps(doc))
        assert len(geojson_polylines(p)) == 2

    def test_repeated_vertices_dropped(self, tmp_path):
        p = _write_geojson(tmp_path / "r.geojson",
                           [[(38.9, -77.0), (38.9, -77.0), (39.0, -77.0)]])
        assert len(load_network(p, "rail")) == 1

    def test_bad_json_names_file(self, tmp_path):
        p = tmp_path / "broken.geojson"
        p.write_text("{not json")
        with pytest.raises(NetworkParseError, match="broken.geojson"):
            geojson_polylines(p)

    def test_unsupported_geometry_names_feature(self, tmp_path):
        doc = {"type": "FeatureCollection",
               "features": [{"type": "Feature",
                             "geometry": {"type": "Point",
                                          "coordinates": [-77.0, 38.9]}}]}
        p = tmp_path / "pt.geojson"
        p.write_text(json.dumps(doc))
        with pytest.raises(NetworkParseError, match="feature 0"):
            geojson_polylines(p)


GTFS_HEADER = "shape_id,shape_pt_lat,shape_pt_lon,shape_pt_sequence\n"


class TestGtfsLoader:
    def test_two_shapes_four_points_each(self, tmp_path):
        rows = []
        for sid in ("a", "b"):
            for k in range(4):
                rows.append(f"{sid},{38.9 + 0.01 * k},-77.0,{k}")
        p = tmp_path / "shapes.txt"
        p.write_text(GTFS_HEADER + "\n".join(rows) + "\n")
        net = load_network(p, "bus")
        assert len(net) == 6  # 3 segments per shape

    def test_out_of_order_sequences_sorted(self, tmp_path):
        p = tmp_path / "shapes.txt"
        p.write_text(GTFS_HEADER
                     + "s,38.92,-77.0,2\n"
                     + "s,38.90,-77.0,0\n"
                     + "s,38.91,-77.0,1\n")
        (line,) = gtfs_shape_polylines(p)
        assert line == [(38.90, -77.0), (38.91, -77.0), (38.92, -77.0)]

    def test_bad_row_names_file_and_row(self, tmp_path):
        p = tmp_path / "shapes.txt"
        p.write_text(GTFS_HEADER + "s,not-a-lat,-77.0,0\n")
        with pytest.raises(NetworkParseError, match="row 0"):
            gtfs_shape_polylines(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(NetworkParseError):
            gtfs_shape_polylines(tmp_path / "absent.txt")


class TestModalNetwork:
    def test_unknown_mode_tag_rejected(self):
        with pytest.raises(ValueError):
            ModalNetwork("tram", [])

    def test_empty_network_query_raises(self):
        net = ModalNetwork("rail", [])
        with pytest.raises(EmptyNetworkError):
            net.nearest_segment((38.9, -77.0))
        with pytest.raises(EmptyNetworkError):
            net.nearest_segment_linear((38.9, -77.0))

    def test_nearest_simple(self):
        net = ModalNetwork("rail", [
            GeoSegment((38.90, -77.10), (38.90, -77.00)),
            GeoSegment((39.00, -77.10), (39.00, -77.00)),
        ])
        d, idx = net.nearest_segment((38.91, -77.05))
        assert idx == 0
        want = segment_point_distance((38.91, -77.05), net.segments[0])
        assert d == want

    def test_grid_matches_linear_scan_bitwise(self):
        rng = np.random.default_rng(3)
        segs = []
        for _ in range(400):
            lat = rng.uniform(38.8, 39.1)
            lon = rng.uniform(-77.2, -76.9)
            segs.append(GeoSegment(
                (lat, lon),
                (lat + rng.uniform(-0.03, 0.03),
                 lon + rng.uniform(-0.03, 0.03))))
        for cell in (0.003, 0.01, 0.05):
            net = ModalNetwork("highway", segs, cell_size_deg=cell)
            for _ in range(300):
                p = (rng.uniform(38.7, 39.2), rng.uniform(-77.3, -76.8))
                assert net.nearest_segment(p) == net.nearest_segment_linear(p)

    def test_far_away_query_still_exact(self):
        net = ModalNetwork("rail", [
            GeoSegment((38.90, -77.00), (38.95, -77.00))])
        p = (45.0, -70.0)  # hundreds of km outside the grid extent
        assert net.nearest_segment(p) == net.nearest_segment_linear(p)

    def test_tie_breaks_to_lowest_index(self):
        # two identical segments: the linear argmin and the grid search
        # must both report index 0
        s = GeoSegment((38.90, -77.00), (38.95, -77.00))
        net = ModalNetwork("rail", [s, s])
        _, idx = net.nearest_segment((39.2, -77.0))
        assert idx == 0

    def test_load_networks_tuple(self, demo_network_dir):
        rail, bus, highway = load_networks(demo_network_dir["rail"],
                                           demo_network_dir["bus"],
                                           demo_network_dir["highway"])
        assert rail.mode_tag == "rail" and len(rail) > 0
        assert bus.mode_tag == "bus" and len(bus) > 0
        assert highway.mode_tag == "highway" and len(highway) > 0
