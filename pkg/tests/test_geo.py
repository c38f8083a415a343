import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modeforge.errors import InvalidCoordinateError, UndefinedSpeedError
from modeforge.geo import (
    EARTH_RADIUS_M,
    GeoSegment,
    LocationPoint,
    PointSequence,
    haversine_distance,
    pairwise_speed,
    segment_point_distance,
    sequence_speeds,
)

latitudes = st.floats(-90, 90)
longitudes = st.floats(-180, 180)
latlon = st.tuples(latitudes, longitudes)


class TestHaversine:
    def test_identical_points(self):
        assert haversine_distance((38.9, -77.0), (38.9, -77.0)) == 0.0

    def test_one_degree_longitude_at_equator(self):
        # spherical law of cosines by hand: R * radians(1)
        expected = EARTH_RADIUS_M * math.radians(1.0)
        assert expected == pytest.approx(111194.93, abs=0.01)
        assert haversine_distance((0.0, 0.0), (0.0, 1.0)) == \
            pytest.approx(expected, abs=0.01)

    def test_symmetry_random_pairs(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            a = (rng.uniform(-90, 90), rng.uniform(-180, 180))
            b = (rng.uniform(-90, 90), rng.uniform(-180, 180))
            assert haversine_distance(a, b) == haversine_distance(b, a)

    @given(latlon, latlon, latlon)
    @settings(max_examples=200)
    def test_triangle_inequality(self, a, b, c):
        ab = haversine_distance(a, b)
        bc = haversine_distance(b, c)
        ac = haversine_distance(a, c)
        assert ac <= ab + bc + 1e-6 * max(ab + bc, 1.0)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidCoordinateError):
            haversine_distance((float("nan"), 0.0), (0.0, 0.0))
        with pytest.raises(InvalidCoordinateError):
            haversine_distance((91.0, 0.0), (0.0, 0.0))


class TestSegmentPointDistance:
    def test_point_on_segment_midpoint(self):
        s = GeoSegment((38.90, -77.10), (38.90, -77.00))
        assert segment_point_distance((38.90, -77.05), s) == \
            pytest.approx(0.0, abs=1e-6)

    def test_perpendicular_foot(self):
        # p sits 500 m north of a long east-west segment
        s = GeoSegment((38.90, -77.20), (38.90, -76.90))
        dlat = 500.0 / EARTH_RADIUS_M * 180.0 / math.pi
        p = (38.90 + dlat, -77.05)
        got = segment_point_distance(p, s)
        # brute-force oracle: minimum haversine over 10^6 sampled points
        ts = np.linspace(0.0, 1.0, 1_000_000)
        lats = s.start[0] + ts * (s.end[0] - s.start[0])
        lons = s.start[1] + ts * (s.end[1] - s.start[1])
        lat1, lon1 = math.radians(p[0]), math.radians(p[1])
        lat2 = np.radians(lats)
        lon2 = np.radians(lons)
        h = np.sin((lat2 - lat1) / 2) ** 2 \
            + math.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
        brute = float((2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(h))).min())
        assert got == pytest.approx(500.0, abs=0.5)
        assert got == pytest.approx(brute, abs=0.5)

    def test_beyond_end_equals_endpoint_distance(self):
        s = GeoSegment((38.90, -77.10), (38.90, -77.05))
        p = (38.90, -77.00)  # east of the east endpoint
        want = haversine_distance(p, s.end)
        assert segment_point_distance(p, s) == pytest.approx(want, rel=1e-3)

    def test_degenerate_segment_is_point_distance(self):
        s = GeoSegment((38.90, -77.10), (38.90, -77.10))
        p = (38.90, -77.05)
        want = haversine_distance(p, s.start)
        assert segment_point_distance(p, s) == pytest.approx(want, rel=1e-3)

    def test_never_exceeds_endpoint_distances(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            lat0 = rng.uniform(-60, 60)
            s = GeoSegment((lat0 + rng.uniform(-0.1, 0.1),
                            rng.uniform(-1, 1)),
                           (lat0 + rng.uniform(-0.1, 0.1),
                            rng.uniform(-1, 1)))
            p = (lat0 + rng.uniform(-0.1, 0.1), rng.uniform(-1, 1))
            d = segment_point_distance(p, s)
            cap = min(haversine_distance(p, s.start),
                      haversine_distance(p, s.end))
            assert d <= cap * (1 + 1e-9) + 1e-9


def _pt(device="d", lat=38.9, lon=-77.0, t=0.0, speed=None, acc=None):
    return LocationPoint(device_id=device, latitude=lat, longitude=lon,
                         timestamp=t, accuracy=acc,
                         instantaneous_speed=speed)


class TestPairwiseSpeed:
    def test_thousand_meters_hundred_seconds(self):
        dlat = 1000.0 / EARTH_RADIUS_M * 180.0 / math.pi
        a = _pt(t=0.0)
        b = _pt(lat=38.9 + dlat, t=100.0)
        assert pairwise_speed(a, b) == pytest.approx(10.0, rel=1e-6)

    def test_stationary(self):
        assert pairwise_speed(_pt(t=0.0), _pt(t=60.0)) == 0.0

    def test_equal_timestamps_raise(self):
        with pytest.raises(UndefinedSpeedError):
            pairwise_speed(_pt(t=5.0), _pt(t=5.0))

    def test_uses_positive_duration_only(self):
        a = _pt(t=0.0)
        b = _pt(lat=38.91, t=100.0)
        with pytest.raises(UndefinedSpeedError):
            pairwise_speed(b, a)  # reversed order is an error, not negative


class TestLocationPoint:
    def test_range_validation(self):
        with pytest.raises(InvalidCoordinateError):
            _pt(lat=90.5)
        with pytest.raises(InvalidCoordinateError):
            _pt(lon=-180.5)

    def test_negative_accuracy_rejected(self):
        with pytest.raises(InvalidCoordinateError):
            _pt(acc=-1.0)
        with pytest.raises(InvalidCoordinateError):
            _pt(speed=float("inf"))


class TestPointSequence:
    def test_sorts_and_dedups_keeping_first(self):
        pts = [_pt(t=10.0, lat=38.91), _pt(t=5.0), _pt(t=10.0, lat=38.92)]
        seq = PointSequence(device_id="d", points=pts)
        assert [p.timestamp for p in seq] == [5.0, 10.0]
        assert seq.points[1].latitude == 38.91  # first record kept

    def test_device_mismatch_rejected(self):
        with pytest.raises(ValueError):
            PointSequence(device_id="other", points=[_pt()])

    def test_sequence_speeds_fallback(self):
        dlat = 300.0 / EARTH_RADIUS_M * 180.0 / math.pi
        pts = [_pt(t=0.0, speed=2.5),
               _pt(t=30.0, lat=38.9 + dlat),  # no instantaneous speed
               _pt(t=60.0, lat=38.9 + dlat, speed=0.0)]
        speeds = sequence_speeds(pts)
        assert speeds[0] == 2.5
        assert speeds[1] == pytest.approx(10.0, rel=1e-6)
        assert speeds[2] == 0.0
