import math

import numpy as np
import pytest

from modeforge.demand import distribution_report, mode_shares
from modeforge.geo import EARTH_RADIUS_M, LocationPoint
from modeforge.trips import Trip

M_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0


def _trip(i, mode, duration=600.0, length=3000.0):
    pts = [
        LocationPoint(device_id=f"d{i}", latitude=38.9, longitude=-77.0,
                      timestamp=0.0),
        LocationPoint(device_id=f"d{i}", latitude=38.9 + length / M_PER_DEG,
                      longitude=-77.0, timestamp=duration),
    ]
    return Trip(trip_id=f"t{i}", device_id=f"d{i}", points=pts,
                mode_label=mode, label_source="imputed")


class TestModeShares:
    def test_survey_mix_counts(self):
        # 7600 / 590 / 770 / 1040 of 10000 trips
        trips = ([_trip(i, "Metro") for i in range(7600)]
                 + [_trip(7600 + i, "Walk") for i in range(590)]
                 + [_trip(8190 + i, "Bus") for i in range(770)]
                 + [_trip(8960 + i, "Car") for i in range(1040)])
        s = mode_shares(trips)
        assert s.total == 10000
        assert s.shares["Metro"] == pytest.approx(0.7600)
        assert s.shares["Walk"] == pytest.approx(0.0590)
        assert s.shares["Bus"] == pytest.approx(0.0770)
        assert s.shares["Car"] == pytest.approx(0.1040)
        assert sum(s.shares.values()) == pytest.approx(1.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mode_shares([])

    def test_unlabeled_rejected(self):
        t = _trip(0, "Car")
        t.mode_label = None
        with pytest.raises(ValueError):
            mode_shares([t])


class TestDistributionReport:
    EDGES = [0.0, 300.0, 600.0, 900.0]

    def test_time_binning(self):
        trips = [_trip(0, "Car", duration=100.0),
                 _trip(1, "Car", duration=450.0),
                 _trip(2, "Car", duration=450.0),
                 _trip(3, "Car", duration=850.0)]
        rep = distribution_report(trips, "trip_time", self.EDGES)
        np.testing.assert_array_equal(rep.counts["Car"], [1, 2, 1])
        np.testing.assert_allclose(rep.proportions["Car"],
                                   [0.25, 0.5, 0.25])
        np.testing.assert_array_equal(rep.counts["Walk"], [0, 0, 0])
        assert rep.proportions["Walk"].sum() == 0.0

    def test_open_ended_extreme_bins(self):
        trips = [_trip(0, "Bus", duration=5000.0)]  # beyond the last edge
        rep = distribution_report(trips, "trip_time", self.EDGES)
        np.testing.assert_array_equal(rep.counts["Bus"], [0, 0, 1])

    def test_length_metric_uses_travelled_distance(self):
        trips = [_trip(0, "Walk", length=1200.0)]
        rep = distribution_report(trips, "trip_length",
                                  [0.0, 1000.0, 2000.0])
        np.testing.assert_array_equal(rep.counts["Walk"], [0, 1])

    def test_reference_comparison_tv_distance(self):
        trips = [_trip(0, "Car", duration=100.0),
                 _trip(1, "Car", duration=450.0)]
        ref = {"Car": np.array([1.0, 0.0, 0.0])}
        rep = distribution_report(trips, "trip_time", self.EDGES,
                                  reference=ref)
        np.testing.assert_allclose(rep.abs_diff["Car"], [0.5, 0.5, 0.0])
        assert rep.tv_distance["Car"] == pytest.approx(0.5)
        # modes absent from the reference compare against all-zero bins
        assert rep.tv_distance["Walk"] == 0.0

    def test_identical_distributions_have_zero_tv(self):
        trips = [_trip(i, "Metro", duration=450.0) for i in range(5)]
        rep = distribution_report(trips, "trip_time", self.EDGES,
                                  reference={"Metro": [0.0, 1.0, 0.0]})
        assert rep.tv_distance["Metro"] == 0.0

    def test_non_increasing_edges_rejected(self):
        with pytest.raises(ValueError):
            distribution_report([_trip(0, "Car")], "trip_time",
                                [0.0, 300.0, 300.0])

    def test_unknown_metric_rejected(self):
        with pytest.raises(ValueError):
            distribution_report([_trip(0, "Car")], "speed", self.EDGES)
