"""Demand-side aggregation: mode shares and trip time/length distributions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import trajectory_features
from .trips import MODES, Trip

METRICS = ("trip_time", "trip_length")


@dataclass
class DemandSummary:
    """Per-mode counts, shares, and optional per-mode histograms."""

    counts: dict[str, int]
    shares: dict[str, float]
    total: int
    histograms: dict[str, np.ndarray] = field(default_factory=dict)
    bin_edges: Optional[np.ndarray] = None


def mode_shares(trips: Sequence[Trip]) -> DemandSummary:
    """Trip counts and share of total per mode; every trip must be labeled."""
    if not trips:
        raise ValueError("mode_shares needs at least one trip")
    counts = {m: 0 for m in MODES}
    for t in trips:
        if t.mode_label is None:
            raise ValueError(f"trip {t.trip_id} has no mode label")
        counts[t.mode_label] += 1
    total = len(trips)
    shares = {m: counts[m] / total for m in MODES}
    return DemandSummary(counts=counts, shares=shares, total=total)


def _metric_value(trip: Trip, metric: str) -> float:
    if metric == "trip_time":
        return trip.duration
    if metric == "trip_length":
        return trajectory_features(trip).trip_distance
    raise ValueError(f"unknown metric {metric!r}")


def _histogram(values: Sequence[float], edges: np.ndarray) -> np.ndarray:
    """Bin counts with open-ended first/last bins for out-of-range values."""
    counts = np.zeros(len(edges) - 1, dtype=int)
    for v in values:
        i = int(np.searchsorted(edges, v, side="right")) - 1
        counts[min(max(i, 0), len(counts) - 1)] += 1
    return counts


@dataclass
class DistributionReport:
    metric: str
    bin_edges: np.ndarray
    counts: dict[str, np.ndarray]  # per mode
    proportions: dict[str, np.ndarray]
    # populated when a reference histogram is supplied:
    reference: Optional[dict[str, np.ndarray]] = None
    abs_diff: Optional[dict[str, np.ndarray]] = None
    tv_distance: Optional[dict[str, float]] = None


def distribution_report(trips: Sequence[Trip], metric: str,
                        bin_edges: Sequence[float],
                        reference: Optional[dict[str, np.ndarray]] = None,
                        ) -> DistributionReport:
    """Per-mode histograms of trip time or length, optionally compared to a
    reference distribution (per-bin absolute difference and total-variation
    distance per mode)."""
    edges = np.asarray(bin_edges, dtype=float)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    values: dict[str, list[float]] = {m: [] for m in MODES}
    for t in trips:
        if t.mode_label is None:
            raise ValueError(f"trip {t.trip_id} has no mode label")
        values[t.mode_label].append(_metric_value(t, metric))
    counts = {m: _histogram(vs, edges) for m, vs in values.items()}
    proportions = {
        m: (c / c.sum() if c.sum() else np.zeros_like(c, dtype=float))
        for m, c in counts.items()}
    report = DistributionReport(metric=metric, bin_edges=edges,
                                counts=counts, proportions=proportions)
    if reference is not None:
        report.reference = {m: np.asarray(reference.get(m, np.zeros(len(edges) - 1)),
                                          dtype=float) for m in MODES}
        report.abs_diff = {m: np.abs(proportions[m] - report.reference[m])
                           for m in MODES}
        report.tv_distance = {m: float(report.abs_diff[m].sum() / 2.0)
                              for m in MODES}
    return report
