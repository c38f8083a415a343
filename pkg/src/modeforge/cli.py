"""Command-line pipeline: one subcommand per stage plus a data generator.

    modeforge <filter|segment|features|train|evaluate|impute|report|synth>
              --config <path> [--threads N] [--seed S]

Stages exchange CSV files inside ``paths.output_dir``; all thresholds and
hyperparameters come from the TOML config.  ``MODEFORGE_LOG`` sets the log
level (DEBUG/INFO/WARNING/...).  Any failure exits nonzero with a message
naming the stage and offending file, and partial stage outputs are
removed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import baselines, demand, evaluation, fileio, plots, synth, widedeep
from .config import PipelineConfig, load_config, require_paths
from .errors import ConfigError, ModeforgeError
from .features import (
    TRAJECTORY_FEATURES,
    FeatureScaler,
    FeatureVector,
    apply_scaler,
    build_feature_vector,
    fit_scaler,
)
from .geo import group_by_device
from .network import load_network
from .trips import MODES, Trip, detect_stay_regions, filter_points, \
    split_by_stay_regions, split_by_thresholds

log = logging.getLogger("modeforge")

FILTERED_POINTS = "filtered_points.csv"
TRIPS_CSV = "trips.csv"
TRIP_POINTS_CSV = "trip_points.csv"
FEATURES_CSV = "features.csv"
MODEL_JSON = "model.json"
TRAIN_METRICS_CSV = "training_metrics.csv"
METRICS_CSV = "metrics.csv"
SUMMARY_JSON = "evaluation_summary.json"
CONFUSION_CSV = "confusion.csv"
LABELED_TRIPS_CSV = "labeled_trips.csv"


class Stage:
    """Tracks files written by one stage so failures leave no partials."""

    def __init__(self, cfg: PipelineConfig, name: str):
        self.name = name
        self.out_dir = Path(cfg.paths.output_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.written.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)


def _selected_dim(include_network: bool) -> int:
    return len(TRAJECTORY_FEATURES) + (3 if include_network else 0)


def _labeled_matrix(vectors, include_network: bool):
    labeled = [v for v in vectors if v.label is not None]
    if not labeled:
        raise ConfigError("no labeled feature rows; attach ground truth first")
    raw = np.stack([v.raw for v in labeled])[:, :_selected_dim(include_network)]
    y = np.array([MODES.index(v.label) for v in labeled])
    return labeled, raw, y


def cmd_filter(cfg: PipelineConfig, stage: Stage, args) -> None:
    require_paths(cfg, "points")
    points = fileio.read_points(cfg.paths.points)
    kept = []
    for seq in group_by_device(points):
        kept.extend(filter_points(seq, cfg.filter).points)
    log.info("filter: kept %d of %d points", len(kept), len(points))
    fileio.write_points(kept, stage.path(FILTERED_POINTS))


def _attach_ground_truth(trips: list[Trip], cfg: PipelineConfig) -> None:
    if cfg.paths.ground_truth is None:
        return
    truths = fileio.read_ground_truth(cfg.paths.ground_truth)
    by_device: dict[str, list] = {}
    for t in truths:
        by_device.setdefault(t.device_id, []).append(t)
    n = 0
    for trip in trips:
        for t in by_device.get(trip.device_id, ()):
            overlap = min(trip.end_time, t.end_time) \
                - max(trip.start_time, t.start_time)
            if overlap > 0.5 * (t.end_time - t.start_time):
                trip.mode_label = t.mode
                trip.label_source = "ground_truth"
                n += 1
                break
    log.info("segment: labeled %d of %d trips from ground truth",
             n, len(trips))


def cmd_segment(cfg: PipelineConfig, stage: Stage, args) -> None:
    src = Path(cfg.paths.output_dir) / FILTERED_POINTS
    if not src.exists():
        raise ConfigError(f"segment: {src} not found; run 'filter' first")
    points = fileio.read_points(src)
    trips: list[Trip] = []
    for seq in group_by_device(points):
        if cfg.split.method == "stay_region":
            regions = detect_stay_regions(seq, cfg.stay_region)
            trips.extend(split_by_stay_regions(seq, regions))
        else:
            trips.extend(split_by_thresholds(seq, cfg.trip_split))
    _attach_ground_truth(trips, cfg)
    log.info("segment: %d trips from %d points", len(trips), len(points))
    fileio.write_trips(trips, stage.path(TRIPS_CSV),
                       stage.path(TRIP_POINTS_CSV))


def cmd_features(cfg: PipelineConfig, stage: Stage, args) -> None:
    require_paths(cfg, "rail_network", "bus_network", "highway_network")
    out_dir = Path(cfg.paths.output_dir)
    trips = fileio.read_trips(out_dir / TRIP_POINTS_CSV, out_dir / TRIPS_CSV)
    cell = cfg.features.grid_cell_size
    rail = load_network(cfg.paths.rail_network, "rail", cell)
    bus = load_network(cfg.paths.bus_network, "bus", cell)
    highway = load_network(cfg.paths.highway_network, "highway", cell)

    def one(trip: Trip) -> FeatureVector:
        return build_feature_vector(trip, rail, bus, highway)

    if cfg.run.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.run.threads) as pool:
            vectors = list(pool.map(one, trips))  # map preserves order
    else:
        vectors = [one(t) for t in trips]
    # whole-file normalization for inspection; training refits per split
    if vectors:
        apply_scaler(fit_scaler(vectors), vectors)
    log.info("features: %d vectors", len(vectors))
    fileio.write_features(vectors, stage.path(FEATURES_CSV))


def _train_one(kind: str, x, y, cfg: PipelineConfig, scaler: FeatureScaler,
               epoch_log: Optional[list] = None):
    if kind == "wide_deep":
        return widedeep.train(x, y, cfg.train, scaler=scaler,
                              epoch_log=epoch_log)
    if kind == "glm":
        model = baselines.train_glm(x, y, cfg.train, scaler=scaler)
        return model
    if kind == "tree":
        return baselines.train_tree(x, y, cfg.tree, scaler=scaler)
    if kind == "bagging":
        return baselines.train_bagging(x, y, cfg.tree, scaler=scaler)
    if kind == "random_forest":
        return baselines.train_random_forest(x, y, cfg.tree, scaler=scaler)
    raise ConfigError(f"unknown model kind {kind!r}")


def cmd_train(cfg: PipelineConfig, stage: Stage, args) -> None:
    out_dir = Path(cfg.paths.output_dir)
    vectors = fileio.read_features(out_dir / FEATURES_CSV)
    include_net = cfg.features.include_network
    _, raw, y = _labeled_matrix(vectors, include_net)
    scaler = FeatureScaler(minimum=raw.min(axis=0), maximum=raw.max(axis=0))
    x = scaler.transform(raw)
    kind = cfg.run.model_kind
    epoch_log: list = []
    model = _train_one(kind, x, y, cfg, scaler,
                       epoch_log if kind in ("wide_deep", "glm") else None)
    model.metadata["include_network"] = include_net
    model.metadata.setdefault("kind", kind)
    model_path = cfg.paths.model or stage.path(MODEL_JSON)
    if kind in ("wide_deep", "glm"):
        widedeep.save_model(model, model_path)
        with open(stage.path(TRAIN_METRICS_CSV), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss"])
            for epoch, loss in epoch_log:
                writer.writerow([epoch, repr(loss)])
    else:
        baselines.save_forest(model, model_path)
    log.info("train: %s model on %d samples -> %s", kind, len(y), model_path)


def cmd_evaluate(cfg: PipelineConfig, stage: Stage, args) -> None:
    out_dir = Path(cfg.paths.output_dir)
    vectors = fileio.read_features(out_dir / FEATURES_CSV)
    kind = cfg.run.model_kind
    result = evaluation.cross_validate(
        vectors, kind, cfg.evaluate, cfg.train, cfg.tree,
        include_network=cfg.features.include_network)
    with open(stage.path(METRICS_CSV), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "fold", "model", "n_test", "n_correct",
                         "accuracy", "total_loss"])
        for c in result.cells:
            writer.writerow([c.seed, c.fold, c.model_kind, c.n_test,
                             c.n_correct, repr(c.accuracy),
                             repr(c.total_loss)])
    precision, recall, accuracy = evaluation.precision_recall(result.confusion)
    with open(stage.path(CONFUSION_CSV), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["reported\\detected", *MODES, "recall_pct"])
        for i, mode in enumerate(MODES):
            r = recall[i]
            writer.writerow([mode, *result.confusion.counts[i].tolist(),
                             "" if r is None else f"{100 * r:.1f}"])
        writer.writerow(["precision_pct",
                         *["" if p is None else f"{100 * p:.1f}"
                           for p in precision],
                         f"{100 * accuracy:.1f}"])
    summary = {
        "model": kind,
        "total_loss": result.total_loss,
        "average_loss": result.average_loss,
        "average_accuracy": result.accuracy,
    }
    Path(stage.path(SUMMARY_JSON)).write_text(json.dumps(summary, indent=2))
    log.info("evaluate: %s accuracy %.4f", kind, result.accuracy)


def _load_any_model(path: Path):
    doc = json.loads(Path(path).read_text())
    if doc.get("kind") == "wide_deep":
        return widedeep.load_model(path)
    return baselines.load_forest(path)


def cmd_impute(cfg: PipelineConfig, stage: Stage, args) -> None:
    require_paths(cfg, "model")
    out_dir = Path(cfg.paths.output_dir)
    vectors = fileio.read_features(out_dir / FEATURES_CSV)
    trips = fileio.read_trips(out_dir / TRIP_POINTS_CSV, out_dir / TRIPS_CSV)
    model = _load_any_model(cfg.paths.model)
    if model.scaler is None:
        raise ConfigError("model file carries no scaler; cannot impute")
    include_net = bool(model.metadata.get("include_network", True))
    d = _selected_dim(include_net)
    by_id = {v.trip_id: v for v in vectors}
    labeled = []
    for trip in trips:
        v = by_id.get(trip.trip_id)
        if v is None:
            raise ConfigError(f"impute: no features for trip {trip.trip_id}")
        x = model.scaler.transform(v.raw[:d])
        pred = int(model.predict(x)[0])
        trip.mode_label = model.class_order[pred]
        trip.label_source = "imputed"
        labeled.append(trip)
    fileio.write_trips(labeled, stage.path(LABELED_TRIPS_CSV))
    log.info("impute: labeled %d trips", len(labeled))


def cmd_report(cfg: PipelineConfig, stage: Stage, args) -> None:
    out_dir = Path(cfg.paths.output_dir)
    trips = fileio.read_trips(out_dir / TRIP_POINTS_CSV,
                              out_dir / LABELED_TRIPS_CSV)
    trips = [t for t in trips if t.mode_label is not None]
    if not trips:
        raise ConfigError("report: no labeled trips; run 'impute' first")
    summary = demand.mode_shares(trips)
    with open(stage.path("mode_shares.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "trips", "share", "share_pct"])
        for m in MODES:
            writer.writerow([m, summary.counts[m], repr(summary.shares[m]),
                             f"{100 * summary.shares[m]:.1f}"])
        writer.writerow(["Total", summary.total, "1", "100.0"])
    plots.plot_mode_shares(summary, stage.path("mode_shares.png"))

    reference = None
    if cfg.paths.reference_histograms is not None:
        require_paths(cfg, "reference_histograms")
    tv_summary = {}
    for metric, edges in (("trip_time", cfg.report.time_bin_edges),
                          ("trip_length", cfg.report.length_bin_edges)):
        reference = None
        if cfg.paths.reference_histograms is not None:
            try:
                reference = fileio.read_reference_histograms(
                    cfg.paths.reference_histograms, edges)
            except ConfigError:
                reference = None  # reference matches only one metric's bins
        report = demand.distribution_report(trips, metric, edges, reference)
        with open(stage.path(f"distribution_{metric}.csv"), "w",
                  newline="") as fh:
            writer = csv.writer(fh)
            header = ["mode", "bin_lo", "bin_hi", "count", "proportion"]
            if report.reference is not None:
                header += ["ref_proportion", "abs_diff"]
            writer.writerow(header)
            for m in MODES:
                for b in range(len(edges) - 1):
                    row = [m, edges[b], edges[b + 1],
                           int(report.counts[m][b]),
                           repr(float(report.proportions[m][b]))]
                    if report.reference is not None:
                        row += [repr(float(report.reference[m][b])),
                                repr(float(report.abs_diff[m][b]))]
                    writer.writerow(row)
        if report.tv_distance is not None:
            tv_summary[metric] = report.tv_distance
        plots.plot_distributions(report,
                                 stage.path(f"distribution_{metric}.png"))
    if tv_summary:
        Path(stage.path("distribution_tv.json")).write_text(
            json.dumps(tv_summary, indent=2))
    log.info("report: %d trips, shares %s", summary.total,
             {m: round(summary.shares[m], 4) for m in MODES})


def cmd_synth(cfg: PipelineConfig, stage: Stage, args) -> None:
    sy = cfg.synthetic
    net_paths = (cfg.paths.rail_network, cfg.paths.bus_network,
                 cfg.paths.highway_network)
    if all(p is None for p in net_paths):
        # no networks configured: write the stylized demo networks
        demo_dir = Path(cfg.paths.output_dir) / "networks"
        written = synth.write_demo_networks(demo_dir)
        log.info("synth: wrote demo networks to %s", demo_dir)
        from .network import read_polylines
        polylines = {tag: read_polylines(p) for tag, p in written.items()}
    else:
        require_paths(cfg, "rail_network", "bus_network", "highway_network")
        from .network import read_polylines
        polylines = {
            "rail": read_polylines(cfg.paths.rail_network),
            "bus": read_polylines(cfg.paths.bus_network),
            "highway": read_polylines(cfg.paths.highway_network),
        }
    spec = synth.SyntheticSpec(
        trips_per_mode=synth.mode_counts_from_mix(sy.total_trips,
                                                  sy.mode_mix),
        seed=sy.seed,
        gps_noise_sigma=sy.gps_noise_sigma,
        metro_dropout=(sy.metro_dropout_lo, sy.metro_dropout_hi))
    points, truths = synth.generate_synthetic(spec, polylines)
    fileio.write_points(points, stage.path("points.csv"))
    fileio.write_ground_truth(truths, stage.path("ground_truth.csv"))
    log.info("synth: %d points, %d ground-truth trips",
             len(points), len(truths))


COMMANDS = {
    "filter": cmd_filter,
    "segment": cmd_segment,
    "features": cmd_features,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "impute": cmd_impute,
    "report": cmd_report,
    "synth": cmd_synth,
}


def _apply_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    if args.threads is not None:
        cfg.run.threads = args.threads
    if args.seed is not None:
        cfg.run.seed = args.seed
        cfg.train = replace(cfg.train, seed=args.seed)
        cfg.tree = replace(cfg.tree, seed=args.seed)
        cfg.evaluate = replace(cfg.evaluate, base_seed=args.seed)
        cfg.synthetic.seed = args.seed
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="modeforge",
        description="Trip extraction, travel mode imputation, and demand "
                    "reporting for mobile device location data.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="TOML config file")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker thread cap (default from config)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override every stage seed")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=os.environ.get("MODEFORGE_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"modeforge {args.command}: config error: {exc}",
              file=sys.stderr)
        return 2
    stage = Stage(cfg, args.command)
    try:
        COMMANDS[args.command](cfg, stage, args)
    except ModeforgeError as exc:
        stage.cleanup()
        print(f"modeforge {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
