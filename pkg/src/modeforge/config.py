"""Pipeline configuration: one TOML file drives every stage.

Unknown sections or keys are rejected outright so a misspelled threshold
can never silently fall back to a default.  Relative paths are resolved
against the directory containing the config file.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .trips import FilterConfig, StayRegionConfig, TripSplitConfig, MODES
from .widedeep import OPTIMIZERS, TrainConfig
from .baselines import TreeConfig
from .evaluation import EvalConfig, MODEL_KINDS

SPLIT_METHODS = ("stay_region", "thresholds")


@dataclass
class PathsConfig:
    points: Optional[Path] = None
    rail_network: Optional[Path] = None
    bus_network: Optional[Path] = None
    highway_network: Optional[Path] = None
    output_dir: Path = Path("out")
    model: Optional[Path] = None
    ground_truth: Optional[Path] = None
    reference_histograms: Optional[Path] = None


@dataclass
class FeatureConfig:
    include_network: bool = True
    grid_cell_size: float = 0.01


@dataclass
class SplitConfig:
    method: str = "stay_region"


@dataclass
class ReportConfig:
    time_bin_edges: list[float] = field(
        default_factory=lambda: [0, 300, 600, 900, 1200, 1800, 2700, 3600,
                                 5400, 7200])
    length_bin_edges: list[float] = field(
        default_factory=lambda: [0, 500, 1000, 2000, 4000, 8000, 16000,
                                 32000])


@dataclass
class SyntheticConfig:
    total_trips: int = 1009
    mode_mix: dict[str, float] = field(
        default_factory=lambda: {"Car": 19.3, "Bus": 15.9, "Metro": 52.9,
                                 "Walk": 11.9})
    seed: int = 0
    metro_dropout_lo: float = 0.3
    metro_dropout_hi: float = 0.6
    gps_noise_sigma: float = 12.0


@dataclass
class RunConfig:
    seed: int = 0
    threads: int = 1
    model_kind: str = "wide_deep"


@dataclass
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    stay_region: StayRegionConfig = field(default_factory=StayRegionConfig)
    trip_split: TripSplitConfig = field(default_factory=TripSplitConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    tree: TreeConfig = field(default_factory=TreeConfig)
    evaluate: EvalConfig = field(default_factory=EvalConfig)
    report: ReportConfig = field(default_factory=ReportConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    run: RunConfig = field(default_factory=RunConfig)


_SECTION_KEYS: dict[str, set[str]] = {
    "paths": {"points", "rail_network", "bus_network", "highway_network",
              "output_dir", "model", "ground_truth", "reference_histograms"},
    "filter": {"min_accuracy", "max_jump_speed"},
    "stay_region": {"max_roam_distance", "min_dwell_time", "max_speed"},
    "trip_split": {"method", "max_distance_from", "max_speed_from",
                   "max_time_from"},
    "features": {"include_network", "grid_cell_size"},
    "train": {"model_kind", "optimizer", "learning_rate", "epochs",
              "batch_size", "seed", "hidden_widths", "combine_trainable",
              "rmsprop_decay", "adam_beta1", "adam_beta2", "epsilon",
              "n_trees", "max_depth", "min_samples_leaf", "bootstrap",
              "m_features"},
    "evaluate": {"n_folds", "n_seeds", "base_seed", "subsample_fraction"},
    "report": {"time_bin_edges", "length_bin_edges"},
    "synthetic": {"total_trips", "mode_mix", "seed", "metro_dropout_lo",
                  "metro_dropout_hi", "gps_noise_sigma"},
    "run": {"seed", "threads"},
}


def _check_keys(section: str, table: dict[str, Any]) -> None:
    unknown = set(table) - _SECTION_KEYS[section]
    if unknown:
        raise ConfigError(
            f"unknown key(s) {sorted(unknown)} in section [{section}]")


def _resolve(base: Path, value: Optional[str]) -> Optional[Path]:
    if value is None or value == "":
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_config(path: str | Path) -> PipelineConfig:
    """Parse and validate a pipeline config file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc

    unknown_sections = set(doc) - set(_SECTION_KEYS)
    if unknown_sections:
        raise ConfigError(f"unknown config section(s) {sorted(unknown_sections)}")
    for section, table in doc.items():
        if not isinstance(table, dict):
            raise ConfigError(f"top-level key {section!r} must be a section")
        _check_keys(section, table)

    base = path.parent
    cfg = PipelineConfig()
    try:
        p = doc.get("paths", {})
        cfg.paths = PathsConfig(
            points=_resolve(base, p.get("points")),
            rail_network=_resolve(base, p.get("rail_network")),
            bus_network=_resolve(base, p.get("bus_network")),
            highway_network=_resolve(base, p.get("highway_network")),
            output_dir=_resolve(base, p.get("output_dir", "out")),
            model=_resolve(base, p.get("model")),
            ground_truth=_resolve(base, p.get("ground_truth")),
            reference_histograms=_resolve(base, p.get("reference_histograms")),
        )
        f = doc.get("filter", {})
        cfg.filter = FilterConfig(
            min_accuracy=float(f.get("min_accuracy", 100.0)),
            max_jump_speed=float(f.get("max_jump_speed", 150.0)))
        s = doc.get("stay_region", {})
        cfg.stay_region = StayRegionConfig(
            max_roam_distance=float(s.get("max_roam_distance", 100.0)),
            min_dwell_time=float(s.get("min_dwell_time", 300.0)),
            max_speed=float(s.get("max_speed", 1.5)))
        t = doc.get("trip_split", {})
        method = t.get("method", "stay_region")
        if method not in SPLIT_METHODS:
            raise ConfigError(f"trip_split.method must be one of {SPLIT_METHODS}")
        cfg.split = SplitConfig(method=method)
        cfg.trip_split = TripSplitConfig(
            max_distance_from=float(t.get("max_distance_from", 2_000.0)),
            max_speed_from=float(t.get("max_speed_from", 69.4)),
            max_time_from=float(t.get("max_time_from", 1_800.0)))
        ft = doc.get("features", {})
        cfg.features = FeatureConfig(
            include_network=bool(ft.get("include_network", True)),
            grid_cell_size=float(ft.get("grid_cell_size", 0.01)))
        tr = doc.get("train", {})
        model_kind = tr.get("model_kind", "wide_deep")
        if model_kind not in MODEL_KINDS:
            raise ConfigError(f"train.model_kind must be one of {MODEL_KINDS}")
        optimizer = tr.get("optimizer", "rmsprop")
        if optimizer not in OPTIMIZERS:
            raise ConfigError(f"train.optimizer must be one of {OPTIMIZERS}")
        cfg.train = TrainConfig(
            optimizer=optimizer,
            learning_rate=float(tr.get("learning_rate", 0.01)),
            epochs=int(tr.get("epochs", 200)),
            batch_size=int(tr.get("batch_size", 32)),
            seed=int(tr.get("seed", 0)),
            rmsprop_decay=float(tr.get("rmsprop_decay", 0.9)),
            adam_beta1=float(tr.get("adam_beta1", 0.9)),
            adam_beta2=float(tr.get("adam_beta2", 0.999)),
            epsilon=float(tr.get("epsilon", 1e-8)),
            hidden_widths=tuple(int(w) for w in tr.get("hidden_widths",
                                                       (400, 100, 50))),
            combine_trainable=bool(tr.get("combine_trainable", False)))
        m = tr.get("m_features")
        cfg.tree = TreeConfig(
            max_depth=int(tr.get("max_depth", 12)),
            min_samples_leaf=int(tr.get("min_samples_leaf", 1)),
            n_trees=int(tr.get("n_trees", 100)),
            bootstrap=bool(tr.get("bootstrap", True)),
            m_features=int(m) if m is not None else None,
            seed=int(tr.get("seed", 0)))
        ev = doc.get("evaluate", {})
        cfg.evaluate = EvalConfig(
            n_folds=int(ev.get("n_folds", 10)),
            n_seeds=int(ev.get("n_seeds", 10)),
            base_seed=int(ev.get("base_seed", 0)),
            subsample_fraction=float(ev.get("subsample_fraction", 1.0)))
        rp = doc.get("report", {})
        cfg.report = ReportConfig(
            time_bin_edges=[float(x) for x in rp.get(
                "time_bin_edges", ReportConfig().time_bin_edges)],
            length_bin_edges=[float(x) for x in rp.get(
                "length_bin_edges", ReportConfig().length_bin_edges)])
        sy = doc.get("synthetic", {})
        mix = sy.get("mode_mix", SyntheticConfig().mode_mix)
        if set(mix) - set(MODES):
            raise ConfigError(f"synthetic.mode_mix has unknown modes "
                              f"{sorted(set(mix) - set(MODES))}")
        cfg.synthetic = SyntheticConfig(
            total_trips=int(sy.get("total_trips", 1009)),
            mode_mix={k: float(v) for k, v in mix.items()},
            seed=int(sy.get("seed", 0)),
            metro_dropout_lo=float(sy.get("metro_dropout_lo", 0.3)),
            metro_dropout_hi=float(sy.get("metro_dropout_hi", 0.6)),
            gps_noise_sigma=float(sy.get("gps_noise_sigma", 12.0)))
        rn = doc.get("run", {})
        cfg.run = RunConfig(seed=int(rn.get("seed", 0)),
                            threads=int(rn.get("threads", 1)),
                            model_kind=model_kind)
        if cfg.run.threads < 1:
            raise ConfigError("run.threads must be >= 1")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value in {path}: {exc}") from exc
    return cfg


def require_paths(cfg: PipelineConfig, *names: str) -> None:
    """Fail fast if any named path is unset or does not exist."""
    for name in names:
        value = getattr(cfg.paths, name)
        if value is None:
            raise ConfigError(f"paths.{name} is required for this command")
        if not Path(value).exists():
            raise ConfigError(f"paths.{name} = {value} does not exist")
