"""modeforge: trip extraction, travel mode imputation, and multimodal
travel demand estimation from mobile device location data."""

__version__ = "0.1.0"

from .geo import (
    EARTH_RADIUS_M,
    GeoSegment,
    LocationPoint,
    PointSequence,
    haversine_distance,
    pairwise_speed,
    segment_point_distance,
)
from .trips import (
    MODES,
    FilterConfig,
    StayRegion,
    StayRegionConfig,
    Trip,
    TripSplitConfig,
    detect_stay_regions,
    filter_points,
    split_by_stay_regions,
    split_by_thresholds,
)
from .network import ModalNetwork, load_network, load_networks
from .features import (
    ALL_FEATURES,
    FeatureScaler,
    FeatureVector,
    build_feature_vector,
    fit_scaler,
    network_features,
    nearest_line_distance,
    trajectory_features,
)
from .widedeep import TrainConfig, WideDeepModel, joint_predict, train
from .evaluation import ConfusionMatrix, cross_validate, make_folds, \
    precision_recall
from .demand import distribution_report, mode_shares

__all__ = [name for name in dir() if not name.startswith("_")]
