"""Exception hierarchy shared across the toolkit."""


class ModeforgeError(Exception):
    """Base class for all toolkit errors."""


class InvalidCoordinateError(ModeforgeError):
    """Latitude/longitude out of range or non-finite."""


class UndefinedSpeedError(ModeforgeError):
    """Speed requested over a zero or negative time interval."""


class DegenerateTripError(ModeforgeError):
    """Trip too short or with zero duration to compute attributes."""


class EmptyNetworkError(ModeforgeError):
    """Nearest-line query against a network with no segments."""


class NetworkParseError(ModeforgeError):
    """Malformed network geometry file; message names file and feature."""


class ConfigError(ModeforgeError):
    """Invalid, unknown, or unresolvable configuration."""


class ModelFormatError(ModeforgeError):
    """Model file missing, corrupt, or of an unsupported version."""


class TrainingError(ModeforgeError):
    """Training diverged or could not start."""


class DimensionError(ModeforgeError):
    """Feature vector / parameter shape mismatch."""
