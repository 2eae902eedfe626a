class LocalizationError(Exception):
    """Base class for every error raised by the localization stack."""


class MapError(LocalizationError):
    """The map or a scan cloud cannot be turned into the requested structure."""


class ScenarioError(LocalizationError):
    """A scenario or world description is unusable."""


class TrajectoryError(LocalizationError):
    """Trajectory or odometry data is malformed or inconsistent."""


class PlyFormatError(LocalizationError):
    """PLY file is malformed or uses an unsupported encoding."""


class ConfigFileError(LocalizationError):
    """A key = value configuration file cannot be parsed."""
