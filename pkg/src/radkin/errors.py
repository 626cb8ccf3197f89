"""Exception hierarchy shared across the toolkit.

The CLI maps these onto distinct exit codes: ConfigError -> 2,
DataError -> 3, anything else -> 4.
"""


class RadkinError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(RadkinError):
    """Invalid configuration, flags, or descriptor files."""


class DataError(RadkinError):
    """Malformed, inconsistent, or insufficient input data."""


class DegenerateFitError(DataError):
    """Fit has no finite solution (e.g. collinear points -> infinite radius)."""
