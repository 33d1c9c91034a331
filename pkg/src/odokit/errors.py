"""Exception hierarchy shared by every odokit module."""


class OdometryError(Exception):
    """Base class for all odokit errors."""


class ConfigurationError(OdometryError, ValueError):
    """Invalid geometry, encoder, filter or simulation settings."""


class StreamError(OdometryError, ValueError):
    """A sample stream violates its ordering or shape contract."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class FitError(OdometryError, ValueError):
    """Calibration data cannot support the requested fit."""


class PlanError(OdometryError, ValueError):
    """A motion plan is degenerate or exceeds wheel limits."""


class SchemaError(OdometryError, ValueError):
    """A file does not match its expected format."""
