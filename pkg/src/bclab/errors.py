"""Exception types shared across the package."""


class BCLabError(Exception):
    """Base class for package errors."""


class ConfigError(BCLabError):
    """Invalid run configuration or violated precondition (CLI exit code 2)."""


class PlacementError(BCLabError):
    """A field was passed to an operator expecting a different staggered placement."""


class MetricError(BCLabError):
    """Metric tensor violates positivity or smoothness requirements."""


class InstabilityError(BCLabError):
    """Time stepping produced non-finite values."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite field values detected at step {step}")


class DataError(BCLabError):
    """Missing or inconsistent on-disk pipeline data."""
