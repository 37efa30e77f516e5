"""Exception taxonomy shared across the pipeline."""


class AeroRomError(Exception):
    """Base class for all library errors."""


class ValidationError(AeroRomError):
    """Input violates a documented precondition (bad values, bad config)."""


class DimensionError(ValidationError):
    """Array or vector has the wrong shape or length."""


class DataError(AeroRomError):
    """Workspace or file contents are missing or malformed."""


class SolverError(AeroRomError):
    """A numerical routine failed (singular system, non-finite result)."""


class UsageError(AeroRomError):
    """API called out of order or with inconsistent arguments."""
