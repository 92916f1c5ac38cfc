"""Exception hierarchy shared by all modules.

Every error carries a short machine-parseable ``code`` used by the CLI
when writing ``error_code=...`` lines to stderr.
"""


class VifusionError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class InvalidArgumentError(VifusionError):
    code = "invalid-argument"


class InsufficientDataError(VifusionError):
    code = "insufficient-data"


class DegenerateGeometryError(VifusionError):
    """Scale is unobservable (near-zero parallax / zero design vector)."""

    code = "degenerate-geometry"


class CheiralityError(VifusionError):
    """A reprojected point landed behind the camera."""

    code = "cheirality"


class IndefiniteSystemError(VifusionError):
    """Normal equations not positive definite even after damping."""

    code = "indefinite-system"


class NumericError(VifusionError):
    """Non-finite value encountered during optimization."""

    code = "numeric"


class NonStationaryError(VifusionError):
    """Solver did not reach a stationary point; gradient would be biased."""

    code = "non-stationary"


class ScheduleReplayError(VifusionError):
    """Recorded damping schedule cannot be replayed differentiably."""

    code = "schedule-replay"


class ConfigError(VifusionError):
    code = "config"


class FormatError(VifusionError):
    """Malformed input file; message names the file and line."""

    code = "format"
