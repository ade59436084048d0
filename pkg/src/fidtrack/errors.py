"""Exception types shared across the package."""


class FidtrackError(Exception):
    """Base class for all domain errors raised by fidtrack."""


class NumericalOverflowError(FidtrackError):
    """A filter computation produced a non-finite value."""


class SingularInnovationError(FidtrackError):
    """The innovation covariance is not positive definite (misconfigured R)."""


class OrderingError(FidtrackError):
    """A frame arrived out of order."""


class SchemaError(FidtrackError):
    """Structured data does not match the expected shape or layout."""


class ConfigError(FidtrackError):
    """A configuration file or value is invalid. Message names the offending key."""


class ParseError(FidtrackError):
    """A data file could not be parsed. Message carries the file location."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.path = path
        self.line = line


class VersionError(FidtrackError):
    """A data file declares an unsupported schema version."""


class NoGroundTruthError(FidtrackError):
    """An operation requiring ground truth was given a session without it."""
