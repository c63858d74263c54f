"""Exception types shared across the toolkit."""


class MedlinkError(Exception):
    """Base class for all toolkit errors."""


class FormatError(MedlinkError, ValueError):
    """A data file does not conform to its expected format."""

    def __init__(self, message, path=None, line=None):
        detail = message
        if path is not None:
            detail = f"{path}: {detail}"
        if line is not None:
            detail = f"{detail} (line {line})"
        super().__init__(detail)
        self.path = path
        self.line = line


class ValidationError(MedlinkError, ValueError):
    """Well-formed input violates a semantic invariant."""


class NotFoundError(MedlinkError, KeyError):
    """A requested identifier is absent from the consulted store."""


class InfeasibleSplitError(MedlinkError, ValueError):
    """The requested split kind cannot be satisfied on the given corpus."""


class ConfigError(MedlinkError, ValueError):
    """Inconsistent model, index, or pipeline configuration."""


class TrainingDivergedError(MedlinkError, RuntimeError):
    """Training produced a non-finite loss or gradient."""
