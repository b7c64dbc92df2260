"""Exception types shared across the package.

The hierarchy separates bad configuration (exit 2 in the CLI), bad or
out-of-range data (exit 3), and numerical non-convergence (exit 4).
"""


class IolnetError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(IolnetError):
    """Invalid configuration file, unknown key, or inconsistent settings."""


class DataError(IolnetError):
    """Invalid input data (parse failures, invariant violations, bad anatomy)."""


class ValidationError(DataError):
    """A domain-type invariant does not hold."""


class DomainError(DataError):
    """An operation was called outside its mathematical domain."""


class AnatomyError(DataError):
    """Eye geometry leaves no room for the implant (non-positive chamber depth)."""


class GeometryError(DomainError):
    """Lens geometry undefined for the requested curvature radius."""


class ParseError(DataError):
    """Malformed file content; carries the offending row when known."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class FitError(DataError):
    """Regression fit impossible (too few cases or rank-deficient design)."""


class CorruptFileError(DataError):
    """Persisted artifact failed its checksum or structural validation."""


class BracketError(DataError):
    """Root not bracketed by the search interval; eye outside the model range."""


class ConvergenceError(IolnetError):
    """Iterative procedure exceeded its iteration budget or diverged."""


class TapeError(IolnetError):
    """Invalid operation inside an autodiff graph; names the offending node."""
