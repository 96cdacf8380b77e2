"""Exception hierarchy shared across the toolkit.

Everything user-facing derives from ToolkitError so the CLI can map
failures to exit codes in one place (config problems -> 2, runtime -> 3).
"""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ToolkitError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class UnphysicalModelError(DomainError):
    """Model parameters describe a signal no +/-1 measurement can produce."""


class SingularVarianceError(ToolkitError):
    """A shot-noise variance of zero met a nonzero sensitivity; the
    information contribution would be infinite."""


class NonIdentifiableError(ToolkitError):
    """The information matrix is singular or hopelessly ill-conditioned."""

    def __init__(self, message, null_direction=None):
        super().__init__(message)
        self.null_direction = null_direction


class UnderDeterminedError(ToolkitError):
    """Fewer independent observations than free parameters."""


class IndeterminateError(DomainError):
    """The data admit no answer at all (distinct from a poor fit)."""


class ProtocolViolationError(ToolkitError):
    """A role assignment breaks the measurement-protocol rules."""


class EstimationError(ToolkitError):
    """A fit inside a larger run failed; carries the qubit index."""

    def __init__(self, message, qubit=None):
        if qubit is not None:
            message = f"{message} (qubit {qubit})"
        super().__init__(message)
        self.qubit = qubit


class PlannerError(ToolkitError):
    """Schedule optimization failed to produce a usable plan."""


class ConfigError(ToolkitError):
    """Invalid configuration file or flag combination (CLI exit code 2)."""


class ParseError(ToolkitError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line
