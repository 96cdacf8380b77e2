"""Exception split mirroring the producer CLI's exit-code convention.

Problems with the figure specification itself (bad flags, bad spec file)
map to exit code 2; problems with the input result files (hash mismatch,
missing columns, empty data) map to exit code 3.
"""


class FigureError(Exception):
    """Base class for all errors raised by this package."""


class SpecError(FigureError):
    """Invalid figure specification (CLI exit code 2)."""


class ResultFileError(FigureError):
    """Input results file violates the documented contract (exit code 3)."""
