"""Exception types shared across the package.

All errors derive from :class:`ValueError` so callers that do not care about
the finer distinction can catch one base class. The CLI maps I/O problems to
exit code 1 and contract violations (these types) to exit code 2.
"""

from __future__ import annotations


class PolyNetError(ValueError):
    """Base class for contract violations raised by this package."""


class MeshParseError(PolyNetError):
    """A mesh file could not be parsed.

    Carries the 1-based line number of the offending record when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyMeshError(PolyNetError):
    """A mesh has no usable geometry (on load, or after cleaning)."""


class ShapeMismatchError(PolyNetError):
    """A checkpoint does not fit the data it is asked to process."""
