"""Exception hierarchy shared across the package."""
from __future__ import annotations


class CfqError(Exception):
    """Base class for all package-specific errors."""


class InvalidWiringError(CfqError):
    """Raised when an element references the same mode twice, overlapping
    detector ports, or otherwise impossible routing."""


class InvalidElementError(CfqError):
    """Raised when an optical element is malformed (e.g. a non-unitary
    polarization matrix)."""


class RangeError(CfqError, ValueError):
    """Raised when a numeric parameter is outside its documented range."""


class NumericalIntegrityError(CfqError):
    """Raised when probability bookkeeping drifts beyond tolerance during
    state evolution."""


class PathSumBoundError(CfqError):
    """Raised when a path enumeration would exceed the supported size."""


class ChannelInfeasibleError(CfqError):
    """Raised when a protocol run cannot make progress (conclusive
    probability zero, or the per-bit attempt cap is exhausted)."""


class PbmFormatError(CfqError, ValueError):
    """Raised for malformed portable-bitmap payloads."""


class EmptyInputError(CfqError, ValueError):
    """Raised when an operation requires a non-empty input collection."""


class UndefinedVisibilityError(CfqError, ValueError):
    """Raised when visibility is estimated from two zero intensities."""
