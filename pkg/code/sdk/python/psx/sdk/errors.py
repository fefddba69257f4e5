"""Error kinds raised by the psx SDK.

Value-level failures (bad shapes, parameters, formats) subclass
``ValueError``; failures talking to a black-box model subclass
``RuntimeError``. Callers that only care about the broad category can keep
catching the builtin types.
"""

from __future__ import annotations


class PsxError(Exception):
    """Base class for all psx errors."""


class FormatError(PsxError, ValueError):
    """An image file is truncated, malformed or uses an unsupported format."""


class SizeError(PsxError, ValueError):
    """An image is too small (or a kernel too large) for the operation."""


class DimensionError(PsxError, ValueError):
    """Two inputs that must agree in shape or length do not."""


class ParameterError(PsxError, ValueError):
    """A scalar parameter is outside its admissible range."""


class SingularityError(PsxError, ValueError):
    """A least-squares system has no unique solution."""


class ComparabilityError(PsxError, ValueError):
    """Two explanations do not explain the same set of classes."""


class ModelError(PsxError, RuntimeError):
    """The black-box model failed while answering a neighbourhood query."""

    def __init__(self, message: str, sample_index: int | None = None):
        super().__init__(message)
        self.sample_index = sample_index


class TransportError(ModelError):
    """The external model server could not be reached or timed out."""


class ProtocolError(ModelError):
    """The external model server answered with a malformed response."""
