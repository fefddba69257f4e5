"""Shared utilities for the psx SDK."""

from __future__ import annotations

import base64
import binascii

from psx.models.image import PlanarImage
from psx.sdk import imaging
from psx.sdk.errors import FormatError


def b64_encode(data: bytes) -> str:
    """Standard base64 with padding, as ASCII text."""
    return base64.b64encode(data).decode('ascii')


def b64_decode(s: str) -> bytes:
    """Strict inverse of :func:`b64_encode`.

    Raises:
        FormatError: ``s`` is not valid base64.
    """
    try:
        return base64.b64decode(s, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise FormatError(f'invalid base64 payload: {exc}') from exc


def image_to_b64_png(img: PlanarImage) -> str:
    """``img`` as base64-encoded PNG, the wire form of the model protocol."""
    return b64_encode(imaging.encode_png(img))


def image_from_b64_png(s: str) -> PlanarImage:
    """Decode the wire form back into an image."""
    return imaging.decode_png(b64_decode(s))
