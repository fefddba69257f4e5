"""Parametric image corruptions at five severities.

Each family maps a severity to one parameter through the table below. The
stochastic families draw from ``np.random.default_rng(spec.seed)`` so a
``(image, spec)`` pair always yields the same output. Every result is clamped
to [0, 1] and keeps the input dims.
"""

from __future__ import annotations

import io
import logging
import math

from collections.abc import Callable

import numpy as np

from PIL import Image
from psx.models.experiment import SEVERITIES, DistortionFamily, DistortionSpec
from psx.models.image import PlanarImage
from psx.sdk import imaging
from psx.sdk.errors import ParameterError


logger = logging.getLogger(__name__)

SEVERITY_TABLE: dict[DistortionFamily, tuple[float, ...]] = {
    DistortionFamily.GAUSSIAN_NOISE: (0.04, 0.06, 0.08, 0.10, 0.14),
    DistortionFamily.SHOT_NOISE: (60, 25, 12, 5, 3),
    DistortionFamily.IMPULSE_NOISE: (0.01, 0.02, 0.03, 0.05, 0.07),
    DistortionFamily.SPECKLE_NOISE: (0.05, 0.08, 0.12, 0.16, 0.20),
    DistortionFamily.GAUSSIAN_BLUR: (0.6, 1.0, 1.5, 2.0, 3.0),
    DistortionFamily.BRIGHTNESS: (0.05, 0.10, 0.15, 0.20, 0.30),
    DistortionFamily.CONTRAST: (0.85, 0.70, 0.55, 0.40, 0.30),
    DistortionFamily.SATURATE: (0.3, 0.1, 2.0, 5.0, 20.0),
    DistortionFamily.PIXELATE: (2, 3, 4, 6, 8),
    DistortionFamily.JPEG: (80, 60, 40, 25, 15),
    DistortionFamily.IDENTITY: (0, 0, 0, 0, 0),
}

_CONTRAST_CENTER = 0.5
# PIL subsampling code for 4:2:0.
_JPEG_420 = 2

_Corruption = Callable[[np.ndarray, float, np.random.Generator], np.ndarray]


def _gaussian_noise(x, sigma, rng):
    return x + rng.normal(0.0, sigma, size=x.shape)


def _shot_noise(x, photons, rng):
    return rng.poisson(np.clip(x, 0.0, 1.0) * photons) / photons


def _impulse_noise(x, fraction, rng):
    flipped = rng.random(x.shape) < fraction
    salt = rng.random(x.shape) < 0.5
    return np.where(flipped, salt.astype(np.float64), x)


def _speckle_noise(x, sigma, rng):
    return x + x * rng.normal(0.0, sigma, size=x.shape)


def _gaussian_blur(x, sigma, rng):
    kernel = imaging.gaussian_kernel(sigma, math.ceil(3 * sigma))
    return imaging.convolve_array(x, kernel, 'mirror')


def _brightness(x, shift, rng):
    return x + shift


def _contrast(x, scale, rng):
    return _CONTRAST_CENTER + scale * (x - _CONTRAST_CENTER)


def _saturate(x, scale, rng):
    if x.shape[0] == 1:
        return x
    luma = imaging.grayscale_array(x)[np.newaxis]
    return luma + scale * (x - luma)


def _pixelate(x, block, rng):
    block = int(block)
    height, width = x.shape[-2:]
    rows = np.arange(height) // block
    cols = np.arange(width) // block
    cells = rows[:, None] * (cols[-1] + 1) + cols[None, :]
    counts = np.bincount(cells.ravel())
    out = np.empty_like(x)
    for channel, plane in enumerate(x):
        means = np.bincount(cells.ravel(), weights=plane.ravel()) / counts
        out[channel] = means[cells]
    return out


def _jpeg(x, quality, rng):
    pil = imaging.to_pil(PlanarImage(data=np.clip(x, 0.0, 1.0)))
    buffer = io.BytesIO()
    pil.save(
        buffer,
        format='JPEG',
        quality=int(quality),
        subsampling=_JPEG_420,
        progressive=False,
    )
    buffer.seek(0)
    with Image.open(buffer) as decoded:
        pixels = np.asarray(decoded.convert(pil.mode), dtype=np.float64) / 255.0
    if pixels.ndim == 2:
        return pixels[np.newaxis]
    return np.moveaxis(pixels, 2, 0)


def _identity(x, value, rng):
    return x


_CORRUPTIONS: dict[DistortionFamily, _Corruption] = {
    DistortionFamily.GAUSSIAN_NOISE: _gaussian_noise,
    DistortionFamily.SHOT_NOISE: _shot_noise,
    DistortionFamily.IMPULSE_NOISE: _impulse_noise,
    DistortionFamily.SPECKLE_NOISE: _speckle_noise,
    DistortionFamily.GAUSSIAN_BLUR: _gaussian_blur,
    DistortionFamily.BRIGHTNESS: _brightness,
    DistortionFamily.CONTRAST: _contrast,
    DistortionFamily.SATURATE: _saturate,
    DistortionFamily.PIXELATE: _pixelate,
    DistortionFamily.JPEG: _jpeg,
    DistortionFamily.IDENTITY: _identity,
}


def families() -> tuple[DistortionFamily, ...]:
    """Every supported family, in declaration order."""
    return tuple(_CORRUPTIONS)


def severity_parameter(family: DistortionFamily, severity: int) -> float:
    """The table value that ``severity`` selects for ``family``."""
    if severity not in SEVERITIES:
        raise ParameterError(f'severity must be one of 1..5, got {severity}')
    try:
        return SEVERITY_TABLE[family][severity - 1]
    except KeyError as exc:
        raise ParameterError(f'unsupported distortion family {family!r}') from exc


def apply_distortion(img: PlanarImage, spec: DistortionSpec) -> PlanarImage:
    """Corrupt ``img`` as ``spec`` describes.

    Raises:
        ParameterError: The family is not supported.
    """
    corruption = _CORRUPTIONS.get(spec.family)
    if corruption is None:
        raise ParameterError(f'unsupported distortion family {spec.family!r}')
    value = severity_parameter(spec.family, spec.severity)
    rng = np.random.default_rng(spec.seed)
    out = corruption(np.array(img.data), value, rng)
    logger.debug('applied %s (parameter %s)', spec.label, value)
    return PlanarImage(data=np.clip(out, 0.0, 1.0))


def severity_sweep(
    img: PlanarImage, family: DistortionFamily, seed: int = 0
) -> list[PlanarImage]:
    """``img`` distorted at severities 1..5, each applied to the original."""
    return [
        apply_distortion(
            img, DistortionSpec(family=family, severity=severity, seed=seed)
        )
        for severity in SEVERITIES
    ]


def parse_distortion(text: str, seed: int = 0) -> DistortionSpec:
    """Parse ``family:severity``, e.g. ``gaussian_noise:3``.

    Raises:
        ParameterError: Unknown family or malformed severity.
    """
    name, sep, level = text.strip().partition(':')
    if not sep:
        raise ParameterError(f'expected family:severity, got {text!r}')
    try:
        family = DistortionFamily(name.strip().lower())
    except ValueError as exc:
        known = ', '.join(f.value for f in families())
        raise ParameterError(
            f'unknown distortion family {name!r}; expected one of {known}'
        ) from exc
    try:
        severity = int(level)
    except ValueError as exc:
        raise ParameterError(f'severity must be an integer, got {level!r}') from exc
    if severity not in SEVERITIES:
        raise ParameterError(f'severity must be one of 1..5, got {severity}')
    return DistortionSpec(family=family, severity=severity, seed=seed)
