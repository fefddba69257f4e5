"""Planar image I/O plus the convolution and pyramid primitives.

All operations are pure: they take :class:`PlanarImage` values and return new
ones. The ``_array`` helpers work on raw channel-first numpy data so the
metric code can run its inner loops without re-validating every
intermediate image.
"""

from __future__ import annotations

import io
import logging
import pathlib

from typing import Literal

import numpy as np

from PIL import Image, UnidentifiedImageError
from psx.models.image import Kernel2D, PlanarImage
from psx.sdk.errors import DimensionError, FormatError, ParameterError, SizeError
from scipy import ndimage


logger = logging.getLogger(__name__)

Boundary = Literal['mirror', 'replicate']

# Rec.601 luma weights.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_SCIPY_MODES = {'mirror': 'mirror', 'replicate': 'nearest'}
_READ_FORMATS = frozenset({'PNG', 'PPM'})
_MAX_8BIT = 255.0
_UPSAMPLE_GAIN = 4.0


# ── I/O ──────────────────────────────────────────────────────────────────


def _decode(raw: bytes, allowed_formats: frozenset[str]) -> PlanarImage:
    try:
        with Image.open(io.BytesIO(raw)) as pil:
            pil_format = pil.format
            pil.load()
            mode = pil.mode
            if pil_format not in allowed_formats:
                raise FormatError(
                    f'Unsupported image format {pil_format!r}; expected one of'
                    f' {sorted(allowed_formats)}'
                )
            if mode in ('1', 'L'):
                pixels = np.asarray(pil.convert('L'), dtype=np.float64)
            elif mode in ('RGB', 'P'):
                pixels = np.asarray(pil.convert('RGB'), dtype=np.float64)
            else:
                raise FormatError(
                    f'Unsupported pixel mode {mode!r}: only 8-bit gray or RGB'
                    ' images are read'
                )
    except FormatError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise FormatError(f'Cannot decode image: {exc}') from exc
    return PlanarImage.from_array(pixels / _MAX_8BIT)


def load_image(path: str | pathlib.Path) -> PlanarImage:
    """Read an 8-bit PNG or binary PPM file, scaling pixels to [0, 1].

    Raises:
        OSError: The file cannot be read.
        FormatError: The file is truncated, not PNG/PPM, or not 8-bit.
    """
    raw = pathlib.Path(path).read_bytes()
    image = _decode(raw, _READ_FORMATS)
    logger.debug(
        'loaded %s: %dx%dx%d', path, image.height, image.width, image.channels
    )
    return image


def to_pil(img: PlanarImage) -> Image.Image:
    """8-bit PIL image of ``img``, clamped to [0, 1]."""
    pixels = np.rint(np.clip(img.to_array(), 0.0, 1.0) * _MAX_8BIT)
    pixels = pixels.astype(np.uint8)
    if img.channels == 1:
        return Image.fromarray(pixels[:, :, 0], mode='L')
    return Image.fromarray(pixels, mode='RGB')


def save_image(img: PlanarImage, path: str | pathlib.Path) -> None:
    """Write ``img`` as an 8-bit PNG, clamping values to [0, 1] first."""
    target = pathlib.Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    to_pil(img).save(target, format='PNG')


def encode_png(img: PlanarImage) -> bytes:
    """8-bit PNG bytes of ``img``."""
    buffer = io.BytesIO()
    to_pil(img).save(buffer, format='PNG')
    return buffer.getvalue()


def decode_png(raw: bytes) -> PlanarImage:
    """Inverse of :func:`encode_png`."""
    return _decode(raw, frozenset({'PNG'}))


# ── Pixel operations ─────────────────────────────────────────────────────


def grayscale_array(data: np.ndarray) -> np.ndarray:
    """Luma plane (H×W) of channel-first data."""
    if data.shape[0] == 1:
        return data[0]
    return np.tensordot(LUMA_WEIGHTS, data, axes=1)


def to_grayscale(img: PlanarImage) -> PlanarImage:
    """Rec.601 luminance; single-channel input is returned unchanged."""
    if img.channels == 1:
        return img
    return PlanarImage(data=grayscale_array(img.data)[np.newaxis])


# ── Kernels ──────────────────────────────────────────────────────────────


def gaussian_kernel(sigma: float, radius: int) -> Kernel2D:
    """Separable Gaussian sampled at integer offsets, normalized to sum 1."""
    if not sigma > 0:
        raise ParameterError(f'Gaussian sigma must be > 0, got {sigma}')
    if radius < 1:
        raise ParameterError(f'Gaussian radius must be >= 1, got {radius}')
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    factor = np.exp(-(offsets**2) / (2.0 * sigma**2))
    return Kernel2D.from_separable(factor / factor.sum())


def binomial_kernel() -> Kernel2D:
    """The 5-tap [1, 4, 6, 4, 1] / 16 pyramid low-pass filter."""
    return Kernel2D.from_separable(np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0)


def box_kernel(side: int) -> Kernel2D:
    """Normalized ``side``×``side`` averaging filter."""
    if side < 1 or side % 2 == 0:
        raise ParameterError(f'box side must be a positive odd count, got {side}')
    return Kernel2D.from_separable(np.full(side, 1.0 / side))


# ── Convolution ──────────────────────────────────────────────────────────


def _check_kernel_fits(shape: tuple[int, ...], k: Kernel2D) -> None:
    height, width = shape[-2], shape[-1]
    k_rows, k_cols = k.side
    if k_rows > 2 * height or k_cols > 2 * width:
        raise SizeError(
            f'kernel {k_rows}x{k_cols} is too large for a {height}x{width} image'
        )


def convolve_array(
    data: np.ndarray, k: Kernel2D, boundary: Boundary = 'mirror'
) -> np.ndarray:
    """Same-size convolution of channel-first (or H×W) data."""
    try:
        mode = _SCIPY_MODES[boundary]
    except KeyError as exc:
        raise ParameterError(
            f'Unknown boundary {boundary!r}; expected mirror or replicate'
        ) from exc
    _check_kernel_fits(data.shape, k)
    if data.ndim == 3:
        return np.stack([convolve_array(plane, k, boundary) for plane in data])
    if k.separable is not None:
        rows = ndimage.convolve1d(data, k.separable, axis=0, mode=mode)
        return ndimage.convolve1d(rows, k.separable, axis=1, mode=mode)
    return ndimage.convolve(data, k.taps, mode=mode)


def convolve_same(
    img: PlanarImage, k: Kernel2D, boundary: Boundary = 'mirror'
) -> PlanarImage:
    """Convolve every channel with ``k``, keeping the image shape.

    Raises:
        SizeError: A kernel side exceeds twice the matching image extent.
    """
    return PlanarImage(data=convolve_array(img.data, k, boundary))


# ── Pyramids ─────────────────────────────────────────────────────────────


def downsample_array(data: np.ndarray, lowpass: Kernel2D) -> np.ndarray:
    height, width = data.shape[-2], data.shape[-1]
    if height < 2 or width < 2:
        raise SizeError(f'cannot downsample a {height}x{width} image')
    return convolve_array(data, lowpass)[..., ::2, ::2]


def upsample_array(
    data: np.ndarray, target_h: int, target_w: int, lowpass: Kernel2D
) -> np.ndarray:
    height, width = data.shape[-2], data.shape[-1]
    if target_h not in (2 * height - 1, 2 * height) or target_w not in (
        2 * width - 1,
        2 * width,
    ):
        raise SizeError(
            f'cannot upsample {height}x{width} to {target_h}x{target_w}'
        )
    spread = np.zeros(data.shape[:-2] + (target_h, target_w))
    spread[..., ::2, ::2] = data
    return convolve_array(spread, lowpass.scaled(_UPSAMPLE_GAIN))


def downsample2(
    img: PlanarImage, lowpass: Kernel2D | None = None
) -> PlanarImage:
    """Low-pass filter then keep even rows and columns (ceil halving)."""
    lowpass = lowpass or binomial_kernel()
    return PlanarImage(data=downsample_array(img.data, lowpass))


def upsample2(
    img: PlanarImage,
    target_h: int,
    target_w: int,
    lowpass: Kernel2D | None = None,
) -> PlanarImage:
    """Interleave zeros up to the target dims, then filter with gain 4."""
    lowpass = lowpass or binomial_kernel()
    return PlanarImage(
        data=upsample_array(img.data, target_h, target_w, lowpass)
    )


def pyramid_arrays(
    data: np.ndarray, stages: int, lowpass: Kernel2D
) -> list[np.ndarray]:
    """Laplacian bands of channel-first data, residual low-pass last."""
    if stages < 1:
        raise ParameterError(f'pyramid needs >= 1 stage, got {stages}')
    bands = []
    current = data
    for level in range(stages - 1):
        height, width = current.shape[-2], current.shape[-1]
        if 2 * min(height, width) < max(lowpass.side):
            raise SizeError(
                f'{stages} stages is too many for a {data.shape[-2]}x'
                f'{data.shape[-1]} image (level {level} is {height}x{width})'
            )
        low = downsample_array(current, lowpass)
        bands.append(current - upsample_array(low, height, width, lowpass))
        current = low
    bands.append(current)
    return bands


def laplacian_pyramid(
    img: PlanarImage, stages: int, lowpass: Kernel2D | None = None
) -> list[PlanarImage]:
    """Detail bands ``image - up(down(image))`` per level plus the residual.

    Raises:
        SizeError: The image cannot be halved ``stages - 1`` times.
    """
    lowpass = lowpass or binomial_kernel()
    return [
        PlanarImage(data=band)
        for band in pyramid_arrays(img.data, stages, lowpass)
    ]


def reconstruct_pyramid(
    bands: list[PlanarImage], lowpass: Kernel2D | None = None
) -> PlanarImage:
    """Invert :func:`laplacian_pyramid` by successive upsample-and-add."""
    if not bands:
        raise ParameterError('cannot reconstruct an empty pyramid')
    lowpass = lowpass or binomial_kernel()
    current = bands[-1].data
    for band in reversed(bands[:-1]):
        if band.channels != bands[-1].channels:
            raise DimensionError('pyramid bands disagree in channel count')
        current = band.data + upsample_array(
            current, band.height, band.width, lowpass
        )
    return PlanarImage(data=current)
