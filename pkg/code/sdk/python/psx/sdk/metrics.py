"""Neighbourhood distances and the exponential kernel that weights them.

Three distances are available:

- ``cosine_binary``: cosine distance between interpretable vectors, the
  classic surrogate-explainer default.
- ``msssim``: one minus multi-scale structural similarity of two images.
- ``nlpd``: mean per-stage RMS difference of normalized Laplacian pyramids.

The image distances operate on luminance. :func:`make_distance` binds a
reference image once so the per-sample cost during neighbourhood weighting is
a single transform of the perturbed image.
"""

from __future__ import annotations

import math

from collections.abc import Callable

import numpy as np

from psx.models.config import DistanceKind, DistanceTag, KernelConfig
from psx.models.explanation import InterpretableVector
from psx.models.image import PlanarImage
from psx.sdk import imaging
from psx.sdk.errors import DimensionError, ParameterError, SizeError


DistanceFn = Callable[[PlanarImage], float]

_SSIM_SIGMA = 1.5
_SSIM_RADIUS = 5
_SSIM_C1 = 0.01**2
_SSIM_C2 = 0.03**2
# Floor for per-scale statistics so fractional powers stay real.
_STAT_FLOOR = 1e-12

_NLPD_POOL_SIDE = 5
_NLPD_DESK_STAGES = 4
_NLPD_FULL_STAGES = 6
_NLPD_FULL_MIN_DIM = 128

_TINY = np.finfo(np.float64).tiny


def _as_bits(v: InterpretableVector | np.ndarray) -> np.ndarray:
    if isinstance(v, InterpretableVector):
        return v.bits.astype(np.float64)
    return np.asarray(v, dtype=np.float64)


def cosine_distance_binary(
    a: InterpretableVector | np.ndarray, b: InterpretableVector | np.ndarray
) -> float:
    """``1 - a·b / (|a||b|)``; 1 when either vector is all zeros.

    Raises:
        DimensionError: The vectors differ in length.
    """
    x, y = _as_bits(a), _as_bits(b)
    if x.shape != y.shape:
        raise DimensionError(
            f'vector lengths differ: {x.shape[0]} vs {y.shape[0]}'
        )
    dot, xx, yy = float(x @ y), float(x @ x), float(y @ y)
    if xx == 0.0 or yy == 0.0:
        return 1.0
    # Exact for 0/1 vectors: parallel inputs must give 0, not -2**-52.
    if dot * dot == xx * yy:
        return 0.0
    return min(1.0, max(0.0, 1.0 - dot / (math.sqrt(xx) * math.sqrt(yy))))


# ── MS-SSIM ──────────────────────────────────────────────────────────────


def _single_channel(img: PlanarImage, name: str) -> np.ndarray:
    if img.channels != 1:
        raise DimensionError(
            f'{name} must be single-channel, got {img.channels} channels;'
            ' convert with to_grayscale'
        )
    return img.data[0]


def _check_same_dims(ref: PlanarImage, test: PlanarImage) -> None:
    if ref.data.shape != test.data.shape:
        raise DimensionError(
            f'image shapes differ: {ref.data.shape} vs {test.data.shape}'
        )


def msssim_scale_count(height: int, width: int, requested: int) -> int:
    """Largest scale count <= ``requested`` whose coarsest level fits the window.

    Raises:
        SizeError: The image is smaller than one SSIM window.
    """
    window = 2 * _SSIM_RADIUS + 1
    count = 0
    while count < requested and min(height, width) >= window:
        count += 1
        height, width = -(-height // 2), -(-width // 2)
    if count == 0:
        raise SizeError(
            f'image {height}x{width} is smaller than the {window}px SSIM window'
        )
    return count


def _scale_weights(kind: DistanceKind, scales: int) -> np.ndarray:
    weights = np.asarray(kind.msssim_weights[:scales], dtype=np.float64)
    return weights / weights.sum()


class _MsssimReference:
    """Per-scale local statistics of a fixed reference plane."""

    def __init__(self, plane: np.ndarray, kind: DistanceKind):
        self.shape = plane.shape
        self.scales = msssim_scale_count(
            plane.shape[0], plane.shape[1], len(kind.msssim_weights)
        )
        self.weights = _scale_weights(kind, self.scales)
        self._window = imaging.gaussian_kernel(_SSIM_SIGMA, _SSIM_RADIUS)
        self._lowpass = imaging.binomial_kernel()
        self.levels = []
        current = plane
        for scale in range(self.scales):
            mu = imaging.convolve_array(current, self._window)
            sigma_sq = imaging.convolve_array(current * current, self._window)
            self.levels.append((current, mu, sigma_sq - mu * mu))
            if scale < self.scales - 1:
                current = imaging.downsample_array(current, self._lowpass)

    def similarity(self, plane: np.ndarray) -> float:
        if plane.shape != self.shape:
            raise DimensionError(
                f'image shapes differ: {self.shape} vs {plane.shape}'
            )
        result = 1.0
        current = plane
        for scale, (ref, mu_x, var_x) in enumerate(self.levels):
            mu_y = imaging.convolve_array(current, self._window)
            var_y = (
                imaging.convolve_array(current * current, self._window)
                - mu_y * mu_y
            )
            cov = imaging.convolve_array(ref * current, self._window) - mu_x * mu_y
            cs = float(
                np.mean((2.0 * cov + _SSIM_C2) / (var_x + var_y + _SSIM_C2))
            )
            result *= max(cs, _STAT_FLOOR) ** self.weights[scale]
            if scale == self.scales - 1:
                luminance = float(
                    np.mean(
                        (2.0 * mu_x * mu_y + _SSIM_C1)
                        / (mu_x * mu_x + mu_y * mu_y + _SSIM_C1)
                    )
                )
                result *= max(luminance, _STAT_FLOOR) ** self.weights[scale]
            else:
                current = imaging.downsample_array(current, self._lowpass)
        return min(result, 1.0)


def msssim(ref: PlanarImage, test: PlanarImage, kind: DistanceKind) -> float:
    """Multi-scale structural similarity of two single-channel images.

    Contrast-structure terms are combined over all scales with the
    configured exponents; the luminance term enters at the coarsest scale.
    The scale count shrinks (weights renormalized) on small images.

    Raises:
        DimensionError: Shapes differ or an image has several channels.
        SizeError: The image is smaller than one 11px SSIM window.
    """
    _check_same_dims(ref, test)
    reference = _MsssimReference(_single_channel(ref, 'ref'), kind)
    return reference.similarity(_single_channel(test, 'test'))


def msssim_distance(
    ref: PlanarImage, test: PlanarImage, kind: DistanceKind
) -> float:
    """``1 - msssim(ref, test)``."""
    return max(0.0, 1.0 - msssim(ref, test, kind))


# ── NLPD ─────────────────────────────────────────────────────────────────


def max_pyramid_stages(height: int, width: int) -> int:
    """Stages whose every level is at least 3px on each side.

    Smaller levels cannot take the 5-tap pyramid filter or the pooling window.
    """
    stages = 0
    while min(height, width) >= 3:
        stages += 1
        height, width = -(-height // 2), -(-width // 2)
    return stages


def nlpd_stage_count(height: int, width: int, kind: DistanceKind) -> int:
    """Configured stages, or 4 (6 on >= 128px images) capped by the size."""
    if kind.nlpd_stages is not None:
        return kind.nlpd_stages
    wanted = (
        _NLPD_FULL_STAGES
        if min(height, width) >= _NLPD_FULL_MIN_DIM
        else _NLPD_DESK_STAGES
    )
    feasible = max_pyramid_stages(height, width)
    if feasible < 1:
        raise SizeError(f'image {height}x{width} is too small for NLPD')
    return min(wanted, feasible)


def _nlpd_bands(plane: np.ndarray, kind: DistanceKind) -> list[np.ndarray]:
    stages = nlpd_stage_count(plane.shape[0], plane.shape[1], kind)
    pool = imaging.box_kernel(_NLPD_POOL_SIDE)
    bands = imaging.pyramid_arrays(plane, stages, imaging.binomial_kernel())
    return [
        band / (kind.nlpd_constant + imaging.convolve_array(np.abs(band), pool))
        for band in bands
    ]


def nlpd_transform(img: PlanarImage, kind: DistanceKind) -> list[PlanarImage]:
    """Laplacian bands, each divided by ``c + local_mean(|band|)``.

    Raises:
        DimensionError: The image has several channels.
        SizeError: The image cannot support the stage count.
    """
    plane = _single_channel(img, 'img')
    return [
        PlanarImage(data=band[np.newaxis]) for band in _nlpd_bands(plane, kind)
    ]


def _nlpd_between(
    ref_bands: list[np.ndarray], test_bands: list[np.ndarray]
) -> float:
    errors = [
        math.sqrt(float(np.mean((r - t) ** 2)))
        for r, t in zip(ref_bands, test_bands, strict=True)
    ]
    return math.fsum(errors) / len(errors)


def nlpd_distance(
    ref: PlanarImage, test: PlanarImage, kind: DistanceKind
) -> float:
    """Mean over stages of the RMS difference of the normalized bands."""
    _check_same_dims(ref, test)
    return _nlpd_between(
        _nlpd_bands(_single_channel(ref, 'ref'), kind),
        _nlpd_bands(_single_channel(test, 'test'), kind),
    )


# ── Dispatch and kernel ──────────────────────────────────────────────────


def make_distance(reference: PlanarImage, kind: DistanceKind) -> DistanceFn:
    """Bind ``reference`` and return ``test -> D(reference, test)``.

    Both images are reduced to luminance first. Values equal the pairwise
    :func:`msssim_distance` / :func:`nlpd_distance` results.

    Raises:
        ParameterError: ``kind`` is the binary cosine distance, which is not
            defined on images.
    """
    ref_plane = imaging.grayscale_array(reference.data)

    def _plane(test: PlanarImage) -> np.ndarray:
        if test.dims != reference.dims:
            raise DimensionError(
                f'image dims differ: {reference.dims} vs {test.dims}'
            )
        return imaging.grayscale_array(test.data)

    if kind.tag == DistanceTag.MSSSIM:
        stats = _MsssimReference(ref_plane, kind)
        return lambda test: max(0.0, 1.0 - stats.similarity(_plane(test)))
    if kind.tag == DistanceTag.NLPD:
        ref_bands = _nlpd_bands(ref_plane, kind)
        return lambda test: _nlpd_between(
            ref_bands, _nlpd_bands(_plane(test), kind)
        )
    raise ParameterError(f'{kind.tag.value} is not an image distance')


def image_distance(
    ref: PlanarImage, test: PlanarImage, kind: DistanceKind
) -> float:
    """MS-SSIM or NLPD distance between two images of any channel count."""
    return make_distance(ref, kind)(test)


def kernel_weight(d: float, cfg: KernelConfig) -> float:
    """``exp(-d² / σ²)``, floored at the smallest positive double.

    In double precision any ``d`` below about ``1e-8 · σ`` gives exactly 1.0,
    so near-identical samples weigh the same as the unperturbed one.

    Raises:
        ParameterError: ``d`` is negative or NaN.
    """
    if not d >= 0:
        raise ParameterError(f'distance must be >= 0, got {d}')
    return max(math.exp(-(d * d) / (cfg.width * cfg.width)), _TINY)
