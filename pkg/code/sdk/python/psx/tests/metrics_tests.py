"""Tests for neighbourhood distances and the kernel (psx.sdk.metrics)."""

import math

import numpy as np
import pytest

from hypothesis import given, settings
from hypothesis import strategies as st
from psx.models.config import MSSSIM_WEIGHTS, DistanceKind, KernelConfig
from psx.models.explanation import InterpretableVector
from psx.models.image import PlanarImage
from psx.sdk import metrics
from psx.sdk.errors import DimensionError, ParameterError, SizeError
from psx.tests.conftest import make_random_image, make_smooth_image
from pydantic import ValidationError


MSSSIM = DistanceKind.msssim()
NLPD = DistanceKind.nlpd()


def _noisy(img: PlanarImage, sigma: float, seed: int = 0) -> PlanarImage:
    rng = np.random.default_rng(seed)
    return PlanarImage(data=img.data + rng.normal(0.0, sigma, img.data.shape))


def _mirror_filter(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Tap-by-tap sum over a whole-sample mirrored pad (d c b | a b c d)."""
    radius = taps.shape[0] // 2
    padded = np.pad(plane, radius, mode='reflect')
    height, width = plane.shape
    out = np.zeros_like(plane)
    for i in range(taps.shape[0]):
        for j in range(taps.shape[1]):
            out += taps[i, j] * padded[i : i + height, j : j + width]
    return out


def _binomial_taps() -> np.ndarray:
    row = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
    return np.outer(row, row)


def _reduce(plane: np.ndarray) -> np.ndarray:
    return _mirror_filter(plane, _binomial_taps())[::2, ::2]


def _expand(plane: np.ndarray, height: int, width: int) -> np.ndarray:
    spread = np.zeros((height, width))
    spread[::2, ::2] = plane
    return _mirror_filter(spread, 4.0 * _binomial_taps())



# ── Cosine ───────────────────────────────────────────────────────────────


@pytest.mark.parametrize(
    'a, b, expected',
    [
        pytest.param([1, 1, 1], [1, 1, 1], 0.0, id='identical'),
        pytest.param([1, 0], [0, 1], 1.0, id='orthogonal'),
        pytest.param([1, 1, 1, 1], [1, 1, 0, 0], 1 - 2 / (2 * math.sqrt(2)), id='half'),
        pytest.param([0, 0, 0], [1, 1, 1], 1.0, id='zero_vector'),
    ],
)
def test_cosine_distance_binary(a, b, expected):
    d = metrics.cosine_distance_binary(
        InterpretableVector(bits=np.array(a)), InterpretableVector(bits=np.array(b))
    )
    assert d == pytest.approx(expected, abs=1e-12)
    if expected in (0.0, 1.0):
        assert d == expected


def test_cosine_distance_rejects_length_mismatch():
    with pytest.raises(DimensionError):
        metrics.cosine_distance_binary(np.ones(3), np.ones(4))


@pytest.mark.parametrize('count', range(2, 65))
def test_cosine_self_distance_is_exactly_zero(count):
    ones = InterpretableVector(bits=np.ones(count, dtype=np.int64))
    d = metrics.cosine_distance_binary(ones, ones)
    assert d == 0.0
    assert metrics.kernel_weight(d, KernelConfig()) == 1.0


@settings(max_examples=50, deadline=None)
@given(bits=st.lists(st.integers(0, 1), min_size=2, max_size=64))
def test_cosine_distance_stays_in_unit_interval(bits):
    v = np.array(bits)
    ones = np.ones_like(v)
    d = metrics.cosine_distance_binary(ones, v)
    assert 0.0 <= d <= 1.0
    metrics.kernel_weight(d, KernelConfig())


# ── MS-SSIM ──────────────────────────────────────────────────────────────


def test_default_msssim_weights_are_renormalized():
    weights = DistanceKind.msssim().msssim_weights
    assert math.fsum(weights) == pytest.approx(1.0, abs=1e-12)
    assert weights[2] / weights[0] == pytest.approx(MSSSIM_WEIGHTS[2] / MSSSIM_WEIGHTS[0])


def test_msssim_weights_must_sum_to_one():
    with pytest.raises(ValidationError):
        DistanceKind.msssim((0.5, 0.6))


@pytest.mark.parametrize(
    'height, width, expected',
    [
        pytest.param(11, 11, 1, id='one_window'),
        pytest.param(64, 64, 3, id='desk_scale'),
        pytest.param(176, 176, 5, id='full'),
        pytest.param(299, 299, 5, id='capped'),
    ],
)
def test_msssim_scale_count(height, width, expected):
    assert metrics.msssim_scale_count(height, width, 5) == expected


def test_msssim_rejects_tiny_images():
    img = PlanarImage.filled(8, 8, 0.5)
    with pytest.raises(SizeError):
        metrics.msssim(img, img, MSSSIM)


def test_msssim_requires_single_channel():
    img = make_random_image(0, 16, 16, channels=3)
    with pytest.raises(DimensionError):
        metrics.msssim(img, img, MSSSIM)


def test_msssim_rejects_shape_mismatch():
    with pytest.raises(DimensionError):
        metrics.msssim_distance(
            make_random_image(0, 16, 16), make_random_image(0, 16, 17), MSSSIM
        )


def test_msssim_self_similarity_is_one():
    img = make_smooth_image(0)
    assert metrics.msssim(img, img, MSSSIM) == pytest.approx(1.0, abs=1e-12)


def test_msssim_matches_scale_by_scale_reference():
    ref = np.full((32, 32), 0.5)
    test = ref.copy()
    test[13, 17] = 1.0
    offsets = np.arange(-5, 6, dtype=np.float64)
    row = np.exp(-(offsets**2) / (2.0 * 1.5**2))
    window = np.outer(row / row.sum(), row / row.sum())
    # 32px supports two 11px-window scales.
    weights = np.array(MSSSIM.msssim_weights[:2])
    weights /= weights.sum()
    c1, c2 = 0.01**2, 0.03**2

    expected = 1.0
    x, y = ref, test
    for scale in range(2):
        mu_x, mu_y = _mirror_filter(x, window), _mirror_filter(y, window)
        var_x = _mirror_filter(x * x, window) - mu_x**2
        var_y = _mirror_filter(y * y, window) - mu_y**2
        cov = _mirror_filter(x * y, window) - mu_x * mu_y
        cs = np.mean((2.0 * cov + c2) / (var_x + var_y + c2))
        expected *= cs ** weights[scale]
        if scale == 1:
            lum = np.mean(
                (2.0 * mu_x * mu_y + c1) / (mu_x**2 + mu_y**2 + c1)
            )
            expected *= lum ** weights[scale]
        else:
            x, y = _reduce(x), _reduce(y)

    got = metrics.msssim(
        PlanarImage(data=ref[np.newaxis]), PlanarImage(data=test[np.newaxis]), MSSSIM
    )
    assert expected < 1.0
    assert got == pytest.approx(expected, abs=1e-9)



# ── Image distances, shared properties ───────────────────────────────────


@pytest.mark.parametrize('kind', [MSSSIM, NLPD], ids=['msssim', 'nlpd'])
def test_self_distance_is_zero(kind):
    for seed in range(10):
        img = make_random_image(seed, 32, 32)
        assert metrics.image_distance(img, img, kind) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize('kind', [MSSSIM, NLPD], ids=['msssim', 'nlpd'])
def test_distance_is_symmetric(kind):
    a, b = make_random_image(1, 32, 32), make_random_image(2, 32, 32)
    assert metrics.image_distance(a, b, kind) == pytest.approx(
        metrics.image_distance(b, a, kind), abs=1e-9
    )


@pytest.mark.parametrize('kind', [MSSSIM, NLPD], ids=['msssim', 'nlpd'])
def test_distance_increases_with_noise(kind):
    img = make_smooth_image(4)
    distances = [
        metrics.image_distance(img, _noisy(img, sigma), kind)
        for sigma in (0.05, 0.1, 0.2)
    ]
    assert distances[0] > 0
    assert distances[0] < distances[1] < distances[2]


@pytest.mark.parametrize('kind', [MSSSIM, NLPD], ids=['msssim', 'nlpd'])
def test_bound_distance_matches_pairwise(kind):
    ref = make_smooth_image(5, channels=3)
    bound = metrics.make_distance(ref, kind)
    for seed in range(3):
        test = make_random_image(seed, 64, 64, channels=3)
        assert bound(test) == pytest.approx(
            metrics.image_distance(ref, test, kind), abs=1e-12
        )


def test_make_distance_rejects_cosine():
    with pytest.raises(ParameterError):
        metrics.make_distance(make_random_image(0, 16, 16), DistanceKind.cosine())


def test_msssim_distance_is_bounded():
    a, b = make_random_image(1, 32, 32), PlanarImage.filled(32, 32, 0.0)
    assert 0.0 <= metrics.msssim_distance(a, b, MSSSIM) <= 1.0


# ── NLPD ─────────────────────────────────────────────────────────────────


@pytest.mark.parametrize(
    'height, width, expected',
    [
        pytest.param(32, 32, 4, id='desk_scale'),
        pytest.param(128, 128, 6, id='full'),
        pytest.param(4, 4, 1, id='capped_by_size'),
        pytest.param(6, 6, 2, id='smallest_two_stage'),
    ],
)
def test_nlpd_stage_count(height, width, expected):
    assert metrics.nlpd_stage_count(height, width, NLPD) == expected


def test_nlpd_transform_bounded_by_normalization():
    """Every normalized value is below max|band| / c."""
    img = make_random_image(7, 32, 32)
    bands = metrics.nlpd_transform(img, NLPD)
    assert len(bands) == 4
    for band in bands:
        assert np.all(np.isfinite(band.data))
        assert np.max(np.abs(band.data)) < 1.0 / NLPD.nlpd_constant


def test_nlpd_transform_of_impulse_matches_reference():
    plane = np.zeros((32, 32))
    plane[16, 16] = 1.0
    kind = DistanceKind.nlpd(stages=3)
    pool = np.full((5, 5), 1.0 / 25.0)

    expected = []
    current = plane
    for _ in range(2):
        low = _reduce(current)
        expected.append(current - _expand(low, *current.shape))
        current = low
    expected.append(current)
    expected = [
        band / (kind.nlpd_constant + _mirror_filter(np.abs(band), pool))
        for band in expected
    ]

    got = metrics.nlpd_transform(PlanarImage(data=plane[np.newaxis]), kind)
    assert [band.data.shape[1:] for band in got] == [(32, 32), (16, 16), (8, 8)]
    for band, want in zip(got, expected, strict=True):
        np.testing.assert_allclose(band.data[0], want, atol=1e-9)
    assert np.max(np.abs(got[0].data)) > 0.0



def test_nlpd_configured_stage_count_too_large():
    img = make_random_image(0, 8, 8)
    with pytest.raises(SizeError):
        metrics.nlpd_distance(img, img, DistanceKind.nlpd(stages=6))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**16), shift=st.floats(0.0, 0.3))
def test_nlpd_is_symmetric_property(seed, shift):
    a = make_random_image(seed, 16, 16)
    b = PlanarImage(data=np.clip(a.data + shift, 0.0, 1.0))
    assert metrics.nlpd_distance(a, b, NLPD) == pytest.approx(
        metrics.nlpd_distance(b, a, NLPD), abs=1e-12
    )


# ── Kernel ───────────────────────────────────────────────────────────────


def test_kernel_weight_reference_value():
    assert metrics.kernel_weight(0.5, KernelConfig(width=0.25)) == pytest.approx(
        math.exp(-4.0), abs=1e-12
    )


def test_kernel_weight_at_zero_is_exactly_one():
    assert metrics.kernel_weight(0.0, KernelConfig()) == 1.0


def test_kernel_weight_saturates_for_tiny_distance():
    cfg = KernelConfig(width=0.25)
    assert metrics.kernel_weight(1e-9 * cfg.width, cfg) == 1.0
    assert metrics.kernel_weight(1e-6 * cfg.width, cfg) < 1.0



def test_kernel_weight_never_underflows_to_zero():
    assert metrics.kernel_weight(1e6, KernelConfig(width=0.01)) > 0.0


@pytest.mark.parametrize('d', [-0.1, math.nan])
def test_kernel_weight_rejects_bad_distance(d):
    with pytest.raises(ParameterError):
        metrics.kernel_weight(d, KernelConfig())


def test_kernel_width_must_be_positive():
    with pytest.raises(ValidationError):
        KernelConfig(width=0.0)


@settings(max_examples=30, deadline=None)
@given(d1=st.floats(0.0, 5.0), d2=st.floats(0.0, 5.0))
def test_kernel_weight_is_monotone(d1, d2):
    cfg = KernelConfig()
    lo, hi = sorted((d1, d2))
    assert metrics.kernel_weight(lo, cfg) >= metrics.kernel_weight(hi, cfg)
