"""Shared fixtures and helpers for psx tests."""

import numpy as np
import pytest

from psx.models.config import SurrogateConfig
from psx.models.explanation import Explanation
from psx.models.image import PlanarImage
from psx.models.segments import SegmentMap
from psx.sdk import imaging
from psx.sdk.blackbox import ToyClassifier, ToyModelClient


def pytest_addoption(parser):
    parser.addoption(
        '--runslow',
        action='store_true',
        default=False,
        help='run the long directional reproduction tests',
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


# ── Builders ─────────────────────────────────────────────────────────────


def make_random_image(
    seed: int, height: int = 32, width: int = 32, channels: int = 1
) -> PlanarImage:
    """Uniform random pixels in [0, 1]."""
    rng = np.random.default_rng(seed)
    return PlanarImage(data=rng.random((channels, height, width)))


def make_smooth_image(
    seed: int, size: int = 64, channels: int = 1
) -> PlanarImage:
    """Random image low-passed so it has structure at several scales."""
    img = make_random_image(seed, size, size, channels)
    return imaging.convolve_same(img, imaging.gaussian_kernel(2.0, 6))


def make_half_segments(height: int, width: int) -> SegmentMap:
    """Left half segment 0, right half segment 1."""
    labels = np.zeros((height, width), dtype=np.int64)
    labels[:, width // 2 :] = 1
    return SegmentMap.from_labels(labels)


def make_grid_segments(height: int, width: int, rows: int, cols: int) -> SegmentMap:
    """Rectangular grid segmentation, ids row-major."""
    row_ids = np.arange(height) * rows // height
    col_ids = np.arange(width) * cols // width
    return SegmentMap.from_labels(row_ids[:, None] * cols + col_ids[None, :])


def make_explanation(
    seg: SegmentMap, coefficients: dict[int, list[float] | np.ndarray]
) -> Explanation:
    """Explanation with the given coefficients and zero intercepts."""
    return Explanation(
        class_ids=tuple(coefficients),
        coefficients={k: np.asarray(v, dtype=np.float64) for k, v in coefficients.items()},
        intercepts={k: 0.0 for k in coefficients},
        segment_map=seg,
    )


# ── Fixtures ─────────────────────────────────────────────────────────────


@pytest.fixture
def toy_client():
    """Seeded ten-class toy model."""
    return ToyModelClient(ToyClassifier.seeded(10, 0))


@pytest.fixture
def small_surrogate_config():
    """Few samples, for fast pipeline tests."""
    return SurrogateConfig(sample_count=64, rng_seed=3)
