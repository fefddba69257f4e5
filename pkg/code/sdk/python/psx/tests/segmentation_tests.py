"""Tests for SLIC superpixels and segment maps."""

import numpy as np
import pytest

from psx.models.image import PlanarImage
from psx.models.segments import SegmentMap
from psx.sdk import imaging, segmentation
from psx.sdk.errors import DimensionError, ParameterError
from psx.tests.conftest import make_half_segments, make_random_image, make_smooth_image
from pydantic import ValidationError


def _assert_valid_partition(seg: SegmentMap) -> None:
    """Contiguous ids in first-appearance order, each one region."""
    SegmentMap.model_validate(seg.model_dump())
    _, first = np.unique(seg.labels.ravel(), return_index=True)
    assert np.all(np.diff(first) > 0)


# ── SegmentMap ───────────────────────────────────────────────────────────


@pytest.mark.parametrize(
    'labels',
    [
        pytest.param([[0, 1, 0]], id='disconnected_segment'),
        pytest.param([[0, 2], [0, 2]], id='missing_id'),
        pytest.param([[0, -1]], id='negative_id'),
        pytest.param([[0, 1], [1, 0]], id='diagonal_only'),
    ],
)
def test_segment_map_rejects_invalid_partitions(labels):
    with pytest.raises(ValidationError):
        SegmentMap.from_labels(np.array(labels))


def test_segment_map_sizes():
    seg = make_half_segments(4, 6)
    np.testing.assert_array_equal(seg.sizes(), [12, 12])


# ── slic_segment ─────────────────────────────────────────────────────────


def test_uniform_image_splits_into_quadrants():
    """A featureless image is cut by the spatial term alone."""
    seg = segmentation.slic_segment(PlanarImage.filled(32, 32, 0.5), 4)
    assert seg.segment_count == 4
    np.testing.assert_array_equal(seg.sizes(), [256, 256, 256, 256])
    expected = np.zeros((32, 32), dtype=np.int64)
    expected[:16, 16:] = 1
    expected[16:, :16] = 2
    expected[16:, 16:] = 3
    np.testing.assert_array_equal(seg.labels, expected)


def test_two_tone_image_splits_along_the_edge():
    pixels = np.zeros((32, 32))
    pixels[:, 16:] = 1.0
    seg = segmentation.slic_segment(PlanarImage.from_array(pixels), 2)
    assert seg.segment_count == 2
    np.testing.assert_array_equal(seg.labels, make_half_segments(32, 32).labels)


@pytest.mark.parametrize('channels', [1, 3])
def test_slic_produces_connected_partition(channels):
    img = make_smooth_image(3, 48, channels=channels)
    seg = segmentation.slic_segment(img, 12)
    _assert_valid_partition(seg)
    assert seg.source_dims == (48, 48)
    assert 2 <= seg.segment_count <= 24


def test_slic_on_noise_still_connected():
    seg = segmentation.slic_segment(make_random_image(9, 40, 30, channels=3), 16)
    _assert_valid_partition(seg)


def test_slic_is_deterministic():
    img = make_smooth_image(1, 40, channels=3)
    first = segmentation.slic_segment(img, 10)
    second = segmentation.slic_segment(img, 10)
    np.testing.assert_array_equal(first.labels, second.labels)


def test_slic_default_segment_count():
    seg = segmentation.slic_segment(make_smooth_image(2, 64))
    assert seg.segment_count >= 8


@pytest.mark.parametrize(
    'kwargs',
    [
        pytest.param(dict(target_segments=1), id='one_segment'),
        pytest.param(dict(target_segments=17), id='more_than_pixels'),
        pytest.param(dict(target_segments=4, compactness=0.0), id='compactness'),
        pytest.param(dict(target_segments=4, iterations=0), id='iterations'),
    ],
)
def test_slic_rejects_bad_parameters(kwargs):
    with pytest.raises(ParameterError):
        segmentation.slic_segment(PlanarImage.filled(4, 4, 0.5), **kwargs)


@pytest.mark.parametrize(
    'side, expected',
    [
        pytest.param(32, 16, id='small'),
        pytest.param(64, 16, id='small_edge'),
        pytest.param(144, 33, id='between'),
        pytest.param(224, 50, id='large_edge'),
        pytest.param(299, 50, id='large'),
    ],
)
def test_default_segment_count(side, expected):
    assert segmentation.default_segment_count(side, side) == expected


# ── Helpers ──────────────────────────────────────────────────────────────


def test_segment_means():
    pixels = np.zeros((2, 4))
    pixels[:, 2:] = [[0.2, 0.4], [0.6, 0.8]]
    means = segmentation.segment_means(
        PlanarImage.from_array(pixels), make_half_segments(2, 4)
    )
    np.testing.assert_allclose(means, [[0.0], [0.5]])


def test_segment_means_rejects_dims_mismatch():
    with pytest.raises(DimensionError):
        segmentation.segment_means(
            PlanarImage.filled(4, 4, 0.0), make_half_segments(4, 6)
        )


def test_segment_boundaries_mark_the_seam():
    mask = segmentation.segment_boundaries(make_half_segments(3, 4))
    expected = np.zeros((3, 4), dtype=bool)
    expected[:, 1] = True
    np.testing.assert_array_equal(mask, expected)


def test_render_segments_paints_means_and_boundaries(tmp_path):
    pixels = np.zeros((4, 4))
    pixels[:, 2:] = 1.0
    path = tmp_path / 'segments.png'
    segmentation.render_segments(
        PlanarImage.from_array(pixels), make_half_segments(4, 4), path
    )
    out = imaging.load_image(path).to_array()
    np.testing.assert_allclose(out[:, 1], [[1.0, 1.0, 0.0]] * 4)
    np.testing.assert_allclose(out[:, 0], 0.0)
    np.testing.assert_allclose(out[:, 3], 1.0)
