"""SLIC superpixels: the interpretable domain of an image explanation.

Colours are the image channels scaled to the 0-100 range of Lab lightness so
that the compactness constant keeps its usual meaning. Centres start on a
regular grid, pixels join the nearest centre within a ``2S`` window, and
after the last iteration stray fragments are merged into their largest
neighbour so every superpixel is one 4-connected region.
"""

from __future__ import annotations

import logging
import math
import pathlib

import numpy as np

from psx.models.image import PlanarImage
from psx.models.segments import FOUR_CONNECTED, SegmentMap
from psx.sdk import imaging
from psx.sdk.errors import DimensionError, ParameterError
from scipy import ndimage


logger = logging.getLogger(__name__)

_COLOR_SCALE = 100.0
_SMALL_IMAGE = 64
_LARGE_IMAGE = 224
_SMALL_SEGMENTS = 16
_LARGE_SEGMENTS = 50
_BOUNDARY_COLOR = (1.0, 1.0, 0.0)


def default_segment_count(height: int, width: int) -> int:
    """16 superpixels up to 64px, 50 from 224px, linear in between."""
    side = min(height, width)
    if side <= _SMALL_IMAGE:
        return _SMALL_SEGMENTS
    if side >= _LARGE_IMAGE:
        return _LARGE_SEGMENTS
    fraction = (side - _SMALL_IMAGE) / (_LARGE_IMAGE - _SMALL_IMAGE)
    return round(_SMALL_SEGMENTS + fraction * (_LARGE_SEGMENTS - _SMALL_SEGMENTS))


def _grid_shape(height: int, width: int, target: int) -> tuple[int, int]:
    cols = min(width, math.ceil(math.sqrt(target * width / height)))
    rows = max(1, min(height, round(target / cols)))
    return rows, cols


def _initial_centers(
    color: np.ndarray, target: int
) -> np.ndarray:
    """Grid-cell centres as rows of (y, x, colour...)."""
    height, width = color.shape[:2]
    rows, cols = _grid_shape(height, width, target)
    row_edges = [round(i * height / rows) for i in range(rows + 1)]
    col_edges = [round(j * width / cols) for j in range(cols + 1)]
    centers = []
    for i in range(rows):
        for j in range(cols):
            cell = color[row_edges[i] : row_edges[i + 1], col_edges[j] : col_edges[j + 1]]
            centers.append(
                [
                    (i + 0.5) * height / rows - 0.5,
                    (j + 0.5) * width / cols - 0.5,
                    *cell.reshape(-1, color.shape[2]).mean(axis=0),
                ]
            )
    return np.asarray(centers, dtype=np.float64)


def _assign(
    color: np.ndarray,
    centers: np.ndarray,
    spacing: float,
    compactness: float,
) -> np.ndarray:
    """Nearest-centre labels; ties go to the lower centre index."""
    height, width = color.shape[:2]
    spatial_scale = (compactness / spacing) ** 2
    reach = int(math.ceil(2 * spacing))
    best = np.full((height, width), np.inf)
    labels = np.full((height, width), -1, dtype=np.int64)
    for index, center in enumerate(centers):
        cy, cx = center[0], center[1]
        y0, y1 = max(int(cy) - reach, 0), min(int(cy) + reach + 1, height)
        x0, x1 = max(int(cx) - reach, 0), min(int(cx) + reach + 1, width)
        if y0 >= y1 or x0 >= x1:
            continue
        ys, xs = np.ogrid[y0:y1, x0:x1]
        color_sq = np.sum((color[y0:y1, x0:x1] - center[2:]) ** 2, axis=2)
        spatial_sq = (ys - cy) ** 2 + (xs - cx) ** 2
        distance = color_sq + spatial_scale * spatial_sq
        window_best = best[y0:y1, x0:x1]
        closer = distance < window_best
        window_best[closer] = distance[closer]
        labels[y0:y1, x0:x1][closer] = index
    unreached = labels < 0
    if np.any(unreached):
        ys, xs = np.nonzero(unreached)
        pixels = color[ys, xs]
        spatial_sq = (ys[:, None] - centers[None, :, 0]) ** 2 + (
            xs[:, None] - centers[None, :, 1]
        ) ** 2
        color_sq = np.sum((pixels[:, None, :] - centers[None, :, 2:]) ** 2, axis=2)
        labels[ys, xs] = np.argmin(color_sq + spatial_scale * spatial_sq, axis=1)
    return labels


def _update(
    color: np.ndarray, labels: np.ndarray, centers: np.ndarray
) -> np.ndarray:
    height, width, channels = color.shape
    ys, xs = np.mgrid[0:height, 0:width]
    flat = labels.ravel()
    count = centers.shape[0]
    sizes = np.bincount(flat, minlength=count).astype(np.float64)
    updated = centers.copy()
    occupied = sizes > 0
    columns = [ys.ravel(), xs.ravel()] + [
        color[:, :, c].ravel() for c in range(channels)
    ]
    for position, values in enumerate(columns):
        sums = np.bincount(flat, weights=values, minlength=count)
        updated[occupied, position] = sums[occupied] / sizes[occupied]
    return updated


def _enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    """Keep each label's largest component; merge the rest into neighbours."""
    result = labels.copy()
    orphan = np.zeros(labels.shape, dtype=bool)
    for segment in np.unique(labels):
        components, count = ndimage.label(
            labels == segment, structure=FOUR_CONNECTED
        )
        if count > 1:
            sizes = np.bincount(components.ravel())[1:]
            keep = int(np.argmax(sizes)) + 1
            orphan |= (components > 0) & (components != keep)
    result[orphan] = -1

    while np.any(orphan):
        sizes = np.bincount(result[result >= 0], minlength=int(labels.max()) + 1)
        components, count = ndimage.label(orphan, structure=FOUR_CONNECTED)
        merged = False
        for component in range(1, count + 1):
            mask = components == component
            ring = (
                ndimage.binary_dilation(mask, structure=FOUR_CONNECTED)
                & ~mask
                & (result >= 0)
            )
            neighbours = np.unique(result[ring])
            if neighbours.size == 0:
                continue
            target = max(neighbours.tolist(), key=lambda s: (sizes[s], -s))
            result[mask] = target
            sizes[target] += int(mask.sum())
            merged = True
        orphan = result < 0
        if not merged:
            break
    return result


def _relabel_by_first_appearance(labels: np.ndarray) -> np.ndarray:
    ids, first = np.unique(labels.ravel(), return_index=True)
    order = ids[np.argsort(first)]
    mapping = np.zeros(int(labels.max()) + 1, dtype=np.int64)
    mapping[order] = np.arange(order.size)
    return mapping[labels]


def slic_segment(
    img: PlanarImage,
    target_segments: int | None = None,
    compactness: float = 10.0,
    iterations: int = 10,
) -> SegmentMap:
    """Deterministic SLIC superpixels of ``img``.

    Args:
        img: Image to segment (gray or RGB).
        target_segments: Desired superpixel count; ``None`` picks
            :func:`default_segment_count`.
        compactness: Weight of the spatial term against colour.
        iterations: k-means iterations.

    Raises:
        ParameterError: A parameter is out of range, including more segments
            than pixels.
    """
    height, width = img.dims
    if target_segments is None:
        target_segments = default_segment_count(height, width)
    if target_segments < 2:
        raise ParameterError(
            f'target_segments must be >= 2, got {target_segments}'
        )
    if target_segments > height * width:
        raise ParameterError(
            f'target_segments {target_segments} exceeds the pixel count'
            f' {height * width}'
        )
    if not compactness > 0:
        raise ParameterError(f'compactness must be > 0, got {compactness}')
    if iterations < 1:
        raise ParameterError(f'iterations must be >= 1, got {iterations}')

    color = img.to_array() * _COLOR_SCALE
    spacing = math.sqrt(height * width / target_segments)
    centers = _initial_centers(color, target_segments)
    labels = _assign(color, centers, spacing, compactness)
    for _ in range(iterations - 1):
        centers = _update(color, labels, centers)
        labels = _assign(color, centers, spacing, compactness)

    labels = _relabel_by_first_appearance(_enforce_connectivity(labels))
    seg = SegmentMap.from_labels(labels)
    logger.debug(
        'slic: %dx%d image, target %d, got %d segments',
        height,
        width,
        target_segments,
        seg.segment_count,
    )
    return seg


def _check_dims(img: PlanarImage, seg: SegmentMap) -> None:
    if img.dims != tuple(seg.source_dims):
        raise DimensionError(
            f'image dims {img.dims} do not match segment map dims'
            f' {tuple(seg.source_dims)}'
        )


def segment_means(img: PlanarImage, seg: SegmentMap) -> np.ndarray:
    """Mean colour of every segment, shape (segment_count, channels).

    Raises:
        DimensionError: Image and segment map sizes differ.
    """
    _check_dims(img, seg)
    flat = seg.labels.ravel()
    sizes = seg.sizes().astype(np.float64)
    return np.stack(
        [
            np.bincount(flat, weights=plane.ravel(), minlength=seg.segment_count)
            / sizes
            for plane in img.data
        ],
        axis=1,
    )


def segment_boundaries(seg: SegmentMap) -> np.ndarray:
    """1-px boundary mask: pixels whose right or lower neighbour differs."""
    labels = seg.labels
    mask = np.zeros(labels.shape, dtype=bool)
    mask[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    mask[:-1, :] |= labels[:-1, :] != labels[1:, :]
    return mask


def render_segments(
    img: PlanarImage, seg: SegmentMap, path: str | pathlib.Path
) -> None:
    """Debug PNG: segments painted in their mean colour, yellow boundaries."""
    means = segment_means(img, seg)
    painted = means[seg.labels]
    if painted.shape[2] == 1:
        painted = np.repeat(painted, 3, axis=2)
    painted[segment_boundaries(seg)] = _BOUNDARY_COLOR
    imaging.save_image(PlanarImage.from_array(painted), path)
