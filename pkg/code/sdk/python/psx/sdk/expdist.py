"""Pixel-space projection of explanations and the explanation distance d_exp."""

from __future__ import annotations

import logging
import math
import pathlib

import numpy as np

from psx.models.explanation import Explanation, ImportanceMap
from psx.models.image import PlanarImage
from psx.sdk import imaging
from psx.sdk.errors import ComparabilityError, DimensionError


logger = logging.getLogger(__name__)

_POSITIVE_TINT = np.array([0.0, 1.0, 0.0])
_NEGATIVE_TINT = np.array([1.0, 0.0, 0.0])
_BOUNDARY_COLOR = np.array([1.0, 1.0, 0.0])


def project_explanation(expl: Explanation, class_id: int) -> ImportanceMap:
    """Paint every pixel with its superpixel's coefficient (no intercept).

    Raises:
        KeyError: ``class_id`` is not explained by ``expl``.
    """
    if class_id not in expl.coefficients:
        raise KeyError(
            f'class {class_id} is not explained; have {expl.class_ids}'
        )
    values = expl.coefficients[class_id][expl.segment_map.labels]
    return ImportanceMap(values=values, class_id=class_id)


def explanation_distance(
    a: Explanation, b: Explanation, per_pixel: bool = False
) -> float:
    """Mean over explained classes of the squared Frobenius map difference.

    Args:
        a: First explanation.
        b: Second explanation, possibly over a different segmentation.
        per_pixel: Divide by the pixel count, for cross-resolution use.

    Raises:
        ComparabilityError: The explained class sets differ.
        DimensionError: The source images differ in size.
    """
    if set(a.class_ids) != set(b.class_ids):
        raise ComparabilityError(
            f'explained classes differ: {sorted(a.class_ids)} vs'
            f' {sorted(b.class_ids)}'
        )
    dims_a = tuple(a.segment_map.source_dims)
    dims_b = tuple(b.segment_map.source_dims)
    if dims_a != dims_b:
        raise DimensionError(f'source dims differ: {dims_a} vs {dims_b}')
    terms = []
    for class_id in sorted(a.class_ids):
        diff = (
            project_explanation(a, class_id).values
            - project_explanation(b, class_id).values
        )
        terms.append(float(np.sum(diff * diff)))
    total = math.fsum(terms) / len(terms)
    if per_pixel:
        total /= dims_a[0] * dims_a[1]
    return total


def tint_importance(
    img: PlanarImage,
    imap: ImportanceMap,
    boundaries: np.ndarray | None = None,
) -> PlanarImage:
    """Green/red tint by coefficient sign, opacity ``|c| / max|c|``."""
    if img.dims != imap.values.shape:
        raise DimensionError(
            f'image dims {img.dims} do not match map dims {imap.values.shape}'
        )
    base = img.to_array()
    if base.shape[2] == 1:
        base = np.repeat(base, 3, axis=2)
    values = imap.values
    peak = float(np.max(np.abs(values)))
    if peak > 0:
        alpha = (np.abs(values) / peak)[:, :, np.newaxis]
        tint = np.where(values[:, :, np.newaxis] >= 0, _POSITIVE_TINT, _NEGATIVE_TINT)
        base = np.where(alpha > 0, (1.0 - alpha) * base + alpha * tint, base)
    if boundaries is not None:
        base[boundaries] = _BOUNDARY_COLOR
    return PlanarImage.from_array(base)


def render_importance(
    img: PlanarImage,
    imap: ImportanceMap,
    path: str | pathlib.Path,
    boundaries: np.ndarray | None = None,
) -> None:
    """Write :func:`tint_importance` as a PNG."""
    imaging.save_image(tint_importance(img, imap, boundaries), path)
    logger.debug('rendered importance of class %d to %s', imap.class_id, path)
