"""Overlay PNGs of explanations."""

from __future__ import annotations

import pathlib

from psx.models.explanation import Explanation
from psx.models.image import PlanarImage
from psx.sdk import expdist, segmentation


def render_overlay(
    img: PlanarImage,
    expl: Explanation,
    class_id: int,
    path: str | pathlib.Path,
) -> None:
    """Tint superpixels green (positive) or red (negative) over ``img``.

    Opacity is ``|c| / max|c|`` and segment boundaries are drawn in yellow.

    Raises:
        KeyError: ``class_id`` is not explained.
        OSError: ``path`` cannot be written.
    """
    expdist.render_importance(
        img,
        expdist.project_explanation(expl, class_id),
        path,
        boundaries=segmentation.segment_boundaries(expl.segment_map),
    )
