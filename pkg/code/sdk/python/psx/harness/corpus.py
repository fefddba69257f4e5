"""Reference image corpora: synthetic desk-scale images or a directory of files."""

from __future__ import annotations

import logging
import pathlib

import numpy as np

from psx.harness import constants
from psx.models.image import PlanarImage
from psx.sdk import imaging
from psx.sdk.errors import ParameterError


logger = logging.getLogger(__name__)

_MIN_BLOBS = 3
_MAX_BLOBS = 7


def _synthetic_image(size: int, rng: np.random.Generator) -> PlanarImage:
    """Smooth RGB image: a linear colour gradient under soft Gaussian blobs."""
    ys, xs = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    start, end = rng.random(3), rng.random(3)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    ramp = 0.5 + 0.5 * (np.cos(angle) * (xs - 0.5) + np.sin(angle) * (ys - 0.5))
    pixels = start + ramp[:, :, np.newaxis] * (end - start)
    for _ in range(rng.integers(_MIN_BLOBS, _MAX_BLOBS + 1)):
        cy, cx = rng.random(2)
        radius = rng.uniform(0.08, 0.3)
        color = rng.random(3)
        mask = np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2.0 * radius**2))
        pixels = pixels * (1.0 - mask[:, :, np.newaxis]) + mask[:, :, np.newaxis] * color
    return PlanarImage.from_array(np.clip(pixels, 0.0, 1.0))


def make_synthetic_corpus(
    count: int, size: int = 64, seed: int = 0
) -> list[tuple[str, PlanarImage]]:
    """``count`` seeded ``size``×``size`` images named ``synth-0000`` onwards."""
    if count < 1:
        raise ParameterError(f'count must be >= 1, got {count}')
    if size < 16:
        raise ParameterError(f'size must be >= 16, got {size}')
    rng = np.random.default_rng(seed)
    return [(f'synth-{i:04d}', _synthetic_image(size, rng)) for i in range(count)]


def write_corpus(
    images: list[tuple[str, PlanarImage]], directory: str | pathlib.Path
) -> list[pathlib.Path]:
    """Save every image as ``<image_id>.png`` under ``directory``."""
    target = pathlib.Path(directory)
    paths = []
    for image_id, img in images:
        path = target / f'{image_id}.png'
        imaging.save_image(img, path)
        paths.append(path)
    logger.info('wrote %d corpus images to %s', len(paths), target)
    return paths


def load_corpus(
    directory: str | pathlib.Path, limit: int | None = None
) -> list[tuple[str, PlanarImage]]:
    """PNG/PPM files of ``directory`` sorted by name, id = file stem.

    Raises:
        OSError: The directory cannot be listed or a file cannot be read.
        ParameterError: No image files were found.
    """
    source = pathlib.Path(directory)
    paths = sorted(
        p
        for p in source.iterdir()
        if p.is_file() and p.suffix.lower() in constants.CORPUS_SUFFIXES
    )
    if limit is not None:
        paths = paths[:limit]
    if not paths:
        raise ParameterError(f'no PNG/PPM images found in {source}')
    return [(path.stem, imaging.load_image(path)) for path in paths]
