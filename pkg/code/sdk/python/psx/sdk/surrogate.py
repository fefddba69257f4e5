"""Neighbourhood sampling, superpixel ablation and weighted ridge surrogates.

An explanation is built in two halves that the benchmark harness runs
separately:

1. :func:`query_neighbourhood` samples binary vectors over the superpixels,
   ablates the image accordingly and asks the black-box model about every
   perturbed image.
2. :func:`weigh_neighbourhood` turns those vectors and model outputs into
   kernel-weighted samples for one distance kind.

Reusing the first half across distance kinds keeps the sampled patterns and
the model queries identical, so only the weighting differs between them.
"""

from __future__ import annotations

import logging

from collections.abc import Sequence

import numpy as np

from psx.models.config import AblationMode, DistanceTag, SurrogateConfig
from psx.models.explanation import (
    Explanation,
    InterpretableVector,
    NeighbourhoodSample,
)
from psx.models.image import PlanarImage
from psx.models.segments import SegmentMap
from psx.sdk import metrics, segmentation
from psx.sdk.blackbox import ModelClient
from psx.sdk.errors import (
    DimensionError,
    ModelError,
    ParameterError,
    SingularityError,
)
from scipy import linalg


logger = logging.getLogger(__name__)

# Perturbed images held in memory at once while querying the model.
_QUERY_CHUNK = 64
_RANK_TOLERANCE = 1e-10


# ── Sampling and ablation ────────────────────────────────────────────────


def sample_matrix(segment_count: int, cfg: SurrogateConfig) -> np.ndarray:
    """``sample_count`` × ``segment_count`` 0/1 matrix; row 0 is all ones."""
    if segment_count < 1:
        raise ParameterError(f'segment_count must be >= 1, got {segment_count}')
    rng = np.random.default_rng(cfg.rng_seed)
    bits = rng.integers(0, 2, size=(cfg.sample_count, segment_count))
    bits[0] = 1
    return bits.astype(np.int64)


def sample_vectors(
    segment_count: int, cfg: SurrogateConfig
) -> list[InterpretableVector]:
    """Seeded i.i.d. uniform binary vectors, the first one all ones."""
    return [
        InterpretableVector(bits=row)
        for row in sample_matrix(segment_count, cfg)
    ]


def _bits_of(v: InterpretableVector | np.ndarray) -> np.ndarray:
    if isinstance(v, InterpretableVector):
        return v.bits
    return np.asarray(v)


def _fill_values(
    img: PlanarImage, seg: SegmentMap, mode: AblationMode
) -> np.ndarray:
    """Per-pixel replacement values, channel-first."""
    if mode == AblationMode.ZERO:
        return np.zeros_like(img.data)
    means = segmentation.segment_means(img, seg)
    return np.moveaxis(means[seg.labels], 2, 0)


def _ablate_with(
    img: PlanarImage,
    seg: SegmentMap,
    bits: np.ndarray,
    fill: np.ndarray,
) -> PlanarImage:
    if bits.shape != (seg.segment_count,):
        raise DimensionError(
            f'vector length {bits.shape[0]} does not match'
            f' {seg.segment_count} segments'
        )
    removed = bits[seg.labels] == 0
    return PlanarImage(data=np.where(removed, fill, img.data))


def ablate(
    img: PlanarImage,
    seg: SegmentMap,
    v: InterpretableVector | np.ndarray,
    mode: AblationMode = AblationMode.ZERO,
) -> PlanarImage:
    """Replace every superpixel whose bit is 0 with zeros or its mean colour.

    Raises:
        DimensionError: ``v`` does not have one bit per segment, or the image
            and segment map sizes differ.
    """
    if img.dims != tuple(seg.source_dims):
        raise DimensionError(
            f'image dims {img.dims} do not match segment map dims'
            f' {tuple(seg.source_dims)}'
        )
    return _ablate_with(img, seg, _bits_of(v), _fill_values(img, seg, mode))


# ── Neighbourhood ────────────────────────────────────────────────────────


def query_neighbourhood(
    img: PlanarImage,
    seg: SegmentMap,
    model: ModelClient,
    cfg: SurrogateConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample vectors and query the model on the ablated images.

    Returns:
        ``(bits, probs)``: the sample_count × segment_count vector matrix and
        the sample_count × class_count model probabilities, in sample order.

    Raises:
        ModelError: The model failed; ``sample_index`` names the sample.
    """
    bits = sample_matrix(seg.segment_count, cfg)
    fill = _fill_values(img, seg, cfg.ablation_mode)
    probs = []
    for start in range(0, bits.shape[0], _QUERY_CHUNK):
        chunk = bits[start : start + _QUERY_CHUNK]
        images = [_ablate_with(img, seg, row, fill) for row in chunk]
        try:
            answers = model.predict_batch(images)
        except ModelError as exc:
            index = start + (exc.sample_index or 0)
            raise type(exc)(
                f'model failed on neighbourhood sample {index}: {exc}',
                sample_index=index,
            ) from exc
        except Exception as exc:
            raise ModelError(
                f'model failed on neighbourhood samples starting at {start}:'
                f' {exc}',
                sample_index=start,
            ) from exc
        probs.extend(answer.probs for answer in answers)
    logger.debug(
        'queried %d neighbourhood samples over %d segments',
        bits.shape[0],
        seg.segment_count,
    )
    return bits, np.asarray(probs, dtype=np.float64)


def neighbourhood_distances(
    img: PlanarImage,
    seg: SegmentMap,
    bits: np.ndarray,
    cfg: SurrogateConfig,
) -> np.ndarray:
    """Distance of every sampled point to the query point under cfg.distance."""
    if cfg.distance.tag == DistanceTag.COSINE_BINARY:
        anchor = np.ones(bits.shape[1], dtype=np.int64)
        return np.array(
            [metrics.cosine_distance_binary(anchor, row) for row in bits]
        )
    distance = metrics.make_distance(img, cfg.distance)
    fill = _fill_values(img, seg, cfg.ablation_mode)
    distances = np.empty(bits.shape[0])
    for index, row in enumerate(bits):
        if np.all(row == 1):
            distances[index] = 0.0
        else:
            distances[index] = distance(_ablate_with(img, seg, row, fill))
    return distances


def weigh_neighbourhood(
    img: PlanarImage,
    seg: SegmentMap,
    bits: np.ndarray,
    probs: np.ndarray,
    class_ids: Sequence[int],
    cfg: SurrogateConfig,
) -> list[NeighbourhoodSample]:
    """Kernel-weighted samples for the classes in ``class_ids``."""
    if bits.shape[0] != probs.shape[0]:
        raise DimensionError(
            f'{bits.shape[0]} vectors but {probs.shape[0]} model outputs'
        )
    for class_id in class_ids:
        if not 0 <= class_id < probs.shape[1]:
            raise ParameterError(
                f'class {class_id} is outside 0..{probs.shape[1] - 1}'
            )
    columns = list(class_ids)
    distances = neighbourhood_distances(img, seg, bits, cfg)
    return [
        NeighbourhoodSample(
            vector=InterpretableVector(bits=row),
            weight=metrics.kernel_weight(float(d), cfg.kernel),
            targets=np.clip(p[columns], 0.0, 1.0),
        )
        for row, d, p in zip(bits, distances, probs, strict=True)
    ]


def build_neighbourhood(
    img: PlanarImage,
    seg: SegmentMap,
    model: ModelClient,
    class_ids: Sequence[int],
    cfg: SurrogateConfig,
) -> list[NeighbourhoodSample]:
    """Sample, query and weigh the neighbourhood of ``img`` in one call."""
    bits, probs = query_neighbourhood(img, seg, model, cfg)
    return weigh_neighbourhood(img, seg, bits, probs, class_ids, cfg)


# ── Fitting ──────────────────────────────────────────────────────────────


def _design(
    samples: Sequence[NeighbourhoodSample],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not samples:
        raise ParameterError('cannot fit a surrogate on zero samples')
    z = np.stack([s.vector.bits for s in samples]).astype(np.float64)
    w = np.array([s.weight for s in samples])
    y = np.stack([s.targets for s in samples])
    return z, w, y


def _ridge(
    z: np.ndarray, w: np.ndarray, y: np.ndarray, alpha: float
) -> tuple[np.ndarray, float]:
    """Weighted ridge with an unpenalized intercept, via centred normal equations."""
    if alpha < 0:
        raise ParameterError(f'alpha must be >= 0, got {alpha}')
    if np.unique(z, axis=0).shape[0] < 2:
        raise ParameterError('weighted ridge needs >= 2 distinct vectors')
    total = w.sum()
    z_mean = w @ z / total
    y_mean = float(w @ y / total)
    zc = z - z_mean
    yc = y - y_mean
    gram = zc.T @ (zc * w[:, None])
    gram[np.diag_indices_from(gram)] += alpha
    rhs = zc.T @ (w * yc)
    if alpha == 0:
        rank = np.linalg.matrix_rank(gram, tol=_RANK_TOLERANCE * max(1.0, gram.max()))
        if rank < gram.shape[0]:
            raise SingularityError(
                f'normal equations are singular (rank {rank} of'
                f' {gram.shape[0]}) and alpha is 0'
            )
    try:
        beta = linalg.solve(gram, rhs, assume_a='pos')
    except (linalg.LinAlgError, ValueError) as exc:
        raise SingularityError(f'cannot solve normal equations: {exc}') from exc
    return beta, y_mean - float(beta @ z_mean)


def weighted_ridge_fit(
    samples: Sequence[NeighbourhoodSample], class_index: int, alpha: float
) -> tuple[np.ndarray, float]:
    """Minimize ``Σ w (y - β·z - β₀)² + alpha‖β‖²`` in closed form.

    Args:
        samples: Weighted neighbourhood.
        class_index: Position in each sample's ``targets``.
        alpha: Ridge strength; the intercept is not penalized.

    Returns:
        ``(coefficients, intercept)``.

    Raises:
        ParameterError: Fewer than two distinct vectors or a bad index.
        SingularityError: ``alpha`` is 0 and the system is rank-deficient.
    """
    z, w, y = _design(samples)
    if not 0 <= class_index < y.shape[1]:
        raise ParameterError(
            f'class_index {class_index} is outside 0..{y.shape[1] - 1}'
        )
    return _ridge(z, w, y[:, class_index], alpha)


def weighted_r2(
    z: np.ndarray,
    w: np.ndarray,
    y: np.ndarray,
    coefficients: np.ndarray,
    intercept: float,
) -> float:
    """Weighted coefficient of determination of a fitted surrogate."""
    residual = y - (z @ coefficients + intercept)
    ss_res = float(w @ residual**2)
    y_mean = float(w @ y / w.sum())
    ss_tot = float(w @ (y - y_mean) ** 2)
    if ss_tot == 0.0:
        return 1.0 if ss_res <= _RANK_TOLERANCE else 0.0
    return 1.0 - ss_res / ss_tot


def explain_from_samples(
    samples: Sequence[NeighbourhoodSample],
    seg: SegmentMap,
    class_ids: Sequence[int],
    cfg: SurrogateConfig,
) -> Explanation:
    """Fit one surrogate per class over a shared weighted neighbourhood.

    ``samples[i].targets[j]`` must be the probability of ``class_ids[j]``.
    """
    class_ids = tuple(int(c) for c in class_ids)
    if len(set(class_ids)) != len(class_ids):
        raise ParameterError(f'class_ids must be distinct, got {class_ids}')
    z, w, y = _design(samples)
    if z.shape[1] != seg.segment_count:
        raise DimensionError(
            f'vectors have {z.shape[1]} bits, segment map has'
            f' {seg.segment_count} segments'
        )
    if y.shape[1] != len(class_ids):
        raise DimensionError(
            f'samples carry {y.shape[1]} targets for {len(class_ids)} classes'
        )
    coefficients, intercepts, scores, local = {}, {}, {}, {}
    ones = np.ones(seg.segment_count)
    for column, class_id in enumerate(class_ids):
        beta, beta0 = _ridge(z, w, y[:, column], cfg.ridge_alpha)
        coefficients[class_id] = beta
        intercepts[class_id] = beta0
        scores[class_id] = weighted_r2(z, w, y[:, column], beta, beta0)
        local[class_id] = float(ones @ beta + beta0)
        logger.debug(
            'class %d: R²=%.4f, local prediction %.4f, |β|max=%.4g',
            class_id,
            scores[class_id],
            local[class_id],
            float(np.max(np.abs(beta))),
        )
    return Explanation(
        class_ids=class_ids,
        coefficients=coefficients,
        intercepts=intercepts,
        scores=scores,
        local_predictions=local,
        segment_map=seg,
        config=cfg,
    )


def explain(
    img: PlanarImage,
    seg: SegmentMap,
    model: ModelClient,
    class_ids: Sequence[int],
    cfg: SurrogateConfig,
) -> Explanation:
    """Explain ``class_ids`` of ``model`` at ``img`` over the superpixels of ``seg``.

    Raises:
        ParameterError: Duplicate class ids, or fewer samples than
            ``segment_count + 1``.
        ModelError: Propagated from the model with the failing sample index.
    """
    if len(set(class_ids)) != len(class_ids):
        raise ParameterError(f'class_ids must be distinct, got {tuple(class_ids)}')
    if cfg.sample_count < seg.segment_count + 1:
        raise ParameterError(
            f'sample_count {cfg.sample_count} must be >= segment_count + 1'
            f' ({seg.segment_count + 1})'
        )
    samples = build_neighbourhood(img, seg, model, class_ids, cfg)
    return explain_from_samples(samples, seg, class_ids, cfg)
