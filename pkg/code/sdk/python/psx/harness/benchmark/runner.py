"""Robustness benchmark: distort, filter by top-K agreement, explain, compare.

For every (image, distortion) pair the reference and the distorted image are
classified. Pairs whose top-K classes differ are recorded with
``agreed=False``. Otherwise both images are segmented independently, their
neighbourhoods are sampled and queried once, and each distance kind only
re-weights those samples before the surrogates are fit and compared. The
reference explanations of an image are computed once and shared by all of
its distortions.
"""

from __future__ import annotations

import csv
import functools
import logging
import math
import pathlib
import threading
import time

from collections.abc import Callable, Iterable, Sequence
from concurrent import futures

import numpy as np

from psx.harness import constants, corpus, events, render
from psx.models.config import DistanceKind
from psx.models.experiment import DistortionSpec, ExperimentConfig
from psx.models.explanation import Explanation
from psx.models.image import PlanarImage
from psx.models.prediction import ClassProbabilities
from psx.models.results import PairResult, SummaryRow, YieldRow
from psx.sdk import blackbox, distortion, expdist, segmentation, surrogate
from psx.sdk.blackbox import ModelClient
from psx.sdk.errors import ModelError, ParameterError, PsxError


logger = logging.getLogger(__name__)

OVERALL = '*'

RESULT_FIELDS = (
    'image_id',
    'family',
    'severity',
    'distance_kind',
    'agreed',
    'd_exp',
    'top_classes',
    'error',
)
SUMMARY_FIELDS = (
    'family',
    'distance_kind',
    'mean',
    'std',
    'agreed_count',
    'disagreed_count',
    'error_count',
)
YIELD_FIELDS = ('family', 'severity', 'agreed_pairs', 'total_pairs')
TIMING_FIELDS = ('image_id', 'family', 'severity', 'distance_kind', 'seconds')


# ── Explaining one image ─────────────────────────────────────────────────


def explain_all_kinds(
    img: PlanarImage,
    model: ModelClient,
    class_ids: Sequence[int],
    cfg: ExperimentConfig,
    distances: Sequence[DistanceKind] | None = None,
) -> dict[str, Explanation]:
    """One explanation per distance kind over a shared neighbourhood.

    Returns:
        Explanations keyed by distance label, in ``distances`` order.
    """
    distances = tuple(distances or cfg.distances)
    seg = segmentation.slic_segment(
        img,
        cfg.segmentation.target_segments,
        cfg.segmentation.compactness,
        cfg.segmentation.iterations,
    )
    if cfg.surrogate.sample_count < seg.segment_count + 1:
        raise ParameterError(
            f'sample_count {cfg.surrogate.sample_count} must be >='
            f' segment_count + 1 ({seg.segment_count + 1})'
        )
    bits, probs = surrogate.query_neighbourhood(img, seg, model, cfg.surrogate)
    explanations = {}
    for kind in distances:
        kind_cfg = cfg.surrogate.with_distance(kind)
        samples = surrogate.weigh_neighbourhood(
            img, seg, bits, probs, class_ids, kind_cfg
        )
        explanations[kind.label] = surrogate.explain_from_samples(
            samples, seg, class_ids, kind_cfg
        )
    return explanations


class ReferenceExplanations:
    """Reference explanations per (image, classes), computed once.

    Every distortion of an image explains the same reference, so concurrent
    pairs of that image wait for the first one to finish and then share its
    result, including a failure.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, tuple[int, ...]], futures.Future] = {}

    def get(
        self,
        image_id: str,
        class_ids: tuple[int, ...],
        compute: Callable[[], dict[str, Explanation]],
    ) -> dict[str, Explanation]:
        key = (image_id, tuple(class_ids))
        with self._lock:
            entry = self._entries.get(key)
            owner = entry is None
            if owner:
                entry = self._entries[key] = futures.Future()
        if owner:
            try:
                entry.set_result(compute())
            except BaseException as exc:
                entry.set_exception(exc)
                raise
        return entry.result()


def _overlay_paths(
    root: pathlib.Path, image_id: str, spec: DistortionSpec, label: str
) -> tuple[str, str]:
    stem = f'{image_id}__{spec.family.value}-{spec.severity}__{label}'
    return (
        str(root / constants.OVERLAY_DIR / f'{stem}__ref'),
        str(root / constants.OVERLAY_DIR / f'{stem}__dist'),
    )


def _write_overlays(
    cfg: ExperimentConfig,
    image_id: str,
    spec: DistortionSpec,
    reference: PlanarImage,
    distorted: PlanarImage,
    ref_expls: dict[str, Explanation],
    dist_expls: dict[str, Explanation],
) -> None:
    for label, ref_expl in ref_expls.items():
        ref_stem, dist_stem = _overlay_paths(cfg.output_dir, image_id, spec, label)
        for class_id in ref_expl.class_ids:
            render.render_overlay(
                reference, ref_expl, class_id, f'{ref_stem}__c{class_id}.png'
            )
            render.render_overlay(
                distorted,
                dist_expls[label],
                class_id,
                f'{dist_stem}__c{class_id}.png',
            )


# ── Pairs ────────────────────────────────────────────────────────────────


def _predict(
    model: ModelClient, img: PlanarImage, role: str
) -> ClassProbabilities:
    try:
        return model.predict(img)
    except PsxError:
        raise
    except Exception as exc:
        raise ModelError(f'model failed on the {role} image: {exc}') from exc


def run_pair(
    reference: PlanarImage,
    spec: DistortionSpec,
    cfg: ExperimentConfig,
    *,
    model: ModelClient | None = None,
    image_id: str = 'image',
    references: ReferenceExplanations | None = None,
) -> list[PairResult]:
    """All distance-kind rows for one (image, distortion) pair.

    Model and other psx failures are recorded in the ``error`` column of every
    row of the pair instead of being raised. Model exceptions outside the psx
    hierarchy are recorded as ``ModelError``. ``references`` shares reference
    explanations between pairs of the same ``image_id``.
    """
    own_model = model is None
    if own_model:
        model = blackbox.create_model_client(cfg.model)
    started = time.perf_counter()
    base = {
        'image_id': image_id,
        'family': spec.family.value,
        'severity': spec.severity,
    }
    labels = [kind.label for kind in cfg.distances]
    agreed = False
    top_classes: tuple[int, ...] = ()
    try:
        distorted = distortion.apply_distortion(reference, spec)
        ref_probs = _predict(model, reference, 'reference')
        dist_probs = _predict(model, distorted, 'distorted')
        top_classes = blackbox.top_k(ref_probs, cfg.top_k)
        agreed = blackbox.top_k_agree(
            ref_probs, dist_probs, cfg.top_k, ordered=cfg.ordered_top_k
        )
        if not agreed:
            logger.info(
                '%s %s: top-%d classes differ, skipping explanations',
                image_id,
                spec.label,
                cfg.top_k,
            )
            return [
                PairResult(
                    **base,
                    distance_kind=label,
                    agreed=False,
                    top_classes=top_classes,
                    timing=time.perf_counter() - started,
                )
                for label in labels
            ]
        explain_reference = functools.partial(
            explain_all_kinds, reference, model, top_classes, cfg
        )
        ref_expls = (
            explain_reference()
            if references is None
            else references.get(image_id, top_classes, explain_reference)
        )
        dist_expls = explain_all_kinds(distorted, model, top_classes, cfg)
        if cfg.overlay:
            _write_overlays(
                cfg, image_id, spec, reference, distorted, ref_expls, dist_expls
            )
        elapsed = time.perf_counter() - started
        return [
            PairResult(
                **base,
                distance_kind=label,
                agreed=True,
                d_exp=expdist.explanation_distance(
                    ref_expls[label], dist_expls[label], per_pixel=cfg.per_pixel
                ),
                top_classes=top_classes,
                timing=elapsed,
            )
            for label in labels
        ]
    except PsxError as exc:
        logger.warning('%s %s failed: %s', image_id, spec.label, exc)
        return [
            PairResult(
                **base,
                distance_kind=label,
                agreed=agreed,
                top_classes=top_classes,
                timing=time.perf_counter() - started,
                error=f'{type(exc).__name__}: {exc}',
            )
            for label in labels
        ]
    finally:
        if own_model:
            model.close()


def pair_specs(cfg: ExperimentConfig, image_index: int) -> list[DistortionSpec]:
    """Distortions applied to the ``image_index``-th corpus image."""
    return [
        DistortionSpec(family=family, severity=severity, seed=cfg.seed + image_index)
        for family in cfg.families
        for severity in cfg.severities
    ]


def _sort_key(cfg: ExperimentConfig):
    order = {kind.label: i for i, kind in enumerate(cfg.distances)}
    families = {family.value: i for i, family in enumerate(cfg.families)}
    return lambda r: (
        r.image_id,
        families.get(r.family, len(families)),
        r.severity,
        order.get(r.distance_kind, len(order)),
    )


def run_benchmark(
    cfg: ExperimentConfig,
    images: Sequence[tuple[str, PlanarImage]] | None = None,
    model: ModelClient | None = None,
) -> list[PairResult]:
    """Every image × family × severity pair, rows in deterministic order.

    Args:
        cfg: Benchmark configuration.
        images: ``(image_id, image)`` pairs; defaults to ``cfg.corpus_dir``.
        model: Shared client; defaults to one built from ``cfg.model``.
    """
    if images is None:
        if cfg.corpus_dir is None:
            raise ParameterError('no images given and no corpus_dir configured')
        images = corpus.load_corpus(cfg.corpus_dir, cfg.image_limit)
    elif cfg.image_limit is not None:
        images = images[: cfg.image_limit]
    if not images:
        raise ParameterError('the corpus is empty')

    own_model = model is None
    if own_model:
        model = blackbox.create_model_client(cfg.model)
    work = [
        (image_id, img, spec)
        for index, (image_id, img) in enumerate(images)
        for spec in pair_specs(cfg, index)
    ]
    events.log_event(
        'bench',
        'before',
        {
            'images': len(images),
            'pairs': len(work),
            'distances': [kind.label for kind in cfg.distances],
            'workers': cfg.workers,
        },
    )
    results: list[PairResult] = []
    references = ReferenceExplanations()
    try:
        with futures.ThreadPoolExecutor(cfg.workers) as pool:
            pending = [
                pool.submit(
                    run_pair,
                    img,
                    spec,
                    cfg,
                    model=model,
                    image_id=image_id,
                    references=references,
                )
                for image_id, img, spec in work
            ]
            for (image_id, _, spec), future in zip(work, pending, strict=True):
                rows = future.result()
                results.extend(rows)
                events.log_event(
                    'pair',
                    'after',
                    {
                        'image_id': image_id,
                        'distortion': spec.label,
                        'agreed': rows[0].agreed,
                        'error': rows[0].error,
                    },
                )
    finally:
        if own_model:
            model.close()
    results.sort(key=_sort_key(cfg))
    events.log_event(
        'bench',
        'after',
        {
            'rows': len(results),
            'agreed_pairs': sum(r.agreed for r in results) // len(cfg.distances),
        },
    )
    return results


# ── Aggregation ──────────────────────────────────────────────────────────


def _summary_row(
    family: str, kind: str, rows: Sequence[PairResult]
) -> SummaryRow:
    values = np.array([r.d_exp for r in rows if r.d_exp is not None])
    errors = sum(r.error is not None for r in rows)
    disagreed = sum((not r.agreed) and r.error is None for r in rows)
    return SummaryRow(
        family=family,
        distance_kind=kind,
        mean=float(values.mean()) if values.size else None,
        std=float(values.std()) if values.size else None,
        agreed_count=int(values.size),
        disagreed_count=disagreed,
        error_count=errors,
    )


def aggregate(results: Iterable[PairResult]) -> list[SummaryRow]:
    """Mean and population std of d_exp per (family, kind), plus overall rows.

    Families are sorted by name; kinds keep their first-seen order. Overall
    rows use family ``*`` and come last.
    """
    results = list(results)
    if not results:
        return []
    kinds = list(dict.fromkeys(r.distance_kind for r in results))
    families = sorted({r.family for r in results})
    table = []
    for family in families:
        for kind in kinds:
            rows = [
                r for r in results if r.family == family and r.distance_kind == kind
            ]
            if rows:
                table.append(_summary_row(family, kind, rows))
    for kind in kinds:
        table.append(
            _summary_row(
                OVERALL, kind, [r for r in results if r.distance_kind == kind]
            )
        )
    return table


def yield_table(results: Iterable[PairResult]) -> list[YieldRow]:
    """Agreed versus total image pairs per (family, severity)."""
    pairs: dict[tuple[str, int], dict[str, bool]] = {}
    for r in results:
        seen = pairs.setdefault((r.family, r.severity), {})
        seen[r.image_id] = seen.get(r.image_id, False) or r.agreed
    return [
        YieldRow(
            family=family,
            severity=severity,
            agreed_pairs=sum(seen.values()),
            total_pairs=len(seen),
        )
        for (family, severity), seen in sorted(pairs.items())
    ]


def mean_by_kind(results: Iterable[PairResult]) -> dict[str, float]:
    """Overall mean d_exp per distance kind (NaN when nothing agreed)."""
    return {
        row.distance_kind: row.mean if row.mean is not None else math.nan
        for row in aggregate(results)
        if row.family == OVERALL
    }


# ── Output ───────────────────────────────────────────────────────────────


def _cell(value) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ' '.join(str(v) for v in value)
    return str(value)


def _write_csv(
    path: pathlib.Path, fields: Sequence[str], rows: Iterable[dict]
) -> pathlib.Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_cell(row[name]) for name in fields])
    return path


def write_results(
    results: Sequence[PairResult], directory: pathlib.Path
) -> pathlib.Path:
    """``results.csv``; wall-clock timings go to ``timings.csv`` instead."""
    _write_csv(
        directory / constants.TIMINGS_CSV,
        TIMING_FIELDS,
        ({**r.model_dump(), 'seconds': r.timing} for r in results),
    )
    return _write_csv(
        directory / constants.RESULTS_CSV,
        RESULT_FIELDS,
        (r.model_dump() for r in results),
    )


def write_summary(
    rows: Sequence[SummaryRow], directory: pathlib.Path
) -> pathlib.Path:
    return _write_csv(
        directory / constants.SUMMARY_CSV,
        SUMMARY_FIELDS,
        (r.model_dump() for r in rows),
    )


def write_yield(
    rows: Sequence[YieldRow], directory: pathlib.Path
) -> pathlib.Path:
    return _write_csv(
        directory / constants.YIELD_CSV,
        YIELD_FIELDS,
        (r.model_dump() for r in rows),
    )


def write_run_config(cfg: ExperimentConfig, directory: pathlib.Path) -> pathlib.Path:
    """Echo of the effective configuration."""
    path = directory / constants.RUN_CONFIG_JSON
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(cfg.model_dump_json(indent=2), encoding='utf-8')
    return path
