"""Command-line entry point of psx.

Usage::

    psx explain IMAGE --distances=cosine,msssim,nlpd --classes=top2 --out=DIR
    psx bench --corpus=DIR --families=gaussian_noise,gaussian_blur \
        --severities=1-5 --distances=cosine,msssim,nlpd --model=toy --out=DIR
    psx corpus --count=30 --size=64 --out=DIR
"""

from __future__ import annotations

import logging
import pathlib

from collections.abc import Sequence

from absl import app, flags
from psx.harness import constants, corpus, events, render
from psx.harness.benchmark import runner
from psx.models.config import (
    AblationMode,
    DistanceKind,
    KernelConfig,
    ModelBackend,
    ModelClientConfig,
    SegmentationConfig,
    SurrogateConfig,
)
from psx.models.experiment import SEVERITIES, DistortionFamily, ExperimentConfig
from psx.sdk import blackbox, imaging, segmentation
from psx.sdk.errors import ParameterError


FLAGS = flags.FLAGS

flags.DEFINE_string('image', None, 'Image to explain (explain).')
flags.DEFINE_string('corpus', None, 'Directory of PNG/PPM images (bench).')
flags.DEFINE_integer('images', None, 'Use only the first N corpus images.')
flags.DEFINE_list(
    'families', ['gaussian_noise', 'gaussian_blur'], 'Distortion families.'
)
flags.DEFINE_string('severities', '1-5', 'Severities, e.g. 1-5 or 1,3.')
flags.DEFINE_list(
    'distances', ['cosine', 'msssim', 'nlpd'], 'Neighbourhood distances.'
)
flags.DEFINE_string(
    'distance', None, 'Single neighbourhood distance; overrides --distances.'
)
flags.DEFINE_string('classes', 'top2', 'topN or a comma list of class ids.')
flags.DEFINE_string('model', 'toy', 'toy, or the base URL of a model server.')
flags.DEFINE_integer('class_count', 10, 'Classes of the model.')
flags.DEFINE_integer('seed', 0, 'Seed of sampling, distortions and the toy.')
flags.DEFINE_string('out', 'psx-out', 'Output directory.')
flags.DEFINE_float('width', 0.25, 'Kernel width sigma.')
flags.DEFINE_integer('samples', 1000, 'Neighbourhood samples per image.')
flags.DEFINE_float('alpha', 1.0, 'Ridge strength.')
flags.DEFINE_enum(
    'ablation', 'zero', [m.value for m in AblationMode], 'Ablation fill.'
)
flags.DEFINE_integer('segments', None, 'Target superpixels (default by size).')
flags.DEFINE_integer('top_k', 2, 'Classes that must be shared (bench).')
flags.DEFINE_bool('ordered_top_k', False, 'Require the same top-K order.')
flags.DEFINE_bool('per_pixel', False, 'Normalize d_exp by the pixel count.')
flags.DEFINE_bool('overlay', False, 'Render overlay PNGs.')
flags.DEFINE_integer('workers', 1, 'Image pairs run in parallel.')
flags.DEFINE_integer('count', 30, 'Images to generate (corpus).')
flags.DEFINE_integer('size', 64, 'Side of generated images (corpus).')

_COMMANDS = ('explain', 'bench', 'corpus')


def parse_severities(text: str) -> tuple[int, ...]:
    """``1-5`` or ``1,3,5``."""
    text = text.strip()
    try:
        if '-' in text:
            low, high = (int(part) for part in text.split('-', 1))
            values = tuple(range(low, high + 1))
        else:
            values = tuple(int(part) for part in text.split(',') if part.strip())
    except ValueError as exc:
        raise ParameterError(f'cannot parse severities {text!r}') from exc
    bad = [v for v in values if v not in SEVERITIES]
    if not values or bad:
        raise ParameterError(f'severities must lie in 1..5, got {text!r}')
    return values


def parse_classes(text: str, probs) -> tuple[int, ...]:
    """``topN`` against ``probs``, or an explicit comma list."""
    text = text.strip().lower()
    if text.startswith('top'):
        return blackbox.top_k(probs, int(text[3:] or 1))
    return tuple(int(part) for part in text.split(','))


def _model_config() -> ModelClientConfig:
    if FLAGS.model == 'toy':
        return ModelClientConfig(
            backend=ModelBackend.TOY,
            class_count=FLAGS.class_count,
            toy_seed=FLAGS.seed,
        )
    endpoint = FLAGS.model if FLAGS.model != 'external' else constants.DEFAULT_MODEL_URL
    return ModelClientConfig(
        backend=ModelBackend.EXTERNAL,
        class_count=FLAGS.class_count,
        endpoint=endpoint,
    )


def _distances_from_flags() -> tuple[DistanceKind, ...]:
    if FLAGS.distance:
        return (DistanceKind.parse(FLAGS.distance),)
    return tuple(DistanceKind.parse(d) for d in FLAGS.distances)


def experiment_config_from_flags() -> ExperimentConfig:
    """The :class:`ExperimentConfig` described by the command-line flags."""
    return ExperimentConfig(
        corpus_dir=pathlib.Path(FLAGS.corpus) if FLAGS.corpus else None,
        image_limit=FLAGS.images,
        families=tuple(DistortionFamily(f.strip()) for f in FLAGS.families),
        severities=parse_severities(FLAGS.severities),
        distances=_distances_from_flags(),
        top_k=FLAGS.top_k,
        ordered_top_k=FLAGS.ordered_top_k,
        surrogate=SurrogateConfig(
            sample_count=FLAGS.samples,
            ablation_mode=AblationMode(FLAGS.ablation),
            ridge_alpha=FLAGS.alpha,
            kernel=KernelConfig(width=FLAGS.width),
            rng_seed=FLAGS.seed,
        ),
        segmentation=SegmentationConfig(target_segments=FLAGS.segments),
        model=_model_config(),
        output_dir=pathlib.Path(FLAGS.out),
        overlay=FLAGS.overlay,
        per_pixel=FLAGS.per_pixel,
        workers=FLAGS.workers,
        seed=FLAGS.seed,
    )


def run_explain(image_path: str, cfg: ExperimentConfig) -> None:
    img = imaging.load_image(image_path)
    image_id = pathlib.Path(image_path).stem
    with blackbox.create_model_client(cfg.model) as model:
        class_ids = parse_classes(FLAGS.classes, model.predict(img))
        explanations = runner.explain_all_kinds(img, model, class_ids, cfg)
    out = cfg.output_dir
    for label, expl in explanations.items():
        expl.save(out / constants.EXPLANATION_DIR / f'{image_id}__{label}.json')
        for class_id in expl.class_ids:
            render.render_overlay(
                img,
                expl,
                class_id,
                out / constants.OVERLAY_DIR / f'{image_id}__{label}__c{class_id}.png',
            )
    segmentation.render_segments(
        img,
        next(iter(explanations.values())).segment_map,
        out / constants.OVERLAY_DIR / f'{image_id}__segments.png',
    )
    runner.write_run_config(cfg, out)
    logging.info(
        'explained classes %s of %s under %s into %s',
        class_ids,
        image_path,
        ', '.join(explanations),
        out,
    )


def run_bench(cfg: ExperimentConfig) -> None:
    if cfg.corpus_dir is None:
        raise app.UsageError('bench requires --corpus')
    runner.write_run_config(cfg, cfg.output_dir)
    results = runner.run_benchmark(cfg)
    runner.write_results(results, cfg.output_dir)
    summary = runner.aggregate(results)
    runner.write_summary(summary, cfg.output_dir)
    runner.write_yield(runner.yield_table(results), cfg.output_dir)
    for row in summary:
        if row.family == runner.OVERALL:
            logging.info(
                'd_exp[%s] = %s ± %s over %d agreed pairs',
                row.distance_kind,
                row.mean,
                row.std,
                row.agreed_count,
            )


def run_corpus() -> None:
    images = corpus.make_synthetic_corpus(FLAGS.count, FLAGS.size, FLAGS.seed)
    corpus.write_corpus(images, FLAGS.out)


def main(argv: Sequence[str]) -> None:
    if len(argv) < 2 or argv[1] not in _COMMANDS:
        raise app.UsageError(f'expected one of {", ".join(_COMMANDS)}')
    logging.getLogger().addHandler(events.create_file_handler())
    command = argv[1]
    events.log_event('cli', 'before', {'command': command, 'argv': list(argv[1:])})
    if command == 'corpus':
        run_corpus()
        return
    cfg = experiment_config_from_flags()
    if command == 'explain':
        image = FLAGS.image or (argv[2] if len(argv) > 2 else None)
        if image is None:
            raise app.UsageError('explain requires an image path')
        run_explain(image, cfg)
    else:
        run_bench(cfg)
    events.log_event('cli', 'after', {'command': command, 'out': str(cfg.output_dir)})


def run() -> None:
    app.run(main)


if __name__ == '__main__':
    run()
