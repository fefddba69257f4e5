"""Tests for neighbourhood sampling and surrogate fitting (psx.sdk.surrogate)."""

import numpy as np
import pytest

from psx.models.config import AblationMode, DistanceKind, SurrogateConfig
from psx.models.explanation import Explanation, InterpretableVector, NeighbourhoodSample
from psx.models.image import PlanarImage
from psx.models.prediction import ClassProbabilities
from psx.sdk import segmentation, surrogate
from psx.sdk.blackbox import ModelClient, ToyClassifier, ToyModelClient
from psx.sdk.errors import (
    DimensionError,
    ModelError,
    ParameterError,
    SingularityError,
)
from psx.tests.conftest import (
    make_grid_segments,
    make_half_segments,
    make_random_image,
    make_smooth_image,
)


class _FailingClient(ModelClient):
    """Toy client that fails on its ``fail_at``-th call."""

    def __init__(self, fail_at: int, error: Exception):
        self._inner = ToyModelClient(ToyClassifier.seeded(4, 0))
        self._calls = 0
        self._fail_at = fail_at
        self._error = error

    @property
    def class_count(self) -> int:
        return 4

    def predict(self, img: PlanarImage) -> ClassProbabilities:
        call = self._calls
        self._calls += 1
        if call == self._fail_at:
            raise self._error
        return self._inner.predict(img)


def _samples(z, y, w=None):
    z = np.asarray(z)
    y = np.asarray(y, dtype=np.float64).reshape(len(z), -1)
    w = np.ones(len(z)) if w is None else np.asarray(w)
    return [
        NeighbourhoodSample(
            vector=InterpretableVector(bits=row), weight=weight, targets=target
        )
        for row, weight, target in zip(z, w, y, strict=True)
    ]


def _random_system(seed, features=5, count=50):
    rng = np.random.default_rng(seed)
    z = rng.integers(0, 2, size=(count, features))
    y = rng.random(count)
    w = rng.uniform(0.1, 1.0, size=count)
    return z, y, w


def _gradient_descent_ridge(z, y, w, alpha, iterations=20000):
    """Iterative oracle on the augmented quadratic, intercept unpenalized."""
    x = np.hstack([z.astype(np.float64), np.ones((len(z), 1))])
    penalty = np.diag([alpha] * z.shape[1] + [0.0])
    hessian = x.T @ (x * w[:, None]) + penalty
    rhs = x.T @ (w * y)
    step = 1.0 / np.linalg.eigvalsh(hessian).max()
    theta = np.zeros(x.shape[1])
    for _ in range(iterations):
        theta -= step * (hessian @ theta - rhs)
    return theta[:-1], theta[-1]


# ── Sampling ─────────────────────────────────────────────────────────────


def test_first_sample_is_all_ones():
    vectors = surrogate.sample_vectors(3, SurrogateConfig(sample_count=10, rng_seed=7))
    np.testing.assert_array_equal(vectors[0].bits, [1, 1, 1])
    assert len(vectors) == 10


def test_sampling_is_deterministic():
    cfg = SurrogateConfig(sample_count=50, rng_seed=11)
    np.testing.assert_array_equal(
        surrogate.sample_matrix(6, cfg), surrogate.sample_matrix(6, cfg)
    )


def test_sampling_bits_are_balanced():
    bits = surrogate.sample_matrix(10, SurrogateConfig(sample_count=1000, rng_seed=0))
    means = bits.mean(axis=0)
    assert np.all((means >= 0.45) & (means <= 0.55))


# ── Ablation ─────────────────────────────────────────────────────────────


@pytest.mark.parametrize('mode', list(AblationMode))
def test_ablate_all_ones_is_identity(mode):
    img = make_random_image(0, 8, 8, channels=3)
    seg = make_grid_segments(8, 8, 2, 2)
    out = surrogate.ablate(img, seg, InterpretableVector.ones(4), mode)
    np.testing.assert_array_equal(out.data, img.data)


def test_ablate_all_zeros_zero_mode():
    img = make_random_image(0, 8, 8)
    out = surrogate.ablate(
        img, make_grid_segments(8, 8, 2, 2), np.zeros(4, dtype=int), AblationMode.ZERO
    )
    np.testing.assert_array_equal(out.data, 0.0)


def test_ablate_all_zeros_segment_mean_preserves_global_mean():
    img = make_random_image(1, 12, 10, channels=3)
    seg = make_grid_segments(12, 10, 3, 2)
    out = surrogate.ablate(img, seg, np.zeros(6, dtype=int), AblationMode.SEGMENT_MEAN)
    assert out.data.mean() == pytest.approx(img.data.mean(), abs=1e-9)
    for segment in range(6):
        values = out.data[:, seg.labels == segment]
        np.testing.assert_allclose(
            values, np.broadcast_to(values[:, :1], values.shape), atol=1e-12
        )


def test_ablate_touches_only_zero_bits():
    img = make_random_image(2, 6, 6)
    seg = make_half_segments(6, 6)
    out = surrogate.ablate(img, seg, np.array([1, 0]), AblationMode.ZERO)
    np.testing.assert_array_equal(out.data[:, :, :3], img.data[:, :, :3])
    np.testing.assert_array_equal(out.data[:, :, 3:], 0.0)


def test_ablate_rejects_length_mismatch():
    with pytest.raises(DimensionError):
        surrogate.ablate(
            make_random_image(0, 4, 4), make_half_segments(4, 4), np.ones(3, dtype=int)
        )


# ── Neighbourhood ────────────────────────────────────────────────────────


@pytest.mark.parametrize(
    'kind',
    [DistanceKind.cosine(), DistanceKind.msssim(), DistanceKind.nlpd()],
    ids=['cosine', 'msssim', 'nlpd'],
)
def test_identity_sample_has_unit_weight(kind, toy_client):
    img = make_smooth_image(0, 32, channels=3)
    seg = make_grid_segments(32, 32, 2, 4)
    cfg = SurrogateConfig(sample_count=16, distance=kind)
    samples = surrogate.build_neighbourhood(img, seg, toy_client, (2, 5), cfg)
    assert samples[0].weight == 1.0
    np.testing.assert_allclose(
        samples[0].targets, toy_client.predict(img).probs[[2, 5]], atol=1e-12
    )


def test_cosine_weights_ignore_pixel_content(toy_client):
    seg = make_grid_segments(16, 16, 2, 2)
    cfg = SurrogateConfig(sample_count=20)
    weights = [
        [
            s.weight
            for s in surrogate.build_neighbourhood(
                make_random_image(seed, 16, 16), seg, toy_client, (0,), cfg
            )
        ]
        for seed in (1, 2)
    ]
    assert weights[0] == weights[1]


@pytest.mark.parametrize(
    'kind',
    [DistanceKind.cosine(), DistanceKind.msssim(), DistanceKind.nlpd()],
    ids=['cosine', 'msssim', 'nlpd'],
)
def test_weights_lie_in_unit_interval(kind, toy_client):
    img = make_smooth_image(5, 32, channels=3)
    seg = make_grid_segments(32, 32, 2, 4)
    cfg = SurrogateConfig(sample_count=64, distance=kind)
    weights = np.array(
        [s.weight for s in surrogate.build_neighbourhood(img, seg, toy_client, (0, 1), cfg)]
    )
    assert np.all(weights > 0.0)
    assert np.all(weights <= 1.0)


def test_query_reports_failing_sample_index():
    img = make_random_image(0, 16, 16)
    seg = make_half_segments(16, 16)
    client = _FailingClient(70, ModelError('boom'))
    with pytest.raises(ModelError) as excinfo:
        surrogate.query_neighbourhood(img, seg, client, SurrogateConfig(sample_count=100))
    assert excinfo.value.sample_index == 70


def test_query_wraps_unexpected_model_failures():
    img = make_random_image(0, 16, 16)
    seg = make_half_segments(16, 16)
    client = _FailingClient(3, RuntimeError('socket closed'))
    with pytest.raises(ModelError) as excinfo:
        surrogate.query_neighbourhood(img, seg, client, SurrogateConfig(sample_count=10))
    assert excinfo.value.sample_index == 0


def test_weigh_rejects_unknown_class(toy_client):
    img = make_random_image(0, 16, 16)
    seg = make_half_segments(16, 16)
    cfg = SurrogateConfig(sample_count=8)
    bits, probs = surrogate.query_neighbourhood(img, seg, toy_client, cfg)
    with pytest.raises(ParameterError):
        surrogate.weigh_neighbourhood(img, seg, bits, probs, (10,), cfg)


# ── weighted_ridge_fit ───────────────────────────────────────────────────


def test_constant_targets_fit_intercept_only():
    z, _, _ = _random_system(0, features=3, count=30)
    beta, beta0 = surrogate.weighted_ridge_fit(_samples(z, np.full(30, 0.7)), 0, 0.0)
    np.testing.assert_allclose(beta, 0.0, atol=1e-10)
    assert beta0 == pytest.approx(0.7, abs=1e-10)


def test_exact_interpolation_single_feature():
    beta, beta0 = surrogate.weighted_ridge_fit(_samples([[0], [1]], [0.0, 1.0]), 0, 0.0)
    assert beta[0] == pytest.approx(1.0, abs=1e-12)
    assert beta0 == pytest.approx(0.0, abs=1e-12)


def test_matches_gradient_descent_oracle():
    for seed in range(20):
        z, y, w = _random_system(seed)
        beta, beta0 = surrogate.weighted_ridge_fit(_samples(z, y, w), 0, 1.0)
        oracle_beta, oracle_beta0 = _gradient_descent_ridge(z, y, w, 1.0)
        np.testing.assert_allclose(beta, oracle_beta, atol=1e-6)
        assert beta0 == pytest.approx(oracle_beta0, abs=1e-6)


def test_matches_lstsq_at_zero_alpha():
    z, y, w = _random_system(3)
    beta, beta0 = surrogate.weighted_ridge_fit(_samples(z, y, w), 0, 0.0)
    x = np.hstack([z, np.ones((len(z), 1))]) * np.sqrt(w)[:, None]
    reference = np.linalg.lstsq(x, y * np.sqrt(w), rcond=None)[0]
    np.testing.assert_allclose(np.append(beta, beta0), reference, atol=1e-8)


def test_weight_scale_invariance_at_zero_alpha():
    z, y, w = _random_system(4)
    beta, beta0 = surrogate.weighted_ridge_fit(_samples(z, y, w), 0, 0.0)
    scaled, scaled0 = surrogate.weighted_ridge_fit(_samples(z, y, w * 0.25), 0, 0.0)
    np.testing.assert_allclose(beta, scaled, atol=1e-8)
    assert beta0 == pytest.approx(scaled0, abs=1e-8)


def test_ridge_shrinks_coefficients():
    for seed in range(10):
        samples = _samples(*_random_system(seed))
        norms = [
            np.linalg.norm(surrogate.weighted_ridge_fit(samples, 0, alpha)[0])
            for alpha in (0.0, 0.5, 2.0, 10.0)
        ]
        assert all(b <= a + 1e-10 for a, b in zip(norms, norms[1:]))


def test_singular_system_without_penalty():
    samples = _samples([[1, 1], [0, 0], [1, 1], [0, 0]], [0.2, 0.1, 0.3, 0.0])
    with pytest.raises(SingularityError):
        surrogate.weighted_ridge_fit(samples, 0, 0.0)
    beta, _ = surrogate.weighted_ridge_fit(samples, 0, 1.0)
    assert beta[0] == pytest.approx(beta[1])


def test_fit_needs_two_distinct_vectors():
    with pytest.raises(ParameterError):
        surrogate.weighted_ridge_fit(_samples([[1, 0], [1, 0]], [0.2, 0.4]), 0, 1.0)


def test_weighted_r2_of_exact_fit_is_one():
    z = np.array([[0], [1], [1], [0]], dtype=np.float64)
    y = np.array([0.1, 0.6, 0.6, 0.1])
    assert surrogate.weighted_r2(z, np.ones(4), y, np.array([0.5]), 0.1) == pytest.approx(1.0)


# ── explain ──────────────────────────────────────────────────────────────


def test_planted_signal_is_recovered():
    """The superpixel covering the planted cell dominates in >= 95% of runs."""
    seg = make_grid_segments(32, 32, 4, 4)
    hits = 0
    for trial in range(40):
        cell = trial % 16
        model = ToyModelClient(ToyClassifier.planted(cell, class_count=2, gain=8.0))
        img = PlanarImage(data=0.3 + 0.7 * make_random_image(trial, 32, 32).data)
        cfg = SurrogateConfig(
            sample_count=100, ablation_mode=AblationMode.ZERO, rng_seed=trial
        )
        expl = surrogate.explain(img, seg, model, (0,), cfg)
        hits += int(np.argmax(np.abs(expl.coefficients[0])) == cell)
    assert hits >= 38


def test_explain_rejects_duplicate_classes(toy_client, small_surrogate_config):
    with pytest.raises(ParameterError):
        surrogate.explain(
            make_random_image(0, 16, 16),
            make_half_segments(16, 16),
            toy_client,
            (1, 1),
            small_surrogate_config,
        )


def test_explain_needs_more_samples_than_segments(toy_client):
    with pytest.raises(ParameterError):
        surrogate.explain(
            make_random_image(0, 16, 16),
            make_grid_segments(16, 16, 4, 4),
            toy_client,
            (0,),
            SurrogateConfig(sample_count=16),
        )


def test_explain_is_deterministic(toy_client, small_surrogate_config):
    img = make_smooth_image(2, 32, channels=3)
    seg = segmentation.slic_segment(img, 8)
    cfg = small_surrogate_config.with_distance(DistanceKind.msssim())
    first = surrogate.explain(img, seg, toy_client, (3, 4), cfg)
    second = surrogate.explain(img, seg, toy_client, (3, 4), cfg)
    assert first.model_dump_json() == second.model_dump_json()


def test_explanation_records_scores_and_local_predictions(toy_client, small_surrogate_config):
    img = make_smooth_image(3, 32)
    seg = make_grid_segments(32, 32, 2, 2)
    expl = surrogate.explain(img, seg, toy_client, (0, 1), small_surrogate_config)
    assert set(expl.scores) == {0, 1}
    for class_id in (0, 1):
        assert expl.scores[class_id] <= 1.0
        assert expl.local_predictions[class_id] == pytest.approx(
            expl.coefficients[class_id].sum() + expl.intercepts[class_id]
        )


def test_explanation_save_load(tmp_path, toy_client, small_surrogate_config):
    img = make_smooth_image(4, 32)
    seg = make_grid_segments(32, 32, 2, 2)
    expl = surrogate.explain(img, seg, toy_client, (6, 2), small_surrogate_config)
    path = tmp_path / 'expl.json'
    expl.save(path)
    loaded = Explanation.load(path)
    assert loaded.class_ids == (6, 2)
    for class_id in (6, 2):
        np.testing.assert_array_equal(loaded.coefficients[class_id], expl.coefficients[class_id])
        assert loaded.intercepts[class_id] == expl.intercepts[class_id]
    np.testing.assert_array_equal(loaded.segment_map.labels, seg.labels)
    assert loaded.config.rng_seed == small_surrogate_config.rng_seed
