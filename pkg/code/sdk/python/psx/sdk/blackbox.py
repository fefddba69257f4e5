"""The black-box classifier as a pluggable client.

``toy`` is an in-process softmax over 4×4 grid-cell luminance means with
seeded weights. ``external`` speaks a one-endpoint HTTP protocol::

    POST {endpoint}/predict   {"image_png_b64": "..."}  ->  {"probs": [...]}
"""

from __future__ import annotations

import abc
import logging

from collections.abc import Sequence
from concurrent import futures

import httpx
import numpy as np

from psx.models.config import ModelBackend, ModelClientConfig
from psx.models.image import PlanarImage
from psx.models.prediction import ClassProbabilities, PredictRequest, PredictResponse
from psx.sdk import imaging, utils
from psx.sdk.errors import (
    DimensionError,
    ModelError,
    ParameterError,
    ProtocolError,
    SizeError,
    TransportError,
)
from pydantic import ValidationError
from scipy import special


logger = logging.getLogger(__name__)

GRID_SIDE = 4
FEATURE_COUNT = GRID_SIDE * GRID_SIDE

_WEIGHT_SCALE = 3.0
_BIAS_SCALE = 0.5


# ── Toy classifier ───────────────────────────────────────────────────────


def cell_features(img: PlanarImage) -> np.ndarray:
    """Mean luminance of each cell of a 4×4 grid, row-major.

    Cell ``i`` spans rows ``floor(i·H/4)`` to ``floor((i+1)·H/4)``; columns
    likewise.

    Raises:
        SizeError: The image is smaller than 4×4.
    """
    height, width = img.dims
    if height < GRID_SIDE or width < GRID_SIDE:
        raise SizeError(
            f'toy model needs at least {GRID_SIDE}x{GRID_SIDE} pixels, got'
            f' {height}x{width}'
        )
    plane = imaging.grayscale_array(img.data)
    rows = [i * height // GRID_SIDE for i in range(GRID_SIDE + 1)]
    cols = [j * width // GRID_SIDE for j in range(GRID_SIDE + 1)]
    return np.array(
        [
            plane[rows[i] : rows[i + 1], cols[j] : cols[j + 1]].mean()
            for i in range(GRID_SIDE)
            for j in range(GRID_SIDE)
        ]
    )


class ToyClassifier:
    """Softmax of a fixed linear map of the 16 cell features."""

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weights.ndim != 2 or weights.shape[1] != FEATURE_COUNT:
            raise DimensionError(
                f'weights must be (classes, {FEATURE_COUNT}), got'
                f' {weights.shape}'
            )
        if bias.shape != (weights.shape[0],):
            raise DimensionError(
                f'bias must have {weights.shape[0]} entries, got {bias.shape}'
            )
        if weights.shape[0] < 2:
            raise ParameterError('a classifier needs at least 2 classes')
        self.weights = weights
        self.bias = bias

    @classmethod
    def seeded(cls, class_count: int, seed: int) -> ToyClassifier:
        """Weights ~ N(0, 3²) then bias ~ N(0, 0.5²), from ``default_rng(seed)``."""
        if class_count < 2:
            raise ParameterError(f'class_count must be >= 2, got {class_count}')
        rng = np.random.default_rng(seed)
        weights = rng.normal(0.0, _WEIGHT_SCALE, size=(class_count, FEATURE_COUNT))
        bias = rng.normal(0.0, _BIAS_SCALE, size=class_count)
        return cls(weights, bias)

    @classmethod
    def planted(
        cls, cell: int, class_count: int = 2, gain: float = 8.0
    ) -> ToyClassifier:
        """Class 0's logit is ``gain`` × the mean of one grid cell; all else 0."""
        if not 0 <= cell < FEATURE_COUNT:
            raise ParameterError(f'cell must lie in 0..{FEATURE_COUNT - 1}')
        if class_count < 2:
            raise ParameterError(f'class_count must be >= 2, got {class_count}')
        weights = np.zeros((class_count, FEATURE_COUNT))
        weights[0, cell] = gain
        return cls(weights, np.zeros(class_count))

    @property
    def class_count(self) -> int:
        return int(self.weights.shape[0])

    def logits(self, img: PlanarImage) -> np.ndarray:
        return self.weights @ cell_features(img) + self.bias

    def __call__(self, img: PlanarImage) -> ClassProbabilities:
        return ClassProbabilities(probs=special.softmax(self.logits(img)))


def toy_predict(
    img: PlanarImage, class_count: int, seed: int
) -> ClassProbabilities:
    """Probabilities of the seeded toy classifier."""
    return ToyClassifier.seeded(class_count, seed)(img)


# ── Clients ──────────────────────────────────────────────────────────────


class ModelClient(abc.ABC):
    """Answers class-probability queries; safe for concurrent use."""

    @property
    @abc.abstractmethod
    def class_count(self) -> int:
        """Number of classes of every answer."""

    @abc.abstractmethod
    def predict(self, img: PlanarImage) -> ClassProbabilities:
        """Probabilities for one image."""

    def predict_batch(
        self, images: Sequence[PlanarImage]
    ) -> list[ClassProbabilities]:
        """Probabilities for every image, in input order.

        Raises:
            ModelError: ``sample_index`` is the position of the failing image.
        """
        answers = []
        for index, img in enumerate(images):
            try:
                answers.append(self.predict(img))
            except ModelError as exc:
                exc.sample_index = index
                raise
        return answers

    def close(self) -> None:
        pass

    def __enter__(self) -> ModelClient:
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class ToyModelClient(ModelClient):
    """In-process client around a :class:`ToyClassifier`."""

    def __init__(self, classifier: ToyClassifier):
        self.classifier = classifier

    @property
    def class_count(self) -> int:
        return self.classifier.class_count

    def predict(self, img: PlanarImage) -> ClassProbabilities:
        return self.classifier(img)


class HttpModelClient(ModelClient):
    """Client of an external model server.

    In-flight requests are bounded by ``max_in_flight``; transport failures
    are retried ``retries`` times before surfacing as :class:`TransportError`.
    """

    def __init__(
        self,
        endpoint: str,
        class_count: int,
        *,
        max_in_flight: int = 8,
        timeout_s: float = 30.0,
        retries: int = 2,
        transport: httpx.BaseTransport | None = None,
    ):
        self._url = endpoint.rstrip('/') + '/predict'
        self._class_count = class_count
        self._retries = retries
        self._max_in_flight = max_in_flight
        self._http = httpx.Client(
            timeout=httpx.Timeout(timeout=timeout_s),
            limits=httpx.Limits(max_connections=max_in_flight),
            transport=transport,
        )

    @property
    def class_count(self) -> int:
        return self._class_count

    def _post(self, body: dict) -> httpx.Response:
        attempt = 0
        while True:
            try:
                return self._http.post(self._url, json=body)
            except httpx.RequestError as exc:
                if attempt >= self._retries:
                    raise TransportError(
                        f'model server {self._url} unreachable after'
                        f' {attempt + 1} attempts: {exc!r}'
                    ) from exc
                attempt += 1
                logger.warning(
                    'request to %s failed (%r); retry %d of %d',
                    self._url,
                    exc,
                    attempt,
                    self._retries,
                )

    def predict(self, img: PlanarImage) -> ClassProbabilities:
        request = PredictRequest(image_png_b64=utils.image_to_b64_png(img))
        response = self._post(request.model_dump())
        if response.status_code != httpx.codes.OK:
            raise ProtocolError(
                f'model server answered HTTP {response.status_code}:'
                f' {response.text[:200]}'
            )
        try:
            answer = PredictResponse.model_validate_json(response.content)
            probs = ClassProbabilities(probs=np.array(answer.probs))
        except ValidationError as exc:
            raise ProtocolError(f'malformed model response: {exc}') from exc
        if probs.class_count != self._class_count:
            raise ProtocolError(
                f'expected {self._class_count} probabilities, got'
                f' {probs.class_count}'
            )
        return probs

    def predict_batch(
        self, images: Sequence[PlanarImage]
    ) -> list[ClassProbabilities]:
        if len(images) <= 1:
            return super().predict_batch(images)
        with futures.ThreadPoolExecutor(self._max_in_flight) as pool:
            pending = [pool.submit(self.predict, img) for img in images]
            answers = []
            for index, future in enumerate(pending):
                try:
                    answers.append(future.result())
                except ModelError as exc:
                    for rest in pending[index + 1 :]:
                        rest.cancel()
                    exc.sample_index = index
                    raise
        return answers

    def close(self) -> None:
        self._http.close()


def create_model_client(cfg: ModelClientConfig) -> ModelClient:
    """Client for the configured backend."""
    if cfg.backend == ModelBackend.TOY:
        return ToyModelClient(ToyClassifier.seeded(cfg.class_count, cfg.toy_seed))
    logger.info('using external model at %s', cfg.endpoint)
    return HttpModelClient(
        cfg.endpoint,
        cfg.class_count,
        max_in_flight=cfg.max_in_flight,
        timeout_s=cfg.timeout_s,
        retries=cfg.retries,
    )


def predict(client: ModelClient, img: PlanarImage) -> ClassProbabilities:
    return client.predict(img)


# ── Top-K ────────────────────────────────────────────────────────────────


def top_k(p: ClassProbabilities, k: int) -> tuple[int, ...]:
    """Indices of the ``k`` largest probabilities, descending, ties by index."""
    if not 1 <= k <= p.class_count:
        raise ParameterError(f'k must lie in 1..{p.class_count}, got {k}')
    order = np.argsort(-p.probs, kind='stable')
    return tuple(int(i) for i in order[:k])


def top_k_agree(
    p: ClassProbabilities,
    q: ClassProbabilities,
    k: int,
    ordered: bool = False,
) -> bool:
    """Whether ``p`` and ``q`` share their top-``k`` classes.

    Set equality by default; ``ordered`` also requires the same ranking.
    """
    if p.class_count != q.class_count:
        raise DimensionError(
            f'class counts differ: {p.class_count} vs {q.class_count}'
        )
    a, b = top_k(p, k), top_k(q, k)
    if ordered:
        return a == b
    return set(a) == set(b)
