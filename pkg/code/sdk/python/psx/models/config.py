"""Configuration models for neighbourhood weighting and explanation fitting."""

from __future__ import annotations

import enum
import math

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# Canonical five-scale MS-SSIM exponents, finest scale first.
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

DEFAULT_KERNEL_WIDTH = 0.25
DEFAULT_NLPD_CONSTANT = 0.17
DEFAULT_SAMPLE_COUNT = 1000

_WEIGHT_SUM_TOLERANCE = 1e-9


class DistanceTag(enum.StrEnum):
    """The neighbourhood distances ``D`` of the kernel weighting."""

    COSINE_BINARY = 'cosine_binary'
    MSSSIM = 'msssim'
    NLPD = 'nlpd'


# CLI spellings accepted in addition to the tag values.
_TAG_ALIASES = {
    'cosine': DistanceTag.COSINE_BINARY,
    'ms-ssim': DistanceTag.MSSSIM,
}


def _renormalize(weights: tuple[float, ...]) -> tuple[float, ...]:
    total = math.fsum(weights)
    return tuple(w / total for w in weights)


class DistanceKind(BaseModel):
    """A distance tag together with its metric-specific parameters."""

    model_config = ConfigDict(frozen=True)

    tag: DistanceTag = Field(..., description='Which distance to use.')
    msssim_weights: tuple[float, ...] = Field(
        _renormalize(MSSSIM_WEIGHTS),
        description=(
            'Per-scale MS-SSIM exponents, finest first. Truncated and'
            ' renormalized when the image supports fewer scales.'
        ),
    )
    nlpd_stages: int | None = Field(
        None,
        description=(
            'NLPD pyramid stage count; None picks 4 at desk scale and 6 when'
            ' the image dims permit.'
        ),
    )
    nlpd_constant: float = Field(
        DEFAULT_NLPD_CONSTANT,
        description='Additive constant of the divisive normalization.',
    )

    @field_validator('msssim_weights')
    @classmethod
    def _check_weights(cls, weights: tuple[float, ...]) -> tuple[float, ...]:
        if not weights:
            raise ValueError('MS-SSIM needs at least one scale weight')
        if any(w <= 0 for w in weights):
            raise ValueError(f'MS-SSIM weights must be positive, got {weights}')
        if abs(math.fsum(weights) - 1.0) >= _WEIGHT_SUM_TOLERANCE:
            raise ValueError(f'MS-SSIM weights must sum to 1, got {weights}')
        return weights

    @field_validator('nlpd_stages')
    @classmethod
    def _check_stages(cls, stages: int | None) -> int | None:
        if stages is not None and stages < 1:
            raise ValueError(f'NLPD stages must be >= 1, got {stages}')
        return stages

    @field_validator('nlpd_constant')
    @classmethod
    def _check_constant(cls, constant: float) -> float:
        if constant <= 0:
            raise ValueError(
                f'NLPD normalization constant must be > 0, got {constant}'
            )
        return constant

    @classmethod
    def cosine(cls) -> DistanceKind:
        return cls(tag=DistanceTag.COSINE_BINARY)

    @classmethod
    def msssim(cls, weights: tuple[float, ...] | None = None) -> DistanceKind:
        if weights is None:
            return cls(tag=DistanceTag.MSSSIM)
        return cls(tag=DistanceTag.MSSSIM, msssim_weights=weights)

    @classmethod
    def nlpd(
        cls,
        stages: int | None = None,
        constant: float = DEFAULT_NLPD_CONSTANT,
    ) -> DistanceKind:
        return cls(
            tag=DistanceTag.NLPD, nlpd_stages=stages, nlpd_constant=constant
        )

    @classmethod
    def parse(cls, text: str) -> DistanceKind:
        """Parse a CLI spelling such as ``cosine``, ``msssim`` or ``nlpd``."""
        key = text.strip().lower()
        tag = _TAG_ALIASES.get(key)
        if tag is None:
            try:
                tag = DistanceTag(key)
            except ValueError as exc:
                known = ', '.join(['cosine', 'msssim', 'nlpd'])
                raise ValueError(
                    f'Unknown distance {text!r}; expected one of {known}'
                ) from exc
        return cls(tag=tag)

    @property
    def label(self) -> str:
        """Short name used in result tables."""
        if self.tag == DistanceTag.COSINE_BINARY:
            return 'cosine'
        return self.tag.value


class KernelConfig(BaseModel):
    """Width of the exponential neighbourhood kernel."""

    model_config = ConfigDict(frozen=True)

    width: float = Field(
        DEFAULT_KERNEL_WIDTH, description='Kernel width sigma, must be > 0.'
    )

    @field_validator('width')
    @classmethod
    def _check_width(cls, width: float) -> float:
        if not width > 0:
            raise ValueError(f'kernel width must be > 0, got {width}')
        return width


class AblationMode(enum.StrEnum):
    """How an ablated superpixel is filled."""

    ZERO = 'zero'
    SEGMENT_MEAN = 'segment_mean'


class SurrogateConfig(BaseModel):
    """Sampling and fitting parameters of one surrogate explanation."""

    model_config = ConfigDict(frozen=True)

    sample_count: int = Field(
        DEFAULT_SAMPLE_COUNT,
        description='Neighbourhood size, including the all-ones sample.',
    )
    ablation_mode: AblationMode = Field(
        AblationMode.ZERO,
        description='Fill applied to ablated superpixels.',
    )
    ridge_alpha: float = Field(
        1.0, description='L2 penalty on the surrogate coefficients.'
    )
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    distance: DistanceKind = Field(default_factory=DistanceKind.cosine)
    rng_seed: int = Field(0, description='Seed of the binary sampler.')

    @field_validator('sample_count')
    @classmethod
    def _check_sample_count(cls, count: int) -> int:
        if count < 2:
            raise ValueError(f'sample_count must be >= 2, got {count}')
        return count

    @field_validator('ridge_alpha')
    @classmethod
    def _check_alpha(cls, alpha: float) -> float:
        if alpha < 0:
            raise ValueError(f'ridge_alpha must be >= 0, got {alpha}')
        return alpha

    def with_distance(self, distance: DistanceKind) -> SurrogateConfig:
        return self.model_copy(update={'distance': distance})


class SegmentationConfig(BaseModel):
    """SLIC parameters; ``target_segments=None`` scales with image size."""

    model_config = ConfigDict(frozen=True)

    target_segments: int | None = Field(None, ge=2)
    compactness: float = Field(10.0, gt=0)
    iterations: int = Field(10, ge=1)


class ModelBackend(enum.StrEnum):
    TOY = 'toy'
    EXTERNAL = 'external'


class ModelClientConfig(BaseModel):
    """Which black-box model answers the neighbourhood queries."""

    model_config = ConfigDict(frozen=True)

    backend: ModelBackend = Field(ModelBackend.TOY)
    class_count: int = Field(10, description='Number of model classes.')
    endpoint: str | None = Field(
        None, description='Base URL of the model server (external only).'
    )
    toy_seed: int = Field(0, description='Seed of the toy weights (toy only).')
    max_in_flight: int = Field(8, ge=1)
    timeout_s: float = Field(30.0, gt=0)
    retries: int = Field(2, ge=0)

    @field_validator('class_count')
    @classmethod
    def _check_class_count(cls, count: int) -> int:
        if count < 2:
            raise ValueError(f'class_count must be >= 2, got {count}')
        return count

    @model_validator(mode='after')
    def _check_endpoint(self) -> ModelClientConfig:
        if self.backend == ModelBackend.EXTERNAL and not self.endpoint:
            raise ValueError('external model backend requires an endpoint')
        return self
