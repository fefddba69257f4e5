"""Distortion and benchmark configuration."""

from __future__ import annotations

import enum
import pathlib

from psx.models.config import (
    DistanceKind,
    ModelClientConfig,
    SegmentationConfig,
    SurrogateConfig,
)
from pydantic import BaseModel, ConfigDict, Field, field_validator


SEVERITIES = (1, 2, 3, 4, 5)


class DistortionFamily(enum.StrEnum):
    """Parametric corruptions, after the common-corruptions benchmark."""

    GAUSSIAN_NOISE = 'gaussian_noise'
    SHOT_NOISE = 'shot_noise'
    IMPULSE_NOISE = 'impulse_noise'
    SPECKLE_NOISE = 'speckle_noise'
    GAUSSIAN_BLUR = 'gaussian_blur'
    BRIGHTNESS = 'brightness'
    CONTRAST = 'contrast'
    SATURATE = 'saturate'
    PIXELATE = 'pixelate'
    JPEG = 'jpeg'
    # No-op at every severity; for pipeline checks.
    IDENTITY = 'identity'


class DistortionSpec(BaseModel):
    """A family at one severity, with the seed of stochastic families."""

    model_config = ConfigDict(frozen=True)

    family: DistortionFamily
    severity: int = Field(..., description='Strength, 1 (mild) to 5.')
    seed: int = Field(0, description='Seed of stochastic families.')

    @field_validator('severity')
    @classmethod
    def _check_severity(cls, severity: int) -> int:
        if severity not in SEVERITIES:
            raise ValueError(f'severity must be one of 1..5, got {severity}')
        return severity

    @property
    def label(self) -> str:
        return f'{self.family.value}:{self.severity}'


class ExperimentConfig(BaseModel):
    """Everything a benchmark run depends on."""

    model_config = ConfigDict(frozen=True)

    corpus_dir: pathlib.Path | None = Field(
        None, description='Directory of PNG/PPM reference images.'
    )
    image_limit: int | None = Field(
        None, ge=1, description='Use only the first N corpus images.'
    )
    families: tuple[DistortionFamily, ...]
    severities: tuple[int, ...] = SEVERITIES
    distances: tuple[DistanceKind, ...]
    top_k: int = Field(2, description='Classes that must be shared.')
    ordered_top_k: bool = Field(
        False, description='Require the top-K classes in the same order.'
    )
    surrogate: SurrogateConfig = Field(default_factory=SurrogateConfig)
    segmentation: SegmentationConfig = Field(
        default_factory=SegmentationConfig
    )
    model: ModelClientConfig = Field(default_factory=ModelClientConfig)
    output_dir: pathlib.Path = pathlib.Path('psx-out')
    overlay: bool = Field(False, description='Render overlay PNGs.')
    per_pixel: bool = Field(
        False, description='Normalize d_exp by the pixel count.'
    )
    workers: int = Field(1, ge=1, description='Image pairs run in parallel.')
    seed: int = Field(0, description='Seed of stochastic distortions.')

    @field_validator('families', 'distances')
    @classmethod
    def _check_non_empty(cls, values: tuple) -> tuple:
        if not values:
            raise ValueError('at least one entry is required')
        return values

    @field_validator('severities')
    @classmethod
    def _check_severities(cls, severities: tuple[int, ...]) -> tuple[int, ...]:
        if not severities:
            raise ValueError('at least one severity is required')
        bad = [s for s in severities if s not in SEVERITIES]
        if bad:
            raise ValueError(f'severities must lie in 1..5, got {bad}')
        return severities

    @field_validator('top_k')
    @classmethod
    def _check_top_k(cls, top_k: int) -> int:
        if top_k < 1:
            raise ValueError(f'top_k must be >= 1, got {top_k}')
        return top_k
