"""Black-box model outputs."""

from __future__ import annotations

import numpy as np

from psx.models.arrays import FloatArray
from pydantic import BaseModel, ConfigDict, Field, field_validator


_SUM_TOLERANCE = 1e-6
_RANGE_TOLERANCE = 1e-12


class ClassProbabilities(BaseModel):
    """A normalized probability vector over the model's classes."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    probs: FloatArray = Field(..., description='Probability of every class.')

    @field_validator('probs')
    @classmethod
    def _check_probs(cls, probs: np.ndarray) -> np.ndarray:
        if probs.ndim != 1 or probs.shape[0] < 2:
            raise ValueError(
                f'probabilities must be a vector over >= 2 classes, got '
                f'shape {probs.shape}'
            )
        if not np.all(np.isfinite(probs)):
            raise ValueError('probabilities contain NaN or Inf')
        if np.any(probs < -_RANGE_TOLERANCE) or np.any(
            probs > 1.0 + _RANGE_TOLERANCE
        ):
            raise ValueError(f'probabilities must lie in [0, 1], got {probs}')
        total = float(probs.sum())
        if abs(total - 1.0) > _SUM_TOLERANCE:
            raise ValueError(f'probabilities sum to {total}, expected 1')
        clipped = np.clip(probs, 0.0, 1.0)
        clipped.setflags(write=False)
        return clipped

    @property
    def class_count(self) -> int:
        return int(self.probs.shape[0])


class PredictRequest(BaseModel):
    """Body of ``POST /predict``."""

    image_png_b64: str = Field(
        ..., description='Standard base64 of an 8-bit PNG image.'
    )


class PredictResponse(BaseModel):
    """Answer of ``POST /predict``."""

    probs: list[float] = Field(
        ..., description='Probability of every class, summing to 1.'
    )
