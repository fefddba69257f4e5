"""Interpretable-domain samples and surrogate explanations."""

from __future__ import annotations

import json
import pathlib

import numpy as np

from psx.models.arrays import FloatArray, IntArray
from psx.models.config import SurrogateConfig
from psx.models.segments import SegmentMap
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class InterpretableVector(BaseModel):
    """Presence (1) or ablation (0) of every superpixel."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bits: IntArray = Field(..., description='Binary vector, one bit per segment.')

    @field_validator('bits')
    @classmethod
    def _check_bits(cls, bits: np.ndarray) -> np.ndarray:
        if bits.ndim != 1:
            raise ValueError(f'bits must be 1-D, got shape {bits.shape}')
        if not np.all((bits == 0) | (bits == 1)):
            raise ValueError('bits must be 0 or 1')
        return bits

    @classmethod
    def ones(cls, length: int) -> InterpretableVector:
        """The query point's own representation x′."""
        return cls(bits=np.ones(length, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.bits.shape[0])


class NeighbourhoodSample(BaseModel):
    """One kernel-weighted training point of the surrogate."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    vector: InterpretableVector
    weight: float = Field(..., description='Kernel weight, in (0, 1].')
    targets: FloatArray = Field(
        ..., description='Black-box probability of every explained class.'
    )

    @field_validator('weight')
    @classmethod
    def _check_weight(cls, weight: float) -> float:
        if not 0.0 < weight <= 1.0:
            raise ValueError(f'sample weight must lie in (0, 1], got {weight}')
        return weight

    @field_validator('targets')
    @classmethod
    def _check_targets(cls, targets: np.ndarray) -> np.ndarray:
        if targets.ndim != 1:
            raise ValueError('targets must be 1-D')
        if np.any(targets < 0.0) or np.any(targets > 1.0):
            raise ValueError(f'targets must lie in [0, 1], got {targets}')
        return targets


class Explanation(BaseModel):
    """Per-class linear surrogate over the superpixels of one image."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    class_ids: tuple[int, ...] = Field(
        ..., description='Explained class indices, distinct.'
    )
    coefficients: dict[int, FloatArray] = Field(
        ..., description='Surrogate weight of every superpixel, per class.'
    )
    intercepts: dict[int, float] = Field(..., description='Per-class bias.')
    scores: dict[int, float] = Field(
        default_factory=dict,
        description='Weighted R² of the surrogate on its neighbourhood.',
    )
    local_predictions: dict[int, float] = Field(
        default_factory=dict,
        description='Surrogate output at the all-ones vector.',
    )
    segment_map: SegmentMap
    config: SurrogateConfig | None = Field(
        None, description='Echo of the configuration that produced this.'
    )

    @model_validator(mode='after')
    def _check_classes(self) -> Explanation:
        if len(set(self.class_ids)) != len(self.class_ids):
            raise ValueError(f'class_ids must be distinct, got {self.class_ids}')
        if set(self.coefficients) != set(self.class_ids):
            raise ValueError('coefficients must cover exactly the class_ids')
        if set(self.intercepts) != set(self.class_ids):
            raise ValueError('intercepts must cover exactly the class_ids')
        count = self.segment_map.segment_count
        for class_id, coefficients in self.coefficients.items():
            if coefficients.shape != (count,):
                raise ValueError(
                    f'class {class_id} has {coefficients.shape} coefficients,'
                    f' expected ({count},)'
                )
        return self

    def save(self, path: str | pathlib.Path) -> None:
        """Write the explanation as a JSON document."""
        target = pathlib.Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(self.model_dump_json(indent=2), encoding='utf-8')

    @classmethod
    def load(cls, path: str | pathlib.Path) -> Explanation:
        data = json.loads(pathlib.Path(path).read_text(encoding='utf-8'))
        return cls.model_validate(data)


class ImportanceMap(BaseModel):
    """Pixel-space projection of one class of an explanation."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: FloatArray = Field(..., description='H×W importance values.')
    class_id: int

    @field_validator('values')
    @classmethod
    def _check_values(cls, values: np.ndarray) -> np.ndarray:
        if values.ndim != 2:
            raise ValueError(f'importance map must be 2-D, got {values.shape}')
        return values
