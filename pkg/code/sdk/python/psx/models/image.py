"""Raster and filter-kernel value types."""

from __future__ import annotations

import numpy as np

from psx.models.arrays import FloatArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


_SUPPORTED_CHANNELS = (1, 3)
_NORMALIZATION_TOLERANCE = 1e-9


class PlanarImage(BaseModel):
    """A float raster with nominal range [0, 1], stored channel-first."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    data: FloatArray = Field(
        ...,
        description='Pixel values indexed (channel, row, col).',
    )

    @field_validator('data')
    @classmethod
    def _check_data(cls, data: np.ndarray) -> np.ndarray:
        if data.ndim != 3:
            raise ValueError(
                f'image data must be (channels, height, width), got {data.shape}'
            )
        channels, height, width = data.shape
        if channels not in _SUPPORTED_CHANNELS:
            raise ValueError(f'channel count must be 1 or 3, got {channels}')
        if height < 1 or width < 1:
            raise ValueError(f'image must be at least 1x1, got {height}x{width}')
        if not np.all(np.isfinite(data)):
            raise ValueError('image data contains NaN or Inf values')
        return data

    @classmethod
    def from_array(cls, array: np.ndarray) -> PlanarImage:
        """Build an image from H×W or H×W×C (channel-last) data."""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 2:
            return cls(data=array[np.newaxis])
        return cls(data=np.moveaxis(array, -1, 0))

    @classmethod
    def filled(
        cls, height: int, width: int, value: float, channels: int = 1
    ) -> PlanarImage:
        """A constant image."""
        return cls(data=np.full((channels, height, width), float(value)))

    @property
    def channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])

    @property
    def dims(self) -> tuple[int, int]:
        return self.height, self.width

    def to_array(self) -> np.ndarray:
        """Channel-last H×W×C copy of the pixel data."""
        return np.moveaxis(self.data, 0, -1).copy()

    def plane(self, channel: int = 0) -> np.ndarray:
        """One channel as an H×W array (read-only view)."""
        return self.data[channel]


class Kernel2D(BaseModel):
    """A 2-D filter with odd side lengths.

    ``separable`` optionally carries the 1-D factor ``v`` with
    ``taps == outer(v, v)``; convolution then runs as two 1-D passes.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    taps: FloatArray = Field(..., description='Filter taps, odd side lengths.')
    normalized: bool = Field(
        False, description='If true, the taps sum to 1.'
    )
    separable: FloatArray | None = Field(
        None, description='1-D factor of a separable symmetric kernel.'
    )

    @field_validator('taps')
    @classmethod
    def _check_taps(cls, taps: np.ndarray) -> np.ndarray:
        if taps.ndim != 2:
            raise ValueError(f'kernel taps must be 2-D, got shape {taps.shape}')
        if taps.shape[0] % 2 == 0 or taps.shape[1] % 2 == 0:
            raise ValueError(f'kernel sides must be odd, got {taps.shape}')
        return taps

    @model_validator(mode='after')
    def _check_consistency(self) -> Kernel2D:
        if self.normalized:
            total = float(self.taps.sum())
            if abs(total - 1.0) >= _NORMALIZATION_TOLERANCE:
                raise ValueError(
                    f'normalized kernel taps sum to {total!r}, expected 1'
                )
        if self.separable is not None:
            if not np.allclose(
                np.outer(self.separable, self.separable), self.taps
            ):
                raise ValueError('separable factor does not match the taps')
        return self

    @classmethod
    def from_separable(
        cls, factor: np.ndarray, normalized: bool = True
    ) -> Kernel2D:
        """Build the outer-product kernel of a 1-D factor."""
        factor = np.asarray(factor, dtype=np.float64)
        return cls(
            taps=np.outer(factor, factor),
            normalized=normalized,
            separable=factor,
        )

    @property
    def side(self) -> tuple[int, int]:
        return int(self.taps.shape[0]), int(self.taps.shape[1])

    def scaled(self, gain: float) -> Kernel2D:
        """The same kernel with every tap multiplied by ``gain``."""
        factor = None
        if self.separable is not None:
            factor = self.separable * np.sqrt(gain)
        return Kernel2D(
            taps=self.taps * gain,
            normalized=gain == 1.0 and self.normalized,
            separable=factor,
        )
