"""Superpixel label maps."""

from __future__ import annotations

import numpy as np

from psx.models.arrays import IntArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import ndimage


# 4-connectivity structuring element.
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


class SegmentMap(BaseModel):
    """A partition of an image into 4-connected superpixels ``0..S-1``."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    labels: IntArray = Field(..., description='Per-pixel superpixel id.')
    segment_count: int = Field(..., description='Number of superpixels S.')
    source_dims: tuple[int, int] = Field(
        ..., description='(height, width) of the segmented image.'
    )

    @model_validator(mode='after')
    def _check_partition(self) -> SegmentMap:
        labels = self.labels
        if labels.ndim != 2:
            raise ValueError(f'labels must be 2-D, got shape {labels.shape}')
        if tuple(labels.shape) != tuple(self.source_dims):
            raise ValueError(
                f'labels shape {labels.shape} does not match source dims '
                f'{self.source_dims}'
            )
        if self.segment_count < 1:
            raise ValueError('a segment map needs at least one segment')
        if labels.min() < 0 or labels.max() >= self.segment_count:
            raise ValueError(
                f'labels must lie in 0..{self.segment_count - 1}, got '
                f'{labels.min()}..{labels.max()}'
            )
        sizes = np.bincount(labels.ravel(), minlength=self.segment_count)
        if np.any(sizes == 0):
            missing = np.flatnonzero(sizes == 0).tolist()
            raise ValueError(f'segment ids {missing} do not appear')
        for segment in range(self.segment_count):
            _, components = ndimage.label(
                labels == segment, structure=FOUR_CONNECTED
            )
            if components != 1:
                raise ValueError(
                    f'segment {segment} has {components} connected components'
                )
        return self

    @classmethod
    def from_labels(cls, labels: np.ndarray) -> SegmentMap:
        """Wrap a contiguous label array, deriving the count and dims."""
        labels = np.asarray(labels)
        return cls(
            labels=labels,
            segment_count=int(labels.max()) + 1,
            source_dims=(int(labels.shape[0]), int(labels.shape[1])),
        )

    def sizes(self) -> np.ndarray:
        """Pixel count of every segment."""
        return np.bincount(self.labels.ravel(), minlength=self.segment_count)
