"""Rows produced by the robustness benchmark."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator


class PairResult(BaseModel):
    """Outcome of one (image, distortion, distance kind) comparison."""

    model_config = ConfigDict(frozen=True)

    image_id: str
    family: str
    severity: int
    distance_kind: str
    d_exp: float | None = Field(
        None, description='Explanation distance; present iff agreed.'
    )
    agreed: bool = Field(
        ..., description='Whether both images share the top-K classes.'
    )
    top_classes: tuple[int, ...] = Field(
        (), description='Top-K classes of the reference prediction.'
    )
    timing: float = Field(0.0, description='Wall-clock seconds spent.')
    error: str | None = Field(
        None, description='Model or transport failure, if any.'
    )

    @model_validator(mode='after')
    def _check_d_exp(self) -> PairResult:
        if self.error is None and (self.d_exp is not None) != self.agreed:
            raise ValueError('d_exp must be present exactly when agreed')
        if not self.agreed and self.d_exp is not None:
            raise ValueError('d_exp must not be computed for a disagreeing pair')
        return self


class SummaryRow(BaseModel):
    """Aggregate d_exp statistics for one family (``*`` = all families)."""

    model_config = ConfigDict(frozen=True)

    family: str
    distance_kind: str
    mean: float | None
    std: float | None
    agreed_count: int
    disagreed_count: int
    error_count: int = 0


class YieldRow(BaseModel):
    """Pairs sharing the top-K classes, per family and severity."""

    model_config = ConfigDict(frozen=True)

    family: str
    severity: int
    agreed_pairs: int
    total_pairs: int
