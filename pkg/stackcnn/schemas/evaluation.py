from __future__ import annotations

import math

from pydantic import BaseModel, Field, computed_field


class SqrtNResult(BaseModel):
    n: int
    seeds: int
    mean_single_snr: float
    mean_stacked_snr: float

    @computed_field  # type: ignore[prop-decorator]
    @property
    def ratio(self) -> float:
        return self.mean_stacked_snr / self.mean_single_snr

    @computed_field  # type: ignore[prop-decorator]
    @property
    def expected(self) -> float:
        return math.sqrt(self.n)


class InjectionResult(BaseModel):
    scenes: int
    detected: int
    velocity_recovered: int
    detection_rate: float
    velocity_recovery_rate: float
    snr_range: tuple[float, float]


class FalseAlarmResult(BaseModel):
    windows: int
    windows_with_detection: int
    rate: float
    threshold: float


class FaintnessPoint(BaseModel):
    per_frame_snr: float
    single_frame_rate: float
    stacked_rate: float


class DisplacementPoint(BaseModel):
    speed_px_per_frame: float
    detection_rate: float
    velocity_recovery_rate: float


class ResolutionPoint(BaseModel):
    downsample: int
    grid_shape: tuple[int, int]
    stacked_snr: float
    detection_rate: float
    velocity_recovery_rate: float


class SweepReport(BaseModel):
    kind: str
    config: dict
    points: list[dict] = Field(default_factory=list)


__all__ = [
    "SqrtNResult",
    "InjectionResult",
    "FalseAlarmResult",
    "FaintnessPoint",
    "DisplacementPoint",
    "ResolutionPoint",
    "SweepReport",
]
