from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SourceSpec(BaseModel):
    start_position: tuple[float, float]
    velocity: tuple[float, float] = Field(description="pixels per second")
    event_rate: float = Field(gt=0, description="events per second")
    t_enter: int = Field(0, ge=0)
    t_exit: int
    psf_sigma: float = Field(0.0, ge=0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_window(self) -> "SourceSpec":
        if self.t_enter >= self.t_exit:
            raise ValueError("t_enter must be before t_exit")
        return self

    def position_at(self, t: float) -> tuple[float, float]:
        tau = (t - self.t_enter) / 1e6
        return (
            self.start_position[0] + self.velocity[0] * tau,
            self.start_position[1] + self.velocity[1] * tau,
        )


class SceneConfig(BaseModel):
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    duration: int = Field(gt=0, description="microseconds")
    background_rate: float = Field(0.0, ge=0, description="events per pixel per second")
    rng_seed: int = Field(0, ge=0, lt=2**64)
    dt: int = Field(80_000, gt=0, description="window used for ground-truth positions")
    sources: list[SourceSpec] = Field(default_factory=list)


class TruthPoint(BaseModel):
    window: int
    t_mid: float
    x: float
    y: float


class SourceTruth(BaseModel):
    source: int
    velocity_px_per_frame: tuple[float, float]
    positions: list[TruthPoint]


class GroundTruth(BaseModel):
    width: int
    height: int
    dt: int
    sources: list[SourceTruth] = Field(default_factory=list)


__all__ = ["SourceSpec", "SceneConfig", "TruthPoint", "SourceTruth", "GroundTruth"]
