from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class GeometryParams(BaseModel):
    """Square sensor looking along its boresight at debris crossing perpendicular to it."""

    fov_angle: float = Field(40.0, gt=0, lt=180, description="full field-of-view angle, degrees")
    matrix_size: int = Field(48, ge=1, description="pixels per side")
    debris_speed: float = Field(7500.0, gt=0, description="transverse speed, m/s")
    dt: float = Field(0.08, gt=0, description="frame exposure, seconds")

    model_config = ConfigDict(frozen=True)


class DisplacementRow(BaseModel):
    distance_m: float
    footprint_m: float
    small_angle_footprint_m: float
    px_per_frame: float


class TradeoffRow(BaseModel):
    dt_s: float
    min_distance_m: float
    stack_latency_s: float
    frames_per_second: float
    px_per_frame_at_reference: float


__all__ = ["GeometryParams", "DisplacementRow", "TradeoffRow"]
