from __future__ import annotations

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class TrialVector(BaseModel):
    """Candidate displacement in pixels per frame."""

    vx: float
    vy: float

    model_config = ConfigDict(frozen=True)

    @property
    def magnitude(self) -> float:
        return math.hypot(self.vx, self.vy)

    def as_tuple(self) -> tuple[float, float]:
        return (self.vx, self.vy)

    def distance(self, other: "TrialVector | tuple[float, float]") -> float:
        ox, oy = other.as_tuple() if isinstance(other, TrialVector) else other
        return math.hypot(self.vx - ox, self.vy - oy)


class VectorPool(BaseModel):
    vectors: list[TrialVector]
    lattice_spacing: float = Field(gt=0)

    model_config = ConfigDict(frozen=True)

    def __len__(self) -> int:
        return len(self.vectors)

    def nearest(self, velocity: tuple[float, float]) -> TrialVector:
        return min(self.vectors, key=lambda v: v.distance(velocity))


class StackedImage(BaseModel):
    values: np.ndarray
    n: int = Field(ge=1)
    vector: TrialVector
    t_end: int = Field(ge=0, description="end of the newest frame's window, us")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, value: object) -> np.ndarray:
        arr = np.ascontiguousarray(value).view()
        if arr.ndim != 2:
            raise ValueError("stacked values must be a 2-D grid")
        arr.setflags(write=False)
        return arr

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StackedImage):
            return NotImplemented
        return (
            self.n == other.n
            and self.vector == other.vector
            and self.t_end == other.t_end
            and np.array_equal(self.values, other.values)
        )


__all__ = ["TrialVector", "VectorPool", "StackedImage"]
