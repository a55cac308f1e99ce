from __future__ import annotations

from enum import Enum
from typing import Iterable, Iterator, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class EventFormat(str, Enum):
    csv = "csv"
    binary = "binary"


class PolarityPolicy(str, Enum):
    both = "both"
    positive_only = "positive_only"


class Event(BaseModel):
    t: int = Field(ge=0)
    x: int = Field(ge=0)
    y: int = Field(ge=0)
    polarity: Literal[1, -1]

    model_config = ConfigDict(frozen=True)


class SensorGeometryHeader(BaseModel):
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    duration: int = Field(0, ge=0)

    model_config = ConfigDict(frozen=True)


def _readonly(values: object, dtype: type) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=dtype).view()
    arr.setflags(write=False)
    return arr


class EventStream(BaseModel):
    """Column-oriented, immutable batch of events sorted by timestamp."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("t", mode="before")
    @classmethod
    def _coerce_t(cls, value: object) -> np.ndarray:
        return _readonly(value, np.int64)

    @field_validator("x", "y", mode="before")
    @classmethod
    def _coerce_xy(cls, value: object) -> np.ndarray:
        return _readonly(value, np.int32)

    @field_validator("p", mode="before")
    @classmethod
    def _coerce_p(cls, value: object) -> np.ndarray:
        return _readonly(value, np.int8)

    @model_validator(mode="after")
    def _check_columns(self) -> "EventStream":
        n = self.t.shape
        if any(col.ndim != 1 for col in (self.t, self.x, self.y, self.p)):
            raise ValueError("event columns must be one-dimensional")
        if self.x.shape != n or self.y.shape != n or self.p.shape != n:
            raise ValueError("event columns must have equal length")
        if n[0] and not np.all((self.p == 1) | (self.p == -1)):
            raise ValueError("polarity must be +1 or -1")
        return self

    @classmethod
    def empty(cls) -> "EventStream":
        return cls(t=[], x=[], y=[], p=[])

    @classmethod
    def from_events(cls, events: Iterable[Event]) -> "EventStream":
        rows = [(e.t, e.x, e.y, e.polarity) for e in events]
        if not rows:
            return cls.empty()
        t, x, y, p = zip(*rows)
        return cls(t=t, x=x, y=y, p=p)

    @classmethod
    def concat(cls, streams: Iterable["EventStream"]) -> "EventStream":
        streams = list(streams)
        if not streams:
            return cls.empty()
        return cls(
            t=np.concatenate([s.t for s in streams]),
            x=np.concatenate([s.x for s in streams]),
            y=np.concatenate([s.y for s in streams]),
            p=np.concatenate([s.p for s in streams]),
        )

    def __len__(self) -> int:
        return int(self.t.shape[0])

    def __iter__(self) -> Iterator[Event]:  # type: ignore[override]
        for t, x, y, p in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.p.tolist()):
            yield Event(t=t, x=x, y=y, polarity=p)

    def __getitem__(self, index: slice | np.ndarray) -> "EventStream":
        return EventStream(t=self.t[index], x=self.x[index], y=self.y[index], p=self.p[index])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return all(
            np.array_equal(a, b)
            for a, b in ((self.t, other.t), (self.x, other.x), (self.y, other.y), (self.p, other.p))
        )

    def is_sorted(self) -> bool:
        return bool(np.all(self.t[1:] >= self.t[:-1])) if len(self) > 1 else True


class SimilFrame(BaseModel):
    """Event counts per pixel over the window [t_start, t_start + dt).

    ``counts`` is indexed ``counts[y, x]``; ``padded`` is set when a
    downsampling step had to zero-pad the right/bottom border.
    """

    counts: np.ndarray
    t_start: int = Field(ge=0)
    dt: int = Field(gt=0)
    padded: bool = False

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("counts", mode="before")
    @classmethod
    def _coerce_counts(cls, value: object) -> np.ndarray:
        arr = _readonly(value, np.int64)
        if arr.ndim != 2:
            raise ValueError("counts must be a 2-D grid")
        if arr.size and arr.min() < 0:
            raise ValueError("counts must be non-negative")
        return arr

    @property
    def width(self) -> int:
        return int(self.counts.shape[1])

    @property
    def height(self) -> int:
        return int(self.counts.shape[0])

    @property
    def t_end(self) -> int:
        return self.t_start + self.dt

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SimilFrame):
            return NotImplemented
        return (
            self.t_start == other.t_start
            and self.dt == other.dt
            and self.padded == other.padded
            and np.array_equal(self.counts, other.counts)
        )


__all__ = [
    "EventFormat",
    "PolarityPolicy",
    "Event",
    "SensorGeometryHeader",
    "EventStream",
    "SimilFrame",
]
