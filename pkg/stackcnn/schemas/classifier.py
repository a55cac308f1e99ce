from __future__ import annotations

from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ClassifierKind(str, Enum):
    cnn = "cnn"
    matched_filter = "matched_filter"


class ClassifierInput(BaseModel):
    normalized_grid: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("normalized_grid", mode="before")
    @classmethod
    def _coerce_grid(cls, value: object) -> np.ndarray:
        arr = np.ascontiguousarray(value, dtype=np.float64).view()
        if arr.ndim != 2:
            raise ValueError("classifier input must be a 2-D grid")
        arr.setflags(write=False)
        return arr

    @property
    def shape(self) -> tuple[int, int]:
        return self.normalized_grid.shape  # type: ignore[return-value]


class Score(BaseModel):
    value: float
    threshold: float
    kind: ClassifierKind
    peak: tuple[int, int] | None = None

    model_config = ConfigDict(frozen=True)

    @property
    def decision(self) -> bool:
        return self.value >= self.threshold


class Architecture(BaseModel):
    """Layer stack: [conv k x k -> ReLU -> pool]* -> fully connected -> logistic.

    An empty ``conv_filters`` gives plain logistic regression on the input grid.
    """

    input_shape: tuple[int, int]
    conv_filters: tuple[int, ...] = (8, 16)
    kernel_size: int = Field(3, ge=1)
    pool: int = Field(2, ge=1)

    model_config = ConfigDict(frozen=True)


class CnnHyperParams(BaseModel):
    epochs: int = Field(20, ge=0)
    learning_rate: float = Field(0.05, gt=0)
    batch_size: int = Field(32, ge=1)
    seed: int = Field(0, ge=0)


class TrainingMetadata(BaseModel):
    seed: int = 0
    epochs: int = 0
    learning_rate: float = 0.0
    batch_size: int = 0
    initial_loss: float | None = None
    loss_curve: list[float] = Field(default_factory=list)
    validation_accuracy: float | None = None
    dataset: dict = Field(default_factory=dict)


class TrainingSet(BaseModel):
    """Normalized grids stacked along axis 0 with 0/1 labels."""

    inputs: np.ndarray
    labels: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @field_validator("inputs", mode="before")
    @classmethod
    def _coerce_inputs(cls, value: object) -> np.ndarray:
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError("inputs must have shape (samples, height, width)")
        return arr

    @field_validator("labels", mode="before")
    @classmethod
    def _coerce_labels(cls, value: object) -> np.ndarray:
        arr = np.asarray(value, dtype=np.float64).reshape(-1)
        if arr.size and not np.all((arr == 0) | (arr == 1)):
            raise ValueError("labels must be 0 or 1")
        return arr

    @model_validator(mode="after")
    def _check_lengths(self) -> "TrainingSet":
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError(f"{self.inputs.shape[0]} inputs but {self.labels.shape[0]} labels")
        return self

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def split(self, fraction: float) -> tuple["TrainingSet", "TrainingSet"]:
        cut = int(round(len(self) * (1.0 - fraction)))
        return (
            TrainingSet(inputs=self.inputs[:cut], labels=self.labels[:cut]),
            TrainingSet(inputs=self.inputs[cut:], labels=self.labels[cut:]),
        )


__all__ = [
    "ClassifierKind",
    "ClassifierInput",
    "Score",
    "Architecture",
    "CnnHyperParams",
    "TrainingMetadata",
    "TrainingSet",
]
