from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from stackcnn.schemas.classifier import ClassifierKind
from stackcnn.schemas.events import PolarityPolicy
from stackcnn.schemas.stacking import TrialVector
from stackcnn.utils.config import settings


class PipelineConfig(BaseModel):
    """Everything a detection run depends on; echoed into every run summary."""

    dt: int = Field(default_factory=lambda: settings.DT_US, gt=0, description="microseconds")
    n: int = Field(default_factory=lambda: settings.N_FRAMES, ge=2)
    stride: int = Field(default_factory=lambda: settings.STRIDE, ge=1)
    max_displacement: float = Field(default_factory=lambda: settings.MAX_DISPLACEMENT, gt=0)
    rings: int = Field(3, ge=1)
    downsample: int = Field(default_factory=lambda: settings.DOWNSAMPLE, ge=1)
    classifier: ClassifierKind = ClassifierKind.cnn
    threshold: float | None = Field(None, description="None selects the classifier's default")
    false_alarm: float = Field(1e-3, gt=0, lt=1, description="per-window target for the matched-filter threshold")
    exclusion_radius: int = Field(default_factory=lambda: settings.EXCLUSION_RADIUS, ge=0)
    merge_radius: int = Field(default_factory=lambda: settings.MERGE_RADIUS, ge=0)
    polarity: PolarityPolicy = PolarityPolicy.both
    threads: int = Field(default_factory=lambda: settings.THREADS, ge=1)

    model_config = ConfigDict(frozen=True)


class Detection(BaseModel):
    window_index: int = Field(ge=0)
    t_end: int = Field(ge=0)
    vector: TrialVector
    score: float
    peak: tuple[int, int]
    classifier_kind: ClassifierKind
    cross_check_score: float | None = None

    model_config = ConfigDict(frozen=True)

    def record(self) -> dict:
        """Flat report row."""
        return {
            "window_index": self.window_index,
            "t_end_us": self.t_end,
            "vx": self.vector.vx,
            "vy": self.vector.vy,
            "score": self.score,
            "peak_x": self.peak[0],
            "peak_y": self.peak[1],
            "classifier_kind": self.classifier_kind.value,
            "cross_check_score": self.cross_check_score,
        }


class WindowLatencyReport(BaseModel):
    windows: int
    frame_shape: tuple[int, int]
    n: int
    vectors: int
    dt_ms: float
    mean_ms: float
    p50_ms: float
    p90_ms: float
    p99_ms: float
    max_ms: float
    realtime_ok: bool


class RunSummary(BaseModel):
    config: dict
    frames: int = 0
    windows_evaluated: int = 0
    detections: int = 0
    threshold: float
    matched_filter_threshold: float
    latency: WindowLatencyReport | None = None


__all__ = ["PipelineConfig", "Detection", "WindowLatencyReport", "RunSummary"]
