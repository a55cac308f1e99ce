"""Online detection: simil-frames -> ring buffer -> stack over the pool -> classify -> merge.

Downstream consumers (tracking, collision assessment) attach through the
``on_detection`` callback; nothing past the trigger is modelled here.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from statistics import NormalDist
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from stackcnn.models.cnn import CnnModel
from stackcnn.schemas.classifier import Architecture, ClassifierKind, Score
from stackcnn.schemas.events import EventStream, SensorGeometryHeader, SimilFrame
from stackcnn.schemas.pipeline import Detection, PipelineConfig, RunSummary, WindowLatencyReport
from stackcnn.schemas.stacking import StackedImage
from stackcnn.services.classifier import CnnClassifier, MatchedFilterClassifier, covered_peak
from stackcnn.services.frames import SimilFrameBuilder, downsample
from stackcnn.services.stacking import make_hex_pool, stack_all
from stackcnn.utils.config import settings
from stackcnn.utils.errors import ConfigError, DimensionMismatchError

logger = logging.getLogger(__name__)

DetectionCallback = Callable[[Detection], None]


def family_threshold(n_cells: int, n_vectors: int, false_alarm: float) -> float:
    """Per-cell sigma threshold keeping the chance of any Gaussian exceedance
    among ``n_cells * n_vectors`` tests at ``false_alarm`` (Sidak)."""
    if not 0 < false_alarm < 1:
        raise ConfigError(f"false_alarm must be in (0, 1), got {false_alarm}")
    trials = max(1, n_cells * n_vectors)
    per_test = -math.expm1(math.log1p(-false_alarm) / trials)
    return NormalDist().inv_cdf(1.0 - per_test)


def downsampled_shape(height: int, width: int, factor: int) -> tuple[int, int]:
    return -(-height // factor), -(-width // factor)


class FrameRing:
    """Fixed-capacity buffer of the most recent frames, preallocated at construction.

    ``frames()`` returns views into the buffer; they stay valid until the next push.
    """

    def __init__(self, capacity: int, shape: tuple[int, int]) -> None:
        if capacity < 1:
            raise ConfigError(f"ring capacity must be positive, got {capacity}")
        self._grids = np.zeros((capacity, *shape), dtype=np.int64)
        self._t_start = np.zeros(capacity, dtype=np.int64)
        self._dt = np.zeros(capacity, dtype=np.int64)
        self._padded = np.zeros(capacity, dtype=bool)
        self._cursor = 0
        self.pushed = 0

    @property
    def capacity(self) -> int:
        return self._grids.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._grids.shape[1:]  # type: ignore[return-value]

    @property
    def full(self) -> bool:
        return self.pushed >= self.capacity

    def __len__(self) -> int:
        return min(self.pushed, self.capacity)

    def push(self, frame: SimilFrame) -> None:
        if frame.counts.shape != self.shape:
            raise DimensionMismatchError(f"frame shape {frame.counts.shape} does not match ring {self.shape}")
        slot = self._cursor
        self._grids[slot] = frame.counts
        self._t_start[slot] = frame.t_start
        self._dt[slot] = frame.dt
        self._padded[slot] = frame.padded
        self._cursor = (slot + 1) % self.capacity
        self.pushed += 1

    def frames(self) -> list[SimilFrame]:
        """Stored frames, oldest first."""
        start = self._cursor if self.full else 0
        slots = [(start + i) % self.capacity for i in range(len(self))]
        return [
            SimilFrame(
                counts=self._grids[s],
                t_start=int(self._t_start[s]),
                dt=int(self._dt[s]),
                padded=bool(self._padded[s]),
            )
            for s in slots
        ]


def _rank(item: tuple[Score, StackedImage]) -> tuple[float, float, float, float]:
    score, image = item
    return (-score.value, image.vector.magnitude, image.vector.vx, image.vector.vy)


def merge_triggers(
    raw: Sequence[tuple[Score, StackedImage]],
    window_index: int = 0,
    merge_radius: int | None = None,
    cross_check: Callable[[StackedImage], float] | None = None,
) -> list[Detection]:
    """Collapse the positive (score, stack) pairs of one window into detections.

    Candidates are visited by descending score, then smaller |v|, then (vx, vy);
    a candidate whose peak lies within ``merge_radius`` of an accepted one is
    absorbed by it.
    """
    radius = settings.MERGE_RADIUS if merge_radius is None else merge_radius
    accepted: list[Detection] = []
    for score, image in sorted(raw, key=_rank):
        peak = score.peak if score.peak is not None else covered_peak(image)
        if any(math.hypot(peak[0] - d.peak[0], peak[1] - d.peak[1]) <= radius for d in accepted):
            continue
        accepted.append(
            Detection(
                window_index=window_index,
                t_end=image.t_end,
                vector=image.vector,
                score=score.value,
                peak=peak,
                classifier_kind=score.kind,
                cross_check_score=cross_check(image) if cross_check is not None else None,
            )
        )
    return accepted


class DetectionPipeline:
    """Single-writer streaming detector.

    Frames enter through ``push_frame`` (or events through ``feed``); once the
    ring holds ``n`` frames, every ``stride``-th new frame triggers one
    evaluation window. Detections come back in window order and are also
    handed to ``on_detection``.
    """

    def __init__(
        self,
        config: PipelineConfig,
        width: int,
        height: int,
        model: CnnModel | None = None,
        on_detection: DetectionCallback | None = None,
        timer: Callable[[], float] = time.perf_counter,
    ) -> None:
        self.config = config
        self.width = width
        self.height = height
        self.shape = downsampled_shape(height, width, config.downsample)
        self.pool = make_hex_pool(config.max_displacement, config.rings)
        self.ring = FrameRing(config.n, self.shape)
        self.on_detection = on_detection
        self.timer = timer
        self.latencies: list[float] = []
        self.windows_evaluated = 0
        self.detections = 0
        self.last_images: list[StackedImage] = []
        self.last_cross_check: list[float] = []

        cells = self.shape[0] * self.shape[1]
        self.mf_threshold = max(
            settings.MF_THRESHOLD, family_threshold(cells, len(self.pool), config.false_alarm)
        )
        self._cross_check = MatchedFilterClassifier(self.mf_threshold, config.exclusion_radius)
        if config.classifier is ClassifierKind.cnn:
            if model is None:
                raise ConfigError("the cnn classifier needs a trained model")
            expected = tuple(model.architecture.input_shape)
            if expected != self.shape:
                raise DimensionMismatchError(
                    f"model expects {expected[1]}x{expected[0]} grids but frames are "
                    f"{self.shape[1]}x{self.shape[0]} after downsampling by {config.downsample}"
                )
            self.classifier = CnnClassifier(model, config.threshold)
        else:
            threshold = self.mf_threshold if config.threshold is None else config.threshold
            self.classifier = MatchedFilterClassifier(threshold, config.exclusion_radius)

        self._builder = SimilFrameBuilder(width, height, config.dt, config.polarity)
        self._executor = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None
        logger.debug(
            "pipeline %dx%d -> %s, %d vectors, %s threshold %.3f",
            width, height, self.shape, len(self.pool), self.classifier.kind.value, self.classifier.threshold,
        )

    def __enter__(self) -> "DetectionPipeline":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    @property
    def frames_seen(self) -> int:
        return self.ring.pushed

    def evaluate(self) -> list[Detection]:
        """Stack the current ring over the pool and classify every stack.

        The matched filter scores every stack of the window in either mode; on
        the cnn path it is the cross-check channel. Stacks and their
        matched-filter values stay in ``last_images``/``last_cross_check``
        (pool order) until the next evaluation, so an ``on_detection`` callback
        can inspect the winning stack.
        """
        started = self.timer()
        frames = self.ring.frames()
        images = stack_all(frames, self.pool, self._executor)
        scores = self.classifier.score_all(images)
        if self.classifier.kind is ClassifierKind.matched_filter:
            cross = [s.value for s in scores]
        else:
            cross = [s.value for s in self._cross_check.score_all(images)]
        self.last_images = images
        self.last_cross_check = cross
        by_image = {id(img): value for img, value in zip(images, cross)}
        raw = [(s, img) for s, img in zip(scores, images) if s.decision]
        found = merge_triggers(raw, self.ring.pushed - 1, self.config.merge_radius, lambda img: by_image[id(img)])
        self.latencies.append(self.timer() - started)
        self.windows_evaluated += 1
        return found

    def push_frame(self, frame: SimilFrame) -> list[Detection]:
        if frame.counts.shape != (self.height, self.width):
            raise DimensionMismatchError(
                f"frame is {frame.width}x{frame.height}, pipeline expects {self.width}x{self.height}"
            )
        self.ring.push(downsample(frame, self.config.downsample))
        if not self.ring.full or (self.ring.pushed - self.config.n) % self.config.stride:
            return []
        found = self.evaluate()
        self.detections += len(found)
        for detection in found:
            logger.info(
                "detection window=%d v=(%.3f, %.3f) score=%.3f peak=%s",
                detection.window_index, detection.vector.vx, detection.vector.vy, detection.score, detection.peak,
            )
            if self.on_detection is not None:
                self.on_detection(detection)
        return found

    def feed(self, events: EventStream) -> Iterator[Detection]:
        """Consume one sorted chunk; detections for windows it completes are yielded immediately."""
        for frame in self._builder.push(events):
            yield from self.push_frame(frame)

    def finish(self, duration: int = 0) -> list[Detection]:
        out: list[Detection] = []
        for frame in self._builder.finish(duration):
            out.extend(self.push_frame(frame))
        return out

    def latency_report(self) -> WindowLatencyReport | None:
        if not self.latencies:
            return None
        return latency_report(self.latencies, self.shape, self.config.n, len(self.pool), self.config.dt)

    def summary(self) -> RunSummary:
        return RunSummary(
            config=self.config.model_dump(mode="json"),
            frames=self.frames_seen,
            windows_evaluated=self.windows_evaluated,
            detections=self.detections,
            threshold=self.classifier.threshold,
            matched_filter_threshold=self.mf_threshold,
            latency=self.latency_report(),
        )


def run_detection(
    events: EventStream | Iterable[EventStream],
    header: SensorGeometryHeader,
    config: PipelineConfig,
    model: CnnModel | None = None,
    on_detection: DetectionCallback | None = None,
) -> list[Detection]:
    """Run the pipeline over a whole stream or an iterable of sorted chunks."""
    chunks = [events] if isinstance(events, EventStream) else events
    found: list[Detection] = []
    with DetectionPipeline(config, header.width, header.height, model, on_detection) as pipeline:
        for chunk in chunks:
            found.extend(pipeline.feed(chunk))
        found.extend(pipeline.finish(header.duration))
    return found


def latency_report(
    seconds: Sequence[float], shape: tuple[int, int], n: int, vectors: int, dt_us: int
) -> WindowLatencyReport:
    ms = np.asarray(seconds, dtype=np.float64) * 1e3
    p50, p90, p99 = np.percentile(ms, [50, 90, 99]).tolist()
    dt_ms = dt_us / 1e3
    return WindowLatencyReport(
        windows=int(ms.size),
        frame_shape=shape,
        n=n,
        vectors=vectors,
        dt_ms=dt_ms,
        mean_ms=float(ms.mean()),
        p50_ms=p50,
        p90_ms=p90,
        p99_ms=p99,
        max_ms=float(ms.max()),
        realtime_ok=p99 < dt_ms,
    )


def benchmark_window(
    config: PipelineConfig,
    model: CnnModel | None = None,
    timer: Callable[[], float] = time.perf_counter,
    windows: int = 100,
    shape: tuple[int, int] = (60, 80),
    background: float = 4.0,
    seed: int = 0,
) -> WindowLatencyReport:
    """Time ``windows`` evaluation windows on Poisson noise frames of ``shape`` (after downsampling).

    Without a model the cnn path runs an untrained network of the default
    architecture, which costs the same as a trained one.
    """
    if windows < 1:
        raise ConfigError("benchmark needs at least one window")
    height, width = shape[0] * config.downsample, shape[1] * config.downsample
    if config.classifier is ClassifierKind.cnn and model is None:
        model = CnnModel.initialize(Architecture(input_shape=shape), seed)
    config = config.model_copy(update={"stride": 1})
    rng = np.random.default_rng(seed)
    per_pixel = background / config.downsample**2
    with DetectionPipeline(config, width, height, model, timer=timer) as pipeline:
        for k in range(config.n - 1 + windows):
            counts = rng.poisson(per_pixel, size=(height, width))
            pipeline.push_frame(SimilFrame(counts=counts, t_start=k * config.dt, dt=config.dt))
        report = pipeline.latency_report()
    assert report is not None
    logger.info("benchmark p50 %.2f ms, p99 %.2f ms (dt %.0f ms)", report.p50_ms, report.p99_ms, report.dt_ms)
    return report


__all__ = [
    "FrameRing",
    "DetectionPipeline",
    "run_detection",
    "merge_triggers",
    "benchmark_window",
    "latency_report",
    "family_threshold",
    "downsampled_shape",
]
