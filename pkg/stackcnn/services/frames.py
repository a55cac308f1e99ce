from __future__ import annotations

import logging
import math
from typing import Iterable

import numpy as np

from stackcnn.schemas.events import EventStream, PolarityPolicy, SensorGeometryHeader, SimilFrame
from stackcnn.services.event_io import check_coordinates
from stackcnn.utils.errors import ConfigError, EventFormatError

logger = logging.getLogger(__name__)


def _accept(events: EventStream, policy: PolarityPolicy) -> EventStream:
    if PolarityPolicy(policy) is PolarityPolicy.positive_only:
        return events[events.p == 1]
    return events


def _check_dt(dt: int) -> None:
    if dt <= 0:
        raise ConfigError(f"exposure dt must be positive, got {dt}")


def frame_count(duration: int, dt: int) -> int:
    return math.ceil(duration / dt) if duration > 0 else 0


def build_simil_frames(
    events: EventStream,
    header: SensorGeometryHeader,
    dt: int,
    policy: PolarityPolicy | str = PolarityPolicy.both,
) -> list[SimilFrame]:
    """Accumulate events into frames covering [k*dt, (k+1)*dt) for k = 0..K-1.

    K spans ``header.duration`` (or the last event when the header declares
    less). Every accepted event adds one count regardless of its polarity.
    """
    _check_dt(dt)
    if not events.is_sorted():
        raise EventFormatError("events must be sorted by timestamp")
    width, height = header.width, header.height
    check_coordinates(events.x, events.y, width, height)
    accepted = _accept(events, PolarityPolicy(policy))
    last = int(events.t[-1]) + 1 if len(events) else 0
    n_frames = frame_count(max(header.duration, last), dt)

    cells = width * height
    k = accepted.t // dt
    flat = k * cells + accepted.y.astype(np.int64) * width + accepted.x.astype(np.int64)
    counts = np.bincount(flat, minlength=n_frames * cells).reshape(n_frames, height, width)
    frames = [SimilFrame(counts=counts[i], t_start=i * dt, dt=dt) for i in range(n_frames)]
    logger.debug("built %d simil-frames from %d accepted events", n_frames, len(accepted))
    return frames


class SimilFrameBuilder:
    """Online accumulator producing the same frames as ``build_simil_frames``.

    A frame is emitted as soon as an event at or past its window end arrives,
    or when ``close_until``/``finish`` advance the clock.
    """

    def __init__(
        self,
        width: int,
        height: int,
        dt: int,
        policy: PolarityPolicy | str = PolarityPolicy.both,
    ) -> None:
        _check_dt(dt)
        self.width = width
        self.height = height
        self.dt = dt
        self.policy = PolarityPolicy(policy)
        self.index = 0
        self._counts = np.zeros((height, width), dtype=np.int64)
        self._last_t = -1

    def _emit(self) -> SimilFrame:
        frame = SimilFrame(counts=self._counts, t_start=self.index * self.dt, dt=self.dt)
        self._counts = np.zeros((self.height, self.width), dtype=np.int64)
        self.index += 1
        return frame

    def close_until(self, t: int) -> list[SimilFrame]:
        """Emit every frame whose window ends at or before ``t``."""
        out = []
        while (self.index + 1) * self.dt <= t:
            out.append(self._emit())
        return out

    def push(self, events: EventStream) -> Iterable[SimilFrame]:
        """Consume a sorted chunk; yields completed frames in order."""
        if not len(events):
            return
        if int(events.t[0]) < self._last_t or not events.is_sorted():
            raise EventFormatError("events must arrive in timestamp order")
        check_coordinates(events.x, events.y, self.width, self.height)
        self._last_t = int(events.t[-1])
        accepted = _accept(events, self.policy)
        k = accepted.t // self.dt
        boundaries = np.flatnonzero(np.diff(k)) + 1
        starts = np.concatenate(([0], boundaries))
        stops = np.concatenate((boundaries, [len(k)]))
        for start, stop in zip(starts.tolist(), stops.tolist()):
            if start == stop:
                continue
            window = int(k[start])
            yield from self.close_until(window * self.dt)
            np.add.at(self._counts, (accepted.y[start:stop], accepted.x[start:stop]), 1)
        yield from self.close_until(int(events.t[-1]))

    def finish(self, duration: int) -> list[SimilFrame]:
        """Close the open frame plus trailing empty frames up to ``duration``."""
        end = max(duration, self._last_t + 1)
        return self.close_until(frame_count(end, self.dt) * self.dt)


def downsample(frame: SimilFrame, factor: int) -> SimilFrame:
    """Sum non-overlapping ``factor`` x ``factor`` blocks.

    Dimensions that are not a multiple of ``factor`` are zero-padded on the
    right/bottom and the result is flagged ``padded``.
    """
    if factor <= 0:
        raise ConfigError(f"downsample factor must be a positive integer, got {factor}")
    if factor == 1:
        return frame
    h, w = frame.counts.shape
    ph, pw = -h % factor, -w % factor
    grid = frame.counts
    if ph or pw:
        grid = np.pad(grid, ((0, ph), (0, pw)))
    H, W = grid.shape
    blocks = grid.reshape(H // factor, factor, W // factor, factor).sum(axis=(1, 3))
    return SimilFrame(counts=blocks, t_start=frame.t_start, dt=frame.dt, padded=frame.padded or bool(ph or pw))


__all__ = ["build_simil_frames", "downsample", "SimilFrameBuilder", "frame_count"]
