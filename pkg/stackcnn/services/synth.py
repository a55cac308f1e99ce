"""Synthetic event scenes: Poisson background plus moving point sources.

Everything is drawn from one ``numpy.random.Generator`` seeded with
``SceneConfig.rng_seed`` so a config reproduces its stream bit for bit.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from stackcnn.schemas.events import EventStream, SensorGeometryHeader, SimilFrame
from stackcnn.schemas.scene import GroundTruth, SceneConfig, SourceSpec, SourceTruth, TruthPoint
from stackcnn.services.frames import frame_count
from stackcnn.utils.config import load_yaml
from stackcnn.utils.errors import DegenerateBackgroundError

logger = logging.getLogger(__name__)


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5).astype(np.int64)


def _background_events(rng: np.random.Generator, config: SceneConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cells = config.width * config.height
    mean = config.background_rate * config.duration / 1e6
    per_pixel = rng.poisson(mean, size=cells) if mean > 0 else np.zeros(cells, dtype=np.int64)
    pixel = np.repeat(np.arange(cells, dtype=np.int64), per_pixel)
    t = rng.integers(0, config.duration, size=pixel.size, dtype=np.int64)
    return t, pixel % config.width, pixel // config.width


def _source_events(
    rng: np.random.Generator,
    source: SourceSpec,
    config: SceneConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    t_exit = min(source.t_exit, config.duration)
    if t_exit <= source.t_enter:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    n = rng.poisson(source.event_rate * (t_exit - source.t_enter) / 1e6)
    t = rng.integers(source.t_enter, t_exit, size=n, dtype=np.int64)
    tau = (t - source.t_enter) / 1e6
    px = source.start_position[0] + source.velocity[0] * tau
    py = source.start_position[1] + source.velocity[1] * tau
    if source.psf_sigma > 0:
        scatter = rng.normal(0.0, source.psf_sigma, size=(2, n))
        px = px + scatter[0]
        py = py + scatter[1]
    x = _round_half_up(px)
    y = _round_half_up(py)
    inside = (x >= 0) & (x < config.width) & (y >= 0) & (y < config.height)
    return t[inside], x[inside], y[inside]


def ground_truth(config: SceneConfig, dt: int | None = None) -> GroundTruth:
    """True source positions at each window midpoint inside [t_enter, t_exit)."""
    dt = dt or config.dt
    truth = GroundTruth(width=config.width, height=config.height, dt=dt)
    n_windows = frame_count(config.duration, dt)
    for index, source in enumerate(config.sources):
        points = []
        for k in range(n_windows):
            t_mid = (k + 0.5) * dt
            if not source.t_enter <= t_mid < source.t_exit:
                continue
            x, y = source.position_at(t_mid)
            if -0.5 <= x < config.width - 0.5 and -0.5 <= y < config.height - 0.5:
                points.append(TruthPoint(window=k, t_mid=t_mid, x=x, y=y))
        truth.sources.append(
            SourceTruth(
                source=index,
                velocity_px_per_frame=(source.velocity[0] * dt / 1e6, source.velocity[1] * dt / 1e6),
                positions=points,
            )
        )
    return truth


def generate_scene(config: SceneConfig) -> tuple[SensorGeometryHeader, EventStream, GroundTruth]:
    rng = np.random.default_rng(config.rng_seed)
    parts = [_background_events(rng, config)]
    for source in config.sources:
        parts.append(_source_events(rng, source, config))
    t = np.concatenate([p[0] for p in parts])
    x = np.concatenate([p[1] for p in parts])
    y = np.concatenate([p[2] for p in parts])
    order = np.lexsort((x, y, t))
    events = EventStream(t=t[order], x=x[order], y=y[order], p=np.ones(t.size, dtype=np.int8))
    header = SensorGeometryHeader(width=config.width, height=config.height, duration=config.duration)
    logger.info(
        "generated scene seed=%d: %d events, %d source(s)", config.rng_seed, len(events), len(config.sources)
    )
    return header, events, ground_truth(config)


def generate_frames(config: SceneConfig, dt: int | None = None) -> tuple[list[SimilFrame], GroundTruth]:
    """Draw simil-frames directly, skipping the per-event representation.

    Background counts are Poisson per pixel per window and the source events
    follow the same process as ``generate_scene``, so the frames have the
    distribution of ``build_simil_frames(generate_scene(config))`` without the
    cost of materialising every background event.
    """
    dt = dt or config.dt
    rng = np.random.default_rng(config.rng_seed)
    n_frames = frame_count(config.duration, dt)
    cells = config.width * config.height
    lengths = np.minimum(dt, config.duration - np.arange(n_frames) * dt)
    means = config.background_rate * lengths / 1e6
    counts = rng.poisson(np.repeat(means, cells)).reshape(n_frames, config.height, config.width)
    for source in config.sources:
        t, x, y = _source_events(rng, source, config)
        flat = (t // dt) * cells + y * config.width + x
        counts += np.bincount(flat, minlength=n_frames * cells).reshape(counts.shape)
    frames = [SimilFrame(counts=counts[k], t_start=k * dt, dt=dt) for k in range(n_frames)]
    return frames, ground_truth(config, dt)


def measure_snr(
    grid: np.ndarray,
    peak: tuple[int, int],
    exclusion_radius: float,
    mask: np.ndarray | None = None,
) -> float:
    """(value at peak - background mean) / background std.

    The background is every cell farther than ``exclusion_radius`` from the
    peak, optionally restricted to cells where ``mask`` is true. ``peak`` is
    ``(x, y)``.
    """
    grid = np.asarray(grid, dtype=np.float64)
    px, py = peak
    yy, xx = np.indices(grid.shape)
    background = (xx - px) ** 2 + (yy - py) ** 2 > exclusion_radius**2
    if mask is not None:
        background &= mask
    values = grid[background]
    if values.size < 2:
        raise DegenerateBackgroundError("background region is empty")
    std = values.std()
    if std == 0:
        raise DegenerateBackgroundError("background has zero variance")
    return float((grid[py, px] - values.mean()) / std)


def load_scene_config(path: str | Path) -> SceneConfig:
    return SceneConfig.model_validate(load_yaml(path))


def save_ground_truth(truth: GroundTruth, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(truth.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def load_ground_truth(path: str | Path) -> GroundTruth:
    return GroundTruth.model_validate_json(Path(path).read_text(encoding="utf-8"))


__all__ = [
    "generate_scene",
    "generate_frames",
    "ground_truth",
    "measure_snr",
    "load_scene_config",
    "save_ground_truth",
    "load_ground_truth",
]
