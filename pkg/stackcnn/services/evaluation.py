"""Seeded Monte-Carlo studies of the detector: stacking gain, injection
recovery, false alarms, faintness, speed limits and resolution loss.

Pipeline studies take ``shape`` as the classifier grid. Scenes are simulated
at sensor resolution (``shape`` times ``config.downsample``) with the
background spread so that one grid cell keeps ``background`` counts per frame;
the pipeline does the downsampling.

Every study draws its scenes from one ``numpy`` generator seeded by ``seed``,
so reruns are identical.
"""

from __future__ import annotations

import logging
import math
from typing import Mapping, Sequence

import numpy as np
from tqdm import tqdm

from stackcnn.models.cnn import CnnModel
from stackcnn.schemas.classifier import ClassifierKind
from stackcnn.schemas.evaluation import (
    DisplacementPoint,
    FaintnessPoint,
    FalseAlarmResult,
    InjectionResult,
    ResolutionPoint,
    SqrtNResult,
)
from stackcnn.schemas.events import SimilFrame
from stackcnn.schemas.pipeline import Detection, PipelineConfig
from stackcnn.schemas.scene import SceneConfig, SourceSpec
from stackcnn.schemas.stacking import StackedImage, TrialVector
from stackcnn.services.classifier import matched_filter_score
from stackcnn.services.cnn_training import FRAME_DT_US, injected_scene
from stackcnn.services.pipeline import DetectionPipeline, downsampled_shape
from stackcnn.services.stacking import coverage_mask, make_hex_pool, stack
from stackcnn.services.synth import generate_frames, measure_snr
from stackcnn.utils.config import settings
from stackcnn.utils.errors import ConfigError
from stackcnn.utils.logging import progress_enabled

logger = logging.getLogger(__name__)

START_X = 9.5


def _seeds(rng: np.random.Generator, count: int, desc: str):
    draws = [int(s) for s in rng.integers(0, 2**63, size=count)]
    return tqdm(draws, desc=desc, disable=not progress_enabled(logger))


def _pixel_aligned_scene(
    seed: int,
    shape: tuple[int, int],
    n: int,
    row: int,
    signal_per_frame: float,
    background: float,
    dt: int = FRAME_DT_US,
) -> SceneConfig:
    """One source moving +1 px/frame whose events all land in pixel (10 + k, row) during frame k."""
    scale = 1e6 / dt
    height, width = shape
    return SceneConfig(
        width=width,
        height=height,
        duration=n * dt,
        background_rate=background * scale,
        rng_seed=seed,
        dt=dt,
        sources=[
            SourceSpec(
                start_position=(START_X, float(row)),
                velocity=(scale, 0.0),
                event_rate=signal_per_frame * scale,
                t_exit=n * dt,
            )
        ],
    )


def _aligned_peak(n: int, row: int) -> tuple[int, int]:
    return int(START_X + 0.5) + n - 1, row


def _check_aligned_fit(shape: tuple[int, int], n: int, radius: int) -> None:
    height, width = shape
    if _aligned_peak(n, 0)[0] + radius + 1 >= width or height < 2 * radius + 3:
        raise ConfigError(f"grid {width}x{height} is too small for an aligned source over {n} frames")


def _nearest_hit(detections: Sequence[Detection], position: tuple[float, float], tolerance: float) -> Detection | None:
    best, best_d = None, tolerance
    for d in detections:
        dist = math.hypot(d.peak[0] - position[0], d.peak[1] - position[1])
        if dist <= best_d:
            best, best_d = d, dist
    return best


def _pipeline_config(config: PipelineConfig | None) -> PipelineConfig:
    return config or PipelineConfig(classifier=ClassifierKind.matched_filter)


def _sensor_shape(shape: tuple[int, int], factor: int) -> tuple[int, int]:
    return shape[0] * factor, shape[1] * factor


def _to_grid(position: tuple[float, float], factor: int) -> tuple[float, float]:
    """Sensor pixel coordinates to (fractional) downsampled cell coordinates."""
    return (position[0] + 0.5) / factor - 0.5, (position[1] + 0.5) / factor - 0.5


def _injected_frames(
    rng: np.random.Generator,
    shape: tuple[int, int],
    config: PipelineConfig,
    velocity: tuple[float, float],
    snr: float,
    background: float,
) -> tuple[list[SimilFrame], tuple[float, float]]:
    """Sensor-resolution frames for a source moving at ``velocity`` grid cells per frame.

    Returns the frames and the source's newest position in grid coordinates.
    """
    f = config.downsample
    scene, newest = injected_scene(
        rng,
        _sensor_shape(shape, f),
        config.n,
        (velocity[0] * f, velocity[1] * f),
        snr * f,
        background / f**2,
        dt_us=config.dt,
    )
    frames, _ = generate_frames(scene)
    return frames, _to_grid(newest, f)


def _run_window(
    frames: Sequence[SimilFrame], config: PipelineConfig, model: CnnModel | None
) -> list[Detection]:
    found: list[Detection] = []
    height, width = frames[0].counts.shape
    with DetectionPipeline(config, width, height, model) as pipeline:
        for frame in frames:
            found.extend(pipeline.push_frame(frame))
    return found


def sqrt_n_gain(
    n: int,
    seeds: int = 50,
    seed: int = 0,
    shape: tuple[int, int] = (32, 48),
    background: float = 4.0,
    single_snr: float = 3.0,
    exclusion_radius: int | None = None,
) -> SqrtNResult:
    """Mean stacked SNR over mean single-frame SNR for a source stacked at its true vector.

    The source sits in one pixel per frame, so the stacked peak collects all of
    its events and the ratio should approach sqrt(n).
    """
    radius = settings.EXCLUSION_RADIUS if exclusion_radius is None else exclusion_radius
    _check_aligned_fit(shape, n, radius)
    rng = np.random.default_rng(seed)
    row = shape[0] // 2
    peak = _aligned_peak(n, row)
    vector = TrialVector(vx=1.0, vy=0.0)
    single, stacked = [], []
    for scene_seed in _seeds(rng, seeds, f"sqrt-n n={n}"):
        config = _pixel_aligned_scene(scene_seed, shape, n, row, single_snr * math.sqrt(background), background)
        frames, _ = generate_frames(config)
        single.append(measure_snr(frames[-1].counts, peak, radius))
        image = stack(frames, vector)
        stacked.append(measure_snr(image.values, peak, radius, mask=coverage_mask(image)))
    result = SqrtNResult(
        n=n, seeds=seeds, mean_single_snr=float(np.mean(single)), mean_stacked_snr=float(np.mean(stacked))
    )
    logger.info("n=%d stacked/single SNR %.3f (sqrt(n) = %.3f)", n, result.ratio, result.expected)
    return result


def injection_recovery(
    scenes: int = 100,
    seed: int = 0,
    config: PipelineConfig | None = None,
    model: CnnModel | None = None,
    shape: tuple[int, int] = (60, 80),
    snr_range: tuple[float, float] = (8.0, 12.0),
    background: float = 4.0,
) -> InjectionResult:
    """Plant one source per scene at a random pool vector and run one detection window.

    A scene counts as detected when a detection peaks within ``merge_radius``
    of the source's newest-frame position; its velocity is recovered when that
    detection's vector is within one lattice spacing of the truth.
    """
    config = _pipeline_config(config)
    pool = make_hex_pool(config.max_displacement, config.rings)
    rng = np.random.default_rng(seed)
    detected = recovered = 0
    for _ in tqdm(range(scenes), desc="injection", disable=not progress_enabled(logger)):
        truth = pool.vectors[int(rng.integers(len(pool)))]
        snr = float(rng.uniform(*snr_range))
        frames, newest = _injected_frames(rng, shape, config, truth.as_tuple(), snr, background)
        hit = _nearest_hit(_run_window(frames, config, model), newest, config.merge_radius)
        if hit is None:
            continue
        detected += 1
        if hit.vector.distance(truth) <= pool.lattice_spacing * (1 + 1e-9):
            recovered += 1
    result = InjectionResult(
        scenes=scenes,
        detected=detected,
        velocity_recovered=recovered,
        detection_rate=detected / scenes if scenes else 0.0,
        velocity_recovery_rate=recovered / detected if detected else 0.0,
        snr_range=snr_range,
    )
    logger.info("injection: detected %d/%d, velocity recovered %d", detected, scenes, recovered)
    return result


def false_alarm_rate(
    windows: int = 1000,
    seed: int = 0,
    config: PipelineConfig | None = None,
    model: CnnModel | None = None,
    shape: tuple[int, int] = (32, 32),
    background: float = 50.0,
) -> FalseAlarmResult:
    """Share of evaluation windows over pure Poisson noise that produce a detection."""
    if windows < 1:
        raise ConfigError("false-alarm study needs at least one window")
    config = _pipeline_config(config)
    rng = np.random.default_rng(seed)
    flagged: set[int] = set()
    frames_needed = config.n + (windows - 1) * config.stride
    height, width = _sensor_shape(shape, config.downsample)
    per_pixel = background / config.downsample**2
    with DetectionPipeline(
        config, width, height, model, on_detection=lambda d: flagged.add(d.window_index)
    ) as pipeline:
        for k in tqdm(range(frames_needed), desc="noise", disable=not progress_enabled(logger)):
            counts = rng.poisson(per_pixel, size=(height, width))
            pipeline.push_frame(SimilFrame(counts=counts, t_start=k * config.dt, dt=config.dt))
        evaluated = pipeline.windows_evaluated
        threshold = pipeline.classifier.threshold
    result = FalseAlarmResult(
        windows=evaluated,
        windows_with_detection=len(flagged),
        rate=len(flagged) / evaluated,
        threshold=threshold,
    )
    logger.info("false alarms: %d of %d windows (threshold %.3f)", len(flagged), evaluated, threshold)
    return result


def faintness_sweep(
    per_frame_snrs: Sequence[float] = (1.0, 1.5, 2.0, 2.5, 3.0),
    seeds: int = 50,
    seed: int = 0,
    n: int = 16,
    shape: tuple[int, int] = (32, 48),
    background: float = 4.0,
    threshold: float | None = None,
    exclusion_radius: int | None = None,
    tolerance: float = 2.0,
) -> list[FaintnessPoint]:
    """Matched-filter detection rate on the newest single frame versus the n-frame stack.

    The per-frame SNR is the source's mean count per frame over the background
    standard deviation.
    """
    threshold = settings.MF_THRESHOLD if threshold is None else threshold
    radius = settings.EXCLUSION_RADIUS if exclusion_radius is None else exclusion_radius
    _check_aligned_fit(shape, n, radius)
    rng = np.random.default_rng(seed)
    vector = make_hex_pool().nearest((1.0, 0.0))
    still = TrialVector(vx=0.0, vy=0.0)
    rows = np.arange(radius + 1, shape[0] - radius - 1)
    points = []
    for snr in per_frame_snrs:
        single_hits = stacked_hits = 0
        for scene_seed in _seeds(rng, seeds, f"faintness snr={snr}"):
            row = int(rows[scene_seed % rows.size])
            truth = _aligned_peak(n, row)
            config = _pixel_aligned_scene(scene_seed, shape, n, row, snr * math.sqrt(background), background)
            frames, _ = generate_frames(config)
            newest = StackedImage(values=frames[-1].counts, n=1, vector=still, t_end=frames[-1].t_end)
            for image, single in ((newest, True), (stack(frames, vector), False)):
                score = matched_filter_score(image, threshold, radius)
                if score.decision and math.dist(score.peak, truth) <= tolerance:
                    if single:
                        single_hits += 1
                    else:
                        stacked_hits += 1
        points.append(
            FaintnessPoint(per_frame_snr=snr, single_frame_rate=single_hits / seeds, stacked_rate=stacked_hits / seeds)
        )
        logger.info("faintness snr=%.2f single %.2f stacked %.2f", snr, single_hits / seeds, stacked_hits / seeds)
    return points


def displacement_sweep(
    speeds: Sequence[float] = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0),
    seeds: int = 20,
    seed: int = 0,
    config: PipelineConfig | None = None,
    model: CnnModel | None = None,
    shape: tuple[int, int] = (60, 80),
    snr: float = 10.0,
    background: float = 4.0,
) -> list[DisplacementPoint]:
    """Detection rate for sources moving along +x at each speed (px/frame)."""
    config = _pipeline_config(config)
    spacing = make_hex_pool(config.max_displacement, config.rings).lattice_spacing
    rng = np.random.default_rng(seed)
    points = []
    for speed in speeds:
        hits = recovered = 0
        for _ in tqdm(range(seeds), desc=f"speed {speed}", disable=not progress_enabled(logger)):
            frames, newest = _injected_frames(rng, shape, config, (speed, 0.0), snr, background)
            hit = _nearest_hit(_run_window(frames, config, model), newest, config.merge_radius)
            if hit is not None:
                hits += 1
                recovered += hit.vector.distance((speed, 0.0)) <= spacing * (1 + 1e-9)
        points.append(
            DisplacementPoint(
                speed_px_per_frame=speed,
                detection_rate=hits / seeds,
                velocity_recovery_rate=recovered / hits if hits else 0.0,
            )
        )
        logger.info("speed %.2f px/frame: detection rate %.2f", speed, hits / seeds)
    return points


def resolution_sweep(
    factors: Sequence[int] = (1, 3),
    snrs: Sequence[float] = (4.0, 6.0, 8.0, 12.0),
    seeds: int = 20,
    seed: int = 0,
    config: PipelineConfig | None = None,
    models: Mapping[int, CnnModel] | None = None,
    sensor_shape: tuple[int, int] = (90, 120),
    speed: float = 1.0,
    background: float = 1.0,
) -> list[ResolutionPoint]:
    """Detection rate on the same sensor-resolution scenes at each downsampling factor.

    ``snr`` is the stacked SNR of the source at full resolution and
    ``background`` the mean count per sensor pixel and frame. Block summing
    keeps the source counts but adds ``factor**2`` pixels of background to
    every cell, so coarse grids lose faint sources. ``speed`` is in sensor
    px/frame along +x and must map onto a pool vector at every factor.
    ``models`` maps a factor to a cnn model with that factor's grid.
    """
    config = _pipeline_config(config)
    models = models or {}
    pool = make_hex_pool(config.max_displacement, config.rings)
    for f in factors:
        if f < 1:
            raise ConfigError(f"downsample factor must be a positive integer, got {f}")
        if pool.nearest((speed / f, 0.0)).distance((speed / f, 0.0)) > 1e-9:
            raise ConfigError(f"{speed / f:g} px/frame at downsample {f} is not a pool vector")
    spacing = pool.lattice_spacing
    rng = np.random.default_rng(seed)
    points = []
    for snr in snrs:
        hits = {f: 0 for f in factors}
        recovered = {f: 0 for f in factors}
        for _ in tqdm(range(seeds), desc=f"resolution snr={snr}", disable=not progress_enabled(logger)):
            scene, newest = injected_scene(
                rng, sensor_shape, config.n, (speed, 0.0), snr, background, dt_us=config.dt
            )
            frames, _ = generate_frames(scene)
            for f in factors:
                run = config.model_copy(update={"downsample": f})
                found = _run_window(frames, run, models.get(f))
                hit = _nearest_hit(found, _to_grid(newest, f), run.merge_radius)
                if hit is not None:
                    hits[f] += 1
                    recovered[f] += hit.vector.distance((speed / f, 0.0)) <= spacing * (1 + 1e-9)
        for f in factors:
            point = ResolutionPoint(
                downsample=f,
                grid_shape=downsampled_shape(*sensor_shape, f),
                stacked_snr=snr,
                detection_rate=hits[f] / seeds,
                velocity_recovery_rate=recovered[f] / hits[f] if hits[f] else 0.0,
            )
            points.append(point)
            logger.info("resolution snr=%.1f downsample %d: detection rate %.2f", snr, f, point.detection_rate)
    return points


__all__ = [
    "sqrt_n_gain",
    "injection_recovery",
    "false_alarm_rate",
    "faintness_sweep",
    "displacement_sweep",
    "resolution_sweep",
]
