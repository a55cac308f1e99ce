"""Synthetic training corpus and plain mini-batch SGD for the stack classifier."""

from __future__ import annotations

import logging
import math

import numpy as np
from tqdm import tqdm

from stackcnn.models.cnn import CnnModel
from stackcnn.schemas.classifier import Architecture, CnnHyperParams, TrainingMetadata, TrainingSet
from stackcnn.schemas.scene import SceneConfig, SourceSpec
from stackcnn.schemas.stacking import TrialVector, VectorPool
from stackcnn.services.classifier import normalize
from stackcnn.services.stacking import make_hex_pool, stack
from stackcnn.services.synth import generate_frames
from stackcnn.utils.errors import ConfigError
from stackcnn.utils.logging import progress_enabled

logger = logging.getLogger(__name__)

FRAME_DT_US = 100_000
# Share of a point source's events landing in its brightest stacked pixel,
# used to turn a requested stacked SNR into a source event rate.
PEAK_FRACTION = 0.5


def source_rate_for_snr(snr: float, n: int, background_per_frame: float, dt_us: int = FRAME_DT_US) -> float:
    """Source events/second giving roughly ``snr`` at the stacked peak."""
    per_frame = snr * math.sqrt(n * background_per_frame) / (PEAK_FRACTION * n)
    return per_frame * 1e6 / dt_us


def injected_scene(
    rng: np.random.Generator,
    shape: tuple[int, int],
    n: int,
    velocity: tuple[float, float] | None,
    stacked_snr: float,
    background_per_frame: float,
    dt_us: int = FRAME_DT_US,
    margin: int = 2,
    psf_sigma: float = 0.0,
) -> tuple[SceneConfig, tuple[float, float] | None]:
    """Scene of n frames with an optional source moving at ``velocity`` px/frame.

    Returns the config and the source's position at the middle of the newest
    frame (None without a source).
    """
    height, width = shape
    seed = int(rng.integers(0, 2**63))
    duration = n * dt_us
    sources = []
    newest = None
    if velocity is not None:
        vx, vy = velocity
        lo_x = margin + max(0.0, vx * (n - 1))
        hi_x = width - 1 - margin + min(0.0, vx * (n - 1))
        lo_y = margin + max(0.0, vy * (n - 1))
        hi_y = height - 1 - margin + min(0.0, vy * (n - 1))
        if lo_x > hi_x or lo_y > hi_y:
            raise ConfigError(f"grid {width}x{height} is too small for {n} frames at {velocity} px/frame")
        newest = (float(rng.uniform(lo_x, hi_x)), float(rng.uniform(lo_y, hi_y)))
        t_mid_newest = (n - 0.5) * dt_us
        frames_back = t_mid_newest / dt_us
        start = (newest[0] - vx * frames_back, newest[1] - vy * frames_back)
        scale = 1e6 / dt_us
        sources.append(
            SourceSpec(
                start_position=start,
                velocity=(vx * scale, vy * scale),
                event_rate=source_rate_for_snr(stacked_snr, n, background_per_frame, dt_us),
                t_enter=0,
                t_exit=duration,
                psf_sigma=psf_sigma,
            )
        )
    config = SceneConfig(
        width=width,
        height=height,
        duration=duration,
        background_rate=background_per_frame * 1e6 / dt_us,
        rng_seed=seed,
        dt=dt_us,
        sources=sources,
    )
    return config, newest


def _far_vector(rng: np.random.Generator, pool: VectorPool, truth: TrialVector) -> TrialVector:
    far = [v for v in pool.vectors if v.distance(truth) > pool.lattice_spacing * 1.0001]
    return far[int(rng.integers(len(far)))]


def _near_vector(rng: np.random.Generator, pool: VectorPool, truth: TrialVector) -> TrialVector:
    near = [v for v in pool.vectors if v.distance(truth) <= pool.lattice_spacing * 1.0001]
    return near[int(rng.integers(len(near)))]


def make_training_set(
    size: int,
    seed: int,
    shape: tuple[int, int] = (60, 80),
    n: int = 16,
    pool: VectorPool | None = None,
    snr_range: tuple[float, float] = (5.0, 15.0),
    background_range: tuple[float, float] = (2.0, 8.0),
) -> TrainingSet:
    """Balanced labelled stacks.

    Positives stack a source at its true vector or a lattice-adjacent one.
    Negatives are split between stacks of the same kind of scene at a vector
    more than one lattice spacing away and stacks of source-free scenes.
    """
    pool = pool or make_hex_pool()
    rng = np.random.default_rng(seed)
    inputs = np.empty((size, *shape))
    labels = np.zeros(size)
    for i in range(size):
        positive = i % 2 == 0
        background = float(rng.uniform(*background_range))
        snr = float(rng.uniform(*snr_range))
        truth = pool.vectors[int(rng.integers(len(pool)))]
        with_source = positive or rng.random() < 0.5
        config, _ = injected_scene(
            rng, shape, n, truth.as_tuple() if with_source else None, snr, background
        )
        frames, _ = generate_frames(config)
        if positive:
            trial = _near_vector(rng, pool, truth)
        elif with_source:
            trial = _far_vector(rng, pool, truth)
        else:
            trial = pool.vectors[int(rng.integers(len(pool)))]
        inputs[i] = normalize(stack(frames, trial)).normalized_grid
        labels[i] = 1.0 if positive else 0.0
    order = rng.permutation(size)
    return TrainingSet(inputs=inputs[order], labels=labels[order])


def evaluate_accuracy(model: CnnModel, dataset: TrainingSet, threshold: float = 0.5, batch_size: int = 128) -> float:
    if not len(dataset):
        return float("nan")
    hits = 0
    for start in range(0, len(dataset), batch_size):
        probs = model.predict_proba(dataset.inputs[start : start + batch_size])
        hits += int(np.sum((probs >= threshold) == (dataset.labels[start : start + batch_size] == 1)))
    return hits / len(dataset)


def train_cnn(
    dataset: TrainingSet,
    hyperparams: CnnHyperParams,
    architecture: Architecture | None = None,
    validation: TrainingSet | None = None,
) -> CnnModel:
    """Mini-batch SGD on mean binary cross-entropy, deterministic given ``hyperparams.seed``."""
    if len(dataset) == 0 or len(np.unique(dataset.labels)) < 2:
        raise ConfigError("training set must contain both positive and negative samples")
    architecture = architecture or Architecture(input_shape=dataset.inputs.shape[1:])
    model = CnnModel.initialize(architecture, hyperparams.seed)
    rng = np.random.default_rng(hyperparams.seed + 1)
    initial = model.loss(dataset.inputs, dataset.labels)
    curve: list[float] = []

    epochs = range(hyperparams.epochs)
    for epoch in tqdm(epochs, desc="training", disable=not progress_enabled(logger)):
        order = rng.permutation(len(dataset))
        total = 0.0
        for start in range(0, len(dataset), hyperparams.batch_size):
            batch = order[start : start + hyperparams.batch_size]
            loss, grads = model.loss_and_grads(dataset.inputs[batch], dataset.labels[batch])
            for name, grad in grads.items():
                model.params[name] -= hyperparams.learning_rate * grad
            total += loss * len(batch)
        curve.append(total / len(dataset))
        logger.debug("epoch %d loss %.5f", epoch, curve[-1])

    model.metadata = TrainingMetadata(
        seed=hyperparams.seed,
        epochs=hyperparams.epochs,
        learning_rate=hyperparams.learning_rate,
        batch_size=hyperparams.batch_size,
        initial_loss=initial,
        loss_curve=curve,
        validation_accuracy=evaluate_accuracy(model, validation) if validation is not None else None,
    )
    if curve:
        logger.info("trained %d epochs: loss %.4f -> %.4f", hyperparams.epochs, initial, curve[-1])
    return model


__all__ = [
    "make_training_set",
    "train_cnn",
    "evaluate_accuracy",
    "injected_scene",
    "source_rate_for_snr",
    "FRAME_DT_US",
]
