from __future__ import annotations

import logging
from typing import Protocol, Sequence

import numpy as np

from stackcnn.models.cnn import CnnModel
from stackcnn.schemas.classifier import ClassifierInput, ClassifierKind, Score
from stackcnn.schemas.stacking import StackedImage
from stackcnn.services.stacking import coverage_mask, coverage_region
from stackcnn.services.synth import measure_snr
from stackcnn.utils.config import settings
from stackcnn.utils.errors import DegenerateBackgroundError, DimensionMismatchError

logger = logging.getLogger(__name__)


def normalize(image: StackedImage | np.ndarray) -> ClassifierInput:
    """Population z-score over all cells; a constant grid maps to zeros."""
    values = np.asarray(image.values if isinstance(image, StackedImage) else image, dtype=np.float64)
    std = values.std()
    if std == 0 or not np.isfinite(std):
        return ClassifierInput(normalized_grid=np.zeros_like(values))
    return ClassifierInput(normalized_grid=(values - values.mean()) / std)


def covered_peak(image: StackedImage) -> tuple[int, int]:
    """(x, y) of the brightest fully covered cell; ties go to the first in row-major order."""
    rows, cols = coverage_region(image.shape, image.vector, image.n)
    sub = image.values[rows, cols]
    if sub.size == 0:
        y, x = np.unravel_index(int(np.argmax(image.values)), image.shape)
        return int(x), int(y)
    y, x = np.unravel_index(int(np.argmax(sub)), sub.shape)
    return int(x + cols.start), int(y + rows.start)


def matched_filter_score(
    image: StackedImage,
    threshold: float | None = None,
    exclusion_radius: int | None = None,
) -> Score:
    """Peak significance in background standard deviations.

    Background statistics and the peak search are restricted to the cells every
    frame of the stack contributes to. A grid with no background variance is not
    scorable and gets value 0.
    """
    threshold = settings.MF_THRESHOLD if threshold is None else threshold
    radius = settings.EXCLUSION_RADIUS if exclusion_radius is None else exclusion_radius
    peak = covered_peak(image)
    try:
        value = measure_snr(image.values, peak, radius, mask=coverage_mask(image))
    except DegenerateBackgroundError:
        value = 0.0
    return Score(value=value, threshold=threshold, kind=ClassifierKind.matched_filter, peak=peak)


def predict(model: CnnModel, input: ClassifierInput, threshold: float | None = None) -> Score:
    threshold = settings.CNN_THRESHOLD if threshold is None else threshold
    if input.shape != tuple(model.architecture.input_shape):
        raise DimensionMismatchError(
            f"model expects {tuple(model.architecture.input_shape)} grids, got {input.shape}"
        )
    value = float(model.predict_proba(input.normalized_grid)[0])
    return Score(value=value, threshold=threshold, kind=ClassifierKind.cnn)


def gradient_check(
    model: CnnModel,
    input: ClassifierInput,
    label: int,
    *,
    step: float = 1e-4,
    samples_per_param: int = 10,
    seed: int = 0,
    floor: float = 1e-6,
) -> float:
    """Largest relative difference between analytic and central-difference gradients.

    Compares a random subsample of ``samples_per_param`` entries of each
    parameter tensor; the relative error divides by ``max(|a|, |n|, floor)``.
    """
    rng = np.random.default_rng(seed)
    x = input.normalized_grid[None]
    y = np.array([float(label)])
    trial = model.copy()
    _, grads = trial.loss_and_grads(x, y)
    worst = 0.0
    for name, tensor in trial.params.items():
        flat = tensor.reshape(-1)
        picks = rng.choice(flat.size, size=min(samples_per_param, flat.size), replace=False)
        analytic = grads[name].reshape(-1)
        for i in picks.tolist():
            original = flat[i]
            flat[i] = original + step
            plus = trial.loss(x, y)
            flat[i] = original - step
            minus = trial.loss(x, y)
            flat[i] = original
            numeric = (plus - minus) / (2 * step)
            err = abs(analytic[i] - numeric) / max(abs(analytic[i]), abs(numeric), floor)
            worst = max(worst, err)
    logger.debug("gradient check max relative error %.3e", worst)
    return worst


class Classifier(Protocol):
    kind: ClassifierKind
    threshold: float

    def score_all(self, images: Sequence[StackedImage]) -> list[Score]: ...


class MatchedFilterClassifier:
    kind = ClassifierKind.matched_filter

    def __init__(self, threshold: float | None = None, exclusion_radius: int | None = None) -> None:
        self.threshold = settings.MF_THRESHOLD if threshold is None else threshold
        self.exclusion_radius = settings.EXCLUSION_RADIUS if exclusion_radius is None else exclusion_radius

    def score_all(self, images: Sequence[StackedImage]) -> list[Score]:
        return [matched_filter_score(img, self.threshold, self.exclusion_radius) for img in images]


class CnnClassifier:
    """Scores every stacked image of a window in one batched forward pass."""

    kind = ClassifierKind.cnn

    def __init__(self, model: CnnModel, threshold: float | None = None) -> None:
        self.model = model
        self.threshold = settings.CNN_THRESHOLD if threshold is None else threshold

    @property
    def input_shape(self) -> tuple[int, int]:
        return tuple(self.model.architecture.input_shape)  # type: ignore[return-value]

    def score_all(self, images: Sequence[StackedImage]) -> list[Score]:
        if not images:
            return []
        grids = np.stack([normalize(img).normalized_grid for img in images])
        probs = self.model.predict_proba(grids)
        return [
            Score(value=float(p), threshold=self.threshold, kind=self.kind, peak=covered_peak(img))
            for p, img in zip(probs.tolist(), images)
        ]


__all__ = [
    "normalize",
    "matched_filter_score",
    "predict",
    "gradient_check",
    "covered_peak",
    "Classifier",
    "MatchedFilterClassifier",
    "CnnClassifier",
]
