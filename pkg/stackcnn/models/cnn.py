"""Small convolutional classifier written directly against numpy.

Layout (per convolution stage): valid k x k convolution -> ReLU -> p x p
pooling; then one fully connected unit with a logistic output. Inputs are
batches of single-channel grids shaped (batch, height, width). All arithmetic
is float64 so finite-difference gradient checks are meaningful.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from stackcnn.schemas.classifier import Architecture, TrainingMetadata
from stackcnn.utils.errors import ConfigError, DimensionMismatchError


def sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


def bce_with_logits(z: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def feature_shapes(arch: Architecture) -> list[tuple[int, int, int]]:
    """(channels, height, width) after each stage, input first."""
    channels, (h, w) = 1, arch.input_shape
    shapes = [(channels, h, w)]
    for filters in arch.conv_filters:
        h, w = h - arch.kernel_size + 1, w - arch.kernel_size + 1
        h, w = h // arch.pool, w // arch.pool
        if h < 1 or w < 1:
            raise ConfigError(f"input {arch.input_shape} is too small for {len(arch.conv_filters)} conv stages")
        channels = filters
        shapes.append((channels, h, w))
    return shapes


def _conv_windows(x: np.ndarray, k: int) -> np.ndarray:
    # (B, C, H, W) -> (B, C, H-k+1, W-k+1, k, k)
    return sliding_window_view(x, (k, k), axis=(2, 3))


def _conv_forward(windows: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))
    return out.transpose(0, 3, 1, 2) + b[None, :, None, None]


def _conv_backward_input(dz: np.ndarray, w: np.ndarray) -> np.ndarray:
    k = w.shape[-1]
    padded = np.pad(dz, ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1)))
    windows = _conv_windows(padded, k)
    rotated = w[:, :, ::-1, ::-1]
    dx = np.tensordot(windows, rotated, axes=([1, 4, 5], [0, 2, 3]))
    return dx.transpose(0, 3, 1, 2)


def _pool_forward(a: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    b, c, h, w = a.shape
    ho, wo = h // p, w // p
    blocks = a[:, :, : ho * p, : wo * p].reshape(b, c, ho, p, wo, p).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(b, c, ho, wo, p * p)
    idx = blocks.argmax(axis=-1)
    return np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0], idx


def _pool_backward(dp: np.ndarray, idx: np.ndarray, shape: tuple[int, ...], p: int) -> np.ndarray:
    b, c, h, w = shape
    ho, wo = dp.shape[2], dp.shape[3]
    blocks = np.zeros((b, c, ho, wo, p * p))
    np.put_along_axis(blocks, idx[..., None], dp[..., None], axis=-1)
    blocks = blocks.reshape(b, c, ho, wo, p, p).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, ho * p, wo * p)
    da = np.zeros(shape)
    da[:, :, : ho * p, : wo * p] = blocks
    return da


class CnnModel:
    """Parameters plus forward/backward passes; treat instances as immutable once trained."""

    def __init__(
        self,
        architecture: Architecture,
        params: dict[str, np.ndarray],
        metadata: TrainingMetadata | None = None,
    ) -> None:
        self.architecture = architecture
        self.params = {name: np.asarray(value, dtype=np.float64) for name, value in params.items()}
        self.metadata = metadata or TrainingMetadata()
        expected = self.param_shapes(architecture)
        if list(self.params) != list(expected):
            raise ConfigError(f"parameter names {list(self.params)} do not match architecture {list(expected)}")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ConfigError(f"parameter {name} has shape {self.params[name].shape}, expected {shape}")

    @staticmethod
    def param_shapes(arch: Architecture) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        stages = feature_shapes(arch)
        for i, filters in enumerate(arch.conv_filters):
            in_channels = stages[i][0]
            shapes[f"conv{i}.w"] = (filters, in_channels, arch.kernel_size, arch.kernel_size)
            shapes[f"conv{i}.b"] = (filters,)
        c, h, w = stages[-1]
        shapes["fc.w"] = (c * h * w,)
        shapes["fc.b"] = ()
        return shapes

    @classmethod
    def zeros(cls, arch: Architecture) -> "CnnModel":
        return cls(arch, {name: np.zeros(shape) for name, shape in cls.param_shapes(arch).items()})

    @classmethod
    def initialize(cls, arch: Architecture, seed: int) -> "CnnModel":
        """He-normal weights, zero biases, drawn from ``default_rng(seed)``."""
        rng = np.random.default_rng(seed)
        params = {}
        for name, shape in cls.param_shapes(arch).items():
            if name.endswith(".b"):
                params[name] = np.zeros(shape)
            else:
                fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else shape[0]
                params[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        return cls(arch, params)

    def copy(self) -> "CnnModel":
        return CnnModel(
            self.architecture,
            {name: value.copy() for name, value in self.params.items()},
            self.metadata.model_copy(deep=True),
        )

    def named_params(self) -> Iterator[tuple[str, np.ndarray]]:
        yield from self.params.items()

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.shape[1:] != tuple(self.architecture.input_shape):
            raise DimensionMismatchError(
                f"model expects {tuple(self.architecture.input_shape)} grids, got {x.shape[1:]}"
            )
        return x

    def _forward(self, x: np.ndarray) -> tuple[np.ndarray, list[dict]]:
        arch = self.architecture
        a = x[:, None, :, :]
        cache = []
        for i in range(len(arch.conv_filters)):
            windows = _conv_windows(a, arch.kernel_size)
            z = _conv_forward(windows, self.params[f"conv{i}.w"], self.params[f"conv{i}.b"])
            r = np.maximum(z, 0.0)
            pooled, idx = _pool_forward(r, arch.pool)
            cache.append({"windows": windows, "z": z, "idx": idx})
            a = pooled
        flat = a.reshape(a.shape[0], -1)
        logits = flat @ self.params["fc.w"] + self.params["fc.b"]
        cache.append({"flat": flat, "shape": a.shape})
        return logits, cache

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self._forward(self._check_input(x))[0]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return sigmoid(self.logits(x))

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        return bce_with_logits(self.logits(x), np.asarray(y, dtype=np.float64).reshape(-1))

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        """Mean binary cross-entropy over the batch and its gradient for every parameter."""
        x = self._check_input(x)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        arch = self.architecture
        logits, cache = self._forward(x)
        batch = x.shape[0]
        loss = bce_with_logits(logits, y)

        grads: dict[str, np.ndarray] = {}
        dz = (sigmoid(logits) - y) / batch
        head = cache[-1]
        grads["fc.w"] = head["flat"].T @ dz
        grads["fc.b"] = np.asarray(dz.sum())
        da = np.outer(dz, self.params["fc.w"]).reshape(head["shape"])

        for i in reversed(range(len(arch.conv_filters))):
            stage = cache[i]
            z = stage["z"]
            dr = _pool_backward(da, stage["idx"], z.shape, arch.pool)
            dzc = dr * (z > 0)
            grads[f"conv{i}.w"] = np.tensordot(dzc, stage["windows"], axes=([0, 2, 3], [0, 2, 3]))
            grads[f"conv{i}.b"] = dzc.sum(axis=(0, 2, 3))
            if i > 0:
                da = _conv_backward_input(dzc, self.params[f"conv{i}.w"])

        ordered = {name: grads[name] for name in self.params}
        return loss, ordered


__all__ = ["CnnModel", "sigmoid", "bce_with_logits", "feature_shapes"]
