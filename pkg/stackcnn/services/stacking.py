"""Trial-velocity pool and shift-and-add stacking.

Frame ``i`` of ``n`` (0 = oldest) is translated by ``round(v * (n - 1 - i))``
so that a source moving at ``v`` lands on its position in the newest frame.
Rounding is half-up on the cumulative displacement, and counts shifted past
the border are dropped, so a stacked image never holds more counts than its
input frames.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor
from typing import Sequence

import numpy as np

from stackcnn.schemas.events import SimilFrame
from stackcnn.schemas.stacking import StackedImage, TrialVector, VectorPool
from stackcnn.utils.errors import ConfigError, DimensionMismatchError, InvariantViolation

HEX_RINGS = 3


def _hex_distance(i: int, j: int) -> int:
    return max(abs(i), abs(j), abs(i + j))


def make_hex_pool(max_displacement: float = 1.0, rings: int = HEX_RINGS) -> VectorPool:
    """Hexagonal lattice rings 1..rings around the origin (6 + 12 + 18 = 36 for three rings).

    The lattice is scaled so the outermost ring's corners sit at
    ``max_displacement``. Vectors are ordered by ring, then by angle from +x.
    """
    if max_displacement <= 0:
        raise ConfigError(f"max_displacement must be positive, got {max_displacement}")
    spacing = max_displacement / rings
    half_sqrt3 = math.sqrt(3.0) / 2.0
    points = []
    for i in range(-rings, rings + 1):
        for j in range(-rings, rings + 1):
            ring = _hex_distance(i, j)
            if not 1 <= ring <= rings:
                continue
            vx = spacing * (i + 0.5 * j)
            vy = spacing * half_sqrt3 * j
            angle = math.atan2(vy, vx) % (2 * math.pi)
            points.append((ring, angle, vx, vy))
    points.sort()
    vectors = [TrialVector(vx=vx, vy=vy) for _, _, vx, vy in points]
    return VectorPool(vectors=vectors, lattice_spacing=spacing)


def frame_shift(vector: TrialVector, age: int) -> tuple[int, int]:
    """Integer (dx, dy) applied to a frame ``age`` steps older than the newest."""
    return (
        math.floor(vector.vx * age + 0.5),
        math.floor(vector.vy * age + 0.5),
    )


def _add_shifted(out: np.ndarray, grid: np.ndarray, dx: int, dy: int) -> None:
    h, w = grid.shape
    x0, x1 = max(0, dx), min(w, w + dx)
    y0, y1 = max(0, dy), min(h, h + dy)
    if x0 >= x1 or y0 >= y1:
        return
    out[y0:y1, x0:x1] += grid[y0 - dy : y1 - dy, x0 - dx : x1 - dx]


def _check_frames(frames: Sequence[SimilFrame]) -> None:
    if len(frames) < 2:
        raise ConfigError(f"stacking needs at least 2 frames, got {len(frames)}")
    shape = frames[0].counts.shape
    for frame in frames[1:]:
        if frame.counts.shape != shape:
            raise DimensionMismatchError(
                f"frame shape {frame.counts.shape} differs from {shape}"
            )


def _stack_grids(grids: Sequence[np.ndarray], vector: TrialVector, total: int) -> np.ndarray:
    n = len(grids)
    out = np.zeros(grids[0].shape, dtype=np.int64)
    for i, grid in enumerate(grids):
        dx, dy = frame_shift(vector, n - 1 - i)
        _add_shifted(out, grid, dx, dy)
    stacked = int(out.sum())
    if stacked > total:
        raise InvariantViolation(
            f"stacked total {stacked} exceeds input total {total} for v=({vector.vx:g}, {vector.vy:g})"
        )
    return out


def stack(frames: Sequence[SimilFrame], vector: TrialVector) -> StackedImage:
    _check_frames(frames)
    values = _stack_grids([f.counts for f in frames], vector, sum(f.total for f in frames))
    return StackedImage(values=values, n=len(frames), vector=vector, t_end=frames[-1].t_end)


def stack_all(
    frames: Sequence[SimilFrame],
    pool: VectorPool,
    executor: Executor | None = None,
) -> list[StackedImage]:
    """One stacked image per pool vector, in pool order.

    With an ``executor`` the vectors are evaluated concurrently; ``map``
    keeps the output order, so results match the serial path exactly.
    """
    _check_frames(frames)
    grids = [f.counts for f in frames]
    n, t_end = len(frames), frames[-1].t_end
    total = sum(f.total for f in frames)

    def one(vector: TrialVector) -> StackedImage:
        return StackedImage(values=_stack_grids(grids, vector, total), n=n, vector=vector, t_end=t_end)

    mapper = executor.map if executor is not None else map
    return list(mapper(one, pool.vectors))


def coverage_region(shape: tuple[int, int], vector: TrialVector, n: int) -> tuple[slice, slice]:
    """(rows, cols) slices of the cells that receive a contribution from all n frames."""
    h, w = shape
    x0, x1, y0, y1 = 0, w, 0, h
    for age in range(n):
        dx, dy = frame_shift(vector, age)
        x0, x1 = max(x0, dx), min(x1, w + dx)
        y0, y1 = max(y0, dy), min(y1, h + dy)
    return slice(y0, max(y0, y1)), slice(x0, max(x0, x1))


def coverage_mask(image: StackedImage) -> np.ndarray:
    mask = np.zeros(image.shape, dtype=bool)
    mask[coverage_region(image.shape, image.vector, image.n)] = True
    return mask


__all__ = [
    "make_hex_pool",
    "frame_shift",
    "stack",
    "stack_all",
    "coverage_region",
    "coverage_mask",
]
