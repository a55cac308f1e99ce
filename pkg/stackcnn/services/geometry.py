"""Sensor geometry: how far a pixel reaches at a given distance and how fast
debris crosses the pixel grid.

All motion is taken perpendicular to the boresight, the worst case for
apparent speed.
"""

from __future__ import annotations

import math
from typing import Iterable

from stackcnn.schemas.geometry import DisplacementRow, GeometryParams, TradeoffRow
from stackcnn.utils.errors import ConfigError


def _positive(name: str, value: float) -> None:
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value}")


def _half_tan(params: GeometryParams) -> float:
    return math.tan(math.radians(params.fov_angle) / 2.0)


def pixel_footprint(params: GeometryParams, distance: float) -> float:
    """Meters covered by one pixel at ``distance``: 2 d tan(fov/2) / N."""
    _positive("distance", distance)
    return 2.0 * distance * _half_tan(params) / params.matrix_size


def small_angle_footprint(params: GeometryParams, distance: float) -> float:
    """d * fov / N with fov in radians."""
    _positive("distance", distance)
    return distance * math.radians(params.fov_angle) / params.matrix_size


def displacement_px_per_frame(params: GeometryParams, distance: float) -> float:
    return params.debris_speed * params.dt / pixel_footprint(params, distance)


def min_detectable_distance(params: GeometryParams, max_disp: float) -> float:
    """Closest distance at which the apparent motion stays within ``max_disp`` px/frame."""
    _positive("max_disp", max_disp)
    return params.debris_speed * params.dt * params.matrix_size / (2.0 * _half_tan(params) * max_disp)


def displacement_table(params: GeometryParams, distances: Iterable[float]) -> list[DisplacementRow]:
    return [
        DisplacementRow(
            distance_m=d,
            footprint_m=pixel_footprint(params, d),
            small_angle_footprint_m=small_angle_footprint(params, d),
            px_per_frame=displacement_px_per_frame(params, d),
        )
        for d in distances
    ]


def dt_tradeoff(
    params: GeometryParams,
    dts: Iterable[float],
    max_disp: float = 1.5,
    n: int = 16,
    reference_distance: float = 25_000.0,
) -> list[TradeoffRow]:
    """Shorter exposures bring the minimum distance closer but raise the frame rate to process."""
    rows = []
    for dt in dts:
        _positive("dt", dt)
        p = params.model_copy(update={"dt": dt})
        rows.append(
            TradeoffRow(
                dt_s=dt,
                min_distance_m=min_detectable_distance(p, max_disp),
                stack_latency_s=n * dt,
                frames_per_second=1.0 / dt,
                px_per_frame_at_reference=displacement_px_per_frame(p, reference_distance),
            )
        )
    return rows


__all__ = [
    "pixel_footprint",
    "small_angle_footprint",
    "displacement_px_per_frame",
    "min_detectable_distance",
    "displacement_table",
    "dt_tradeoff",
]
