import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError

from stackcnn.schemas.geometry import GeometryParams
from stackcnn.services.geometry import (
    displacement_px_per_frame,
    displacement_table,
    dt_tradeoff,
    min_detectable_distance,
    pixel_footprint,
    small_angle_footprint,
)
from stackcnn.utils.errors import ConfigError

DEFAULT = GeometryParams()


def test_pixel_footprint_at_25_km():
    assert pixel_footprint(DEFAULT, 25_000) == pytest.approx(379.1, abs=0.05)


def test_displacement_at_25_km():
    assert displacement_px_per_frame(DEFAULT, 25_000) == pytest.approx(1.583, abs=1e-3)


def test_minimum_distance_for_one_and_a_half_pixels():
    d = min_detectable_distance(DEFAULT, 1.5)
    assert d == pytest.approx(26_375, abs=5)
    assert abs(d - 25_000) <= 0.15 * 25_000


def test_minimum_distance_for_one_pixel():
    assert min_detectable_distance(DEFAULT, 1.0) == pytest.approx(39_562, abs=5)


def test_small_angle_footprint_is_four_percent_short():
    exact = pixel_footprint(DEFAULT, 10_000)
    approx = small_angle_footprint(DEFAULT, 10_000)
    assert approx / exact == pytest.approx(0.959, abs=1e-3)


@settings(max_examples=100, deadline=None)
@given(
    fov=st.floats(1.0, 170.0),
    matrix=st.integers(1, 4096),
    speed=st.floats(1.0, 20_000.0),
    dt=st.floats(1e-4, 1.0),
    max_disp=st.floats(0.05, 10.0),
)
def test_min_distance_inverts_displacement(fov, matrix, speed, dt, max_disp):
    params = GeometryParams(fov_angle=fov, matrix_size=matrix, debris_speed=speed, dt=dt)
    d = min_detectable_distance(params, max_disp)
    assert displacement_px_per_frame(params, d) == pytest.approx(max_disp, rel=1e-12)


def test_displacement_falls_with_distance():
    rows = displacement_table(DEFAULT, [5_000, 10_000, 25_000, 50_000])
    px = [r.px_per_frame for r in rows]
    assert px == sorted(px, reverse=True)
    assert rows[2].footprint_m == pytest.approx(pixel_footprint(DEFAULT, 25_000))


def test_tradeoff_shorter_exposure_sees_closer():
    rows = dt_tradeoff(DEFAULT, [0.02, 0.04, 0.08, 0.16])
    distances = [r.min_distance_m for r in rows]
    assert distances == sorted(distances)
    eighty = rows[2]
    assert eighty.stack_latency_s == pytest.approx(1.28)
    assert eighty.frames_per_second == pytest.approx(12.5)
    assert eighty.px_per_frame_at_reference == pytest.approx(1.583, abs=1e-3)


@pytest.mark.parametrize("call", [
    lambda: pixel_footprint(DEFAULT, 0),
    lambda: min_detectable_distance(DEFAULT, -1.0),
    lambda: dt_tradeoff(DEFAULT, [0.0]),
])
def test_non_positive_inputs_rejected(call):
    with pytest.raises(ConfigError):
        call()


@pytest.mark.parametrize("field, value", [("fov_angle", 180.0), ("fov_angle", 0.0), ("matrix_size", 0), ("dt", -0.1)])
def test_invalid_params(field, value):
    with pytest.raises(ValidationError) as err:
        GeometryParams(**{field: value})
    assert field in str(err.value)
