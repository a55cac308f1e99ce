import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stackcnn.schemas.events import SimilFrame
from stackcnn.schemas.stacking import StackedImage, TrialVector
from stackcnn.services.dumps import PGM_MAXVAL, write_csv_grid, write_pgm
from stackcnn.services import stacking
from stackcnn.services.stacking import (
    coverage_mask,
    coverage_region,
    frame_shift,
    make_hex_pool,
    stack,
    stack_all,
)
from stackcnn.utils.errors import ConfigError, DimensionMismatchError, InvariantViolation


def _frames(grids):
    return [SimilFrame(counts=g, t_start=i * 10, dt=10) for i, g in enumerate(grids)]


def naive_stack(grids, vx, vy):
    n = len(grids)
    h, w = grids[0].shape
    out = np.zeros((h, w), dtype=np.int64)
    for i, grid in enumerate(grids):
        age = n - 1 - i
        dx = math.floor(vx * age + 0.5)
        dy = math.floor(vy * age + 0.5)
        for y in range(h):
            for x in range(w):
                ty, tx = y + dy, x + dx
                if 0 <= ty < h and 0 <= tx < w:
                    out[ty, tx] += grid[y, x]
    return out


def test_pool_has_36_vectors_on_unit_hexagon():
    pool = make_hex_pool()
    assert len(pool) == 36
    magnitudes = [v.magnitude for v in pool.vectors]
    assert max(magnitudes) == pytest.approx(1.0, abs=1e-12)
    assert min(magnitudes) > 0
    assert sum(v.vx for v in pool.vectors) == pytest.approx(0.0, abs=1e-12)
    assert sum(v.vy for v in pool.vectors) == pytest.approx(0.0, abs=1e-12)
    assert pool.lattice_spacing == pytest.approx(1 / 3)


def test_pool_is_closed_under_sixty_degree_rotation():
    pool = make_hex_pool()
    c, s = math.cos(math.pi / 3), math.sin(math.pi / 3)
    for v in pool.vectors:
        rotated = (c * v.vx - s * v.vy, s * v.vx + c * v.vy)
        assert pool.nearest(rotated).distance(rotated) < 1e-12


def test_pool_ordered_by_ring():
    pool = make_hex_pool(max_displacement=1.5)
    rings = [round(v.magnitude / pool.lattice_spacing, 6) for v in pool.vectors]
    assert rings[:6] == [1.0] * 6
    assert pool.vectors[0] == TrialVector(vx=0.5, vy=0.0)


def test_pool_rejects_non_positive_radius():
    with pytest.raises(ConfigError):
        make_hex_pool(0.0)


@pytest.mark.parametrize(
    "v, age, expected",
    [((0.5, 0.0), 1, (1, 0)), ((-0.5, 0.0), 1, (0, 0)), ((1 / 3, -1 / 3), 3, (1, -1)), ((0.4, 0.6), 0, (0, 0))],
)
def test_frame_shift_rounds_half_up(v, age, expected):
    assert frame_shift(TrialVector(vx=v[0], vy=v[1]), age) == expected


def test_coherent_source_adds_up():
    n, h, w = 5, 8, 12
    grids = [np.zeros((h, w), dtype=np.int64) for _ in range(n)]
    for i in range(n):
        grids[i][3, 2 + i] = 4
    image = stack(_frames(grids), TrialVector(vx=1.0, vy=0.0))
    assert image.values[3, 2 + n - 1] == 4 * n
    assert image.values.sum() == 4 * n
    assert image.t_end == 50
    assert image.n == n


def test_matches_naive_oracle_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        h, w = rng.integers(1, 33, size=2)
        n = int(rng.integers(2, 9))
        vx, vy = rng.uniform(-3, 3, size=2)
        grids = [rng.integers(0, 5, size=(h, w)) for _ in range(n)]
        image = stack(_frames(grids), TrialVector(vx=vx, vy=vy))
        assert np.array_equal(image.values, naive_stack(grids, vx, vy))


def test_stack_all_in_pool_order_and_thread_independent(noise_frames):
    frames = noise_frames(6)
    pool = make_hex_pool()
    serial = stack_all(frames, pool)
    with ThreadPoolExecutor(max_workers=4) as executor:
        threaded = stack_all(frames, pool, executor)
    assert [img.vector for img in serial] == pool.vectors
    assert serial == threaded


def test_stack_needs_two_frames(noise_frames):
    with pytest.raises(ConfigError):
        stack(noise_frames(1), TrialVector(vx=0.0, vy=0.0))


def test_stack_rejects_mixed_shapes(noise_frames):
    frames = noise_frames(2) + noise_frames(1, shape=(5, 5))
    with pytest.raises(DimensionMismatchError):
        stack(frames, TrialVector(vx=0.0, vy=0.0))


def test_coverage_region_is_where_all_frames_contribute():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(2, 9))
        vx, vy = rng.uniform(-1.2, 1.2, size=2)
        ones = [np.ones((11, 13), dtype=np.int64)] * n
        image = stack(_frames(ones), TrialVector(vx=vx, vy=vy))
        assert np.array_equal(coverage_mask(image), image.values == n)


def test_coverage_region_shrinks_with_drift():
    rows, cols = coverage_region((10, 20), TrialVector(vx=1.0, vy=0.0), 5)
    assert (rows.start, rows.stop) == (0, 10)
    assert (cols.start, cols.stop) == (4, 20)


def _image(values):
    return StackedImage(values=np.asarray(values), n=2, vector=TrialVector(vx=0.0, vy=0.0), t_end=0)


def test_write_binary_pgm(tmp_path):
    path = write_pgm(_image([[0, 1], [2, 4]]), tmp_path / "s.pgm")
    data = path.read_bytes()
    header = b"P5\n2 2\n65535\n"
    assert data.startswith(header)
    body = np.frombuffer(data[len(header) :], dtype=">u2").reshape(2, 2)
    assert body[1, 1] == PGM_MAXVAL
    assert body[0, 0] == 0


def test_write_ascii_pgm_and_csv(tmp_path):
    image = _image([[0, 3], [6, 0]])
    lines = write_pgm(image, tmp_path / "s.pgm", binary=False).read_text().splitlines()
    assert lines[:3] == ["P2", "2 2", "65535"]
    assert lines[3].split() == ["0", str(round(3 * PGM_MAXVAL / 6))]
    assert write_csv_grid(image, tmp_path / "s.csv").read_text().splitlines() == ["0,3", "6,0"]


def test_stacked_values_are_read_only():
    values = np.zeros((2, 2))
    image = _image(values)
    with pytest.raises(ValueError):
        image.values[0, 0] = 1


POOL = make_hex_pool()


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(2, 5),
    content=st.tuples(st.integers(1, 6), st.integers(1, 6)),
    offset=st.tuples(st.integers(-2, 2), st.integers(-2, 2)),
    vector=st.sampled_from(POOL.vectors),
)
def test_translated_frames_give_translated_stack(seed, n, content, offset, vector):
    rng = np.random.default_rng(seed)
    ch, cw = content
    ty, tx = offset
    pad = 4 + 2 + 1
    h, w = ch + 2 * pad, cw + 2 * pad
    base, moved = [], []
    for _ in range(n):
        patch = rng.integers(0, 5, size=(ch, cw))
        a = np.zeros((h, w), dtype=np.int64)
        b = np.zeros((h, w), dtype=np.int64)
        a[pad : pad + ch, pad : pad + cw] = patch
        b[pad + ty : pad + ty + ch, pad + tx : pad + tx + cw] = patch
        base.append(a)
        moved.append(b)
    expected = np.roll(stack(_frames(base), vector).values, (ty, tx), axis=(0, 1))
    assert np.array_equal(stack(_frames(moved), vector).values, expected)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(2, 9),
    shape=st.tuples(st.integers(1, 20), st.integers(1, 20)),
)
def test_zero_vector_is_plain_sum(seed, n, shape):
    rng = np.random.default_rng(seed)
    grids = [rng.integers(0, 7, size=shape) for _ in range(n)]
    image = stack(_frames(grids), TrialVector(vx=0.0, vy=0.0))
    assert np.array_equal(image.values, np.sum(grids, axis=0))


@settings(max_examples=40, deadline=None)
@given(
    index=st.integers(0, len(POOL) - 1),
    n=st.integers(8, 16),
    amplitude=st.integers(1, 5),
    newest=st.tuples(st.integers(16, 24), st.integers(16, 24)),
)
def test_true_vector_maximises_stacked_peak(index, n, amplitude, newest):
    truth = POOL.vectors[index]
    px, py = newest
    grids = []
    for i in range(n):
        dx, dy = frame_shift(truth, n - 1 - i)
        grid = np.zeros((41, 41), dtype=np.int64)
        grid[py - dy, px - dx] = amplitude
        grids.append(grid)
    images = stack_all(_frames(grids), POOL)
    peaks = [int(img.values.max()) for img in images]
    assert peaks[index] == amplitude * n
    best = images[int(np.argmax(peaks))].vector
    assert best.distance(truth) <= POOL.lattice_spacing * (1 + 1e-9)


def test_stack_never_creates_counts(noise_frames, monkeypatch):
    real = stacking._add_shifted

    def doubled(out, grid, dx, dy):
        real(out, grid, dx, dy)
        real(out, grid, dx, dy)

    monkeypatch.setattr(stacking, "_add_shifted", doubled)
    with pytest.raises(InvariantViolation, match="exceeds input total"):
        stack(noise_frames(3), TrialVector(vx=0.0, vy=0.0))
