import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stackcnn.schemas.events import EventStream, PolarityPolicy, SensorGeometryHeader, SimilFrame
from stackcnn.services.frames import SimilFrameBuilder, build_simil_frames, downsample, frame_count
from stackcnn.utils.errors import ConfigError, EventFormatError

DT = 100


def test_half_open_windows():
    events = EventStream(t=[0, DT - 1, DT], x=[3, 3, 3], y=[4, 4, 4], p=[1, 1, 1])
    frames = build_simil_frames(events, SensorGeometryHeader(width=8, height=6), DT)
    assert len(frames) == 2
    assert frames[0].counts[4, 3] == 2
    assert frames[1].counts[4, 3] == 1
    assert frames[1].t_start == DT and frames[1].t_end == 2 * DT


def test_no_events_gives_zero_frames_over_duration():
    frames = build_simil_frames(EventStream.empty(), SensorGeometryHeader(width=5, height=4, duration=3 * DT), DT)
    assert len(frames) == 3
    assert all(f.total == 0 for f in frames)


def test_positive_only_counts_on_events(small_stream, small_header):
    frames = build_simil_frames(small_stream, small_header, DT, PolarityPolicy.positive_only)
    assert sum(f.total for f in frames) == int(np.sum(small_stream.p == 1))


def test_both_polarities_add_one_each(small_stream, small_header):
    frames = build_simil_frames(small_stream, small_header, DT)
    assert sum(f.total for f in frames) == len(small_stream)
    assert len(frames) == frame_count(small_header.duration, DT) == 10


def test_zero_dt_rejected(small_stream, small_header):
    with pytest.raises(ConfigError):
        build_simil_frames(small_stream, small_header, 0)


def test_unsorted_events_rejected(small_header):
    events = EventStream(t=[5, 1], x=[0, 0], y=[0, 0], p=[1, 1])
    with pytest.raises(EventFormatError):
        build_simil_frames(events, small_header, DT)


def _random_stream(seed, count=400, width=9, height=7, span=2_000):
    rng = np.random.default_rng(seed)
    return EventStream(
        t=np.sort(rng.integers(0, span, size=count)),
        x=rng.integers(0, width, size=count),
        y=rng.integers(0, height, size=count),
        p=rng.choice(np.array([1, -1]), size=count),
    )


@pytest.mark.parametrize("policy", list(PolarityPolicy))
@pytest.mark.parametrize("chunk", [1, 7, 64, 1000])
def test_builder_matches_batch(policy, chunk):
    events = _random_stream(seed=chunk)
    header = SensorGeometryHeader(width=9, height=7, duration=2_500)
    batch = build_simil_frames(events, header, DT, policy)

    builder = SimilFrameBuilder(9, 7, DT, policy)
    online = []
    for start in range(0, len(events), chunk):
        online.extend(builder.push(events[start : start + chunk]))
    online.extend(builder.finish(header.duration))
    assert online == batch


def test_builder_emits_frame_when_window_closes():
    builder = SimilFrameBuilder(4, 4, DT)
    assert list(builder.push(EventStream(t=[10], x=[1], y=[1], p=[1]))) == []
    emitted = list(builder.push(EventStream(t=[DT], x=[2], y=[2], p=[1])))
    assert len(emitted) == 1
    assert emitted[0].counts[1, 1] == 1


def test_builder_rejects_out_of_order_chunks():
    builder = SimilFrameBuilder(4, 4, DT)
    list(builder.push(EventStream(t=[50], x=[1], y=[1], p=[1])))
    with pytest.raises(EventFormatError):
        list(builder.push(EventStream(t=[40], x=[1], y=[1], p=[1])))


def test_downsample_sensor_to_classifier_grid():
    rng = np.random.default_rng(0)
    frame = SimilFrame(counts=rng.poisson(2.0, size=(180, 240)), t_start=0, dt=DT)
    small = downsample(frame, 3)
    assert small.counts.shape == (60, 80)
    assert small.total == frame.total
    assert not small.padded


def test_downsample_factor_one_is_identity():
    frame = SimilFrame(counts=np.arange(12).reshape(3, 4), t_start=0, dt=DT)
    assert downsample(frame, 1) == frame


@pytest.mark.parametrize("factor", [0, -2])
def test_downsample_rejects_non_positive_factor(factor):
    frame = SimilFrame(counts=np.ones((3, 3)), t_start=0, dt=DT)
    with pytest.raises(ConfigError):
        downsample(frame, factor)


def test_downsample_pads_and_flags():
    frame = SimilFrame(counts=np.ones((4, 5), dtype=np.int64), t_start=0, dt=DT)
    small = downsample(frame, 3)
    assert small.counts.shape == (2, 2)
    assert small.padded
    assert small.counts.tolist() == [[9, 6], [3, 2]]
    assert small.total == frame.total


def test_downsample_matches_block_sums():
    rng = np.random.default_rng(5)
    counts = rng.integers(0, 10, size=(6, 6))
    small = downsample(SimilFrame(counts=counts, t_start=0, dt=DT), 3)
    for by in range(2):
        for bx in range(2):
            assert small.counts[by, bx] == counts[by * 3 : by * 3 + 3, bx * 3 : bx * 3 + 3].sum()


@settings(max_examples=50, deadline=None)
@given(
    ts=st.lists(st.integers(0, 5_000), max_size=80),
    dt=st.integers(1, 700),
)
def test_every_event_lands_in_exactly_one_frame(ts, dt):
    ts.sort()
    events = EventStream(t=ts, x=[0] * len(ts), y=[0] * len(ts), p=[1] * len(ts))
    frames = build_simil_frames(events, SensorGeometryHeader(width=1, height=1), dt)
    assert sum(f.total for f in frames) == len(ts)
    for t in ts:
        assert frames[t // dt].t_start <= t < frames[t // dt].t_end


@pytest.mark.parametrize("x, y", [(4, 0), (0, 3), (4, 2)])
def test_coordinates_outside_header_rejected(small_header, x, y):
    events = EventStream(t=[0, 10], x=[1, x], y=[1, y], p=[1, 1])
    with pytest.raises(EventFormatError, match="outside 4x3 sensor at event 1"):
        build_simil_frames(events, small_header, DT)


def test_builder_rejects_coordinates_outside_sensor():
    builder = SimilFrameBuilder(4, 4, DT)
    with pytest.raises(EventFormatError, match="outside 4x4"):
        list(builder.push(EventStream(t=[10], x=[4], y=[0], p=[1])))
