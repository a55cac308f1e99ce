import sys
import os

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

import numpy as np
import pytest

from stackcnn.schemas.events import EventStream, SensorGeometryHeader, SimilFrame
from stackcnn.schemas.scene import SceneConfig, SourceSpec


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte-Carlo acceptance runs (skipped unless --run-slow)")


@pytest.fixture
def small_header():
    return SensorGeometryHeader(width=4, height=3, duration=1000)


@pytest.fixture
def small_stream():
    return EventStream(
        t=[0, 5, 5, 120, 999],
        x=[0, 1, 3, 2, 0],
        y=[0, 2, 1, 1, 2],
        p=[1, -1, 1, 1, -1],
    )


@pytest.fixture
def noise_frames():
    def make(count, shape=(20, 24), mean=3.0, seed=0, dt=1000):
        rng = np.random.default_rng(seed)
        return [
            SimilFrame(counts=rng.poisson(mean, size=shape), t_start=k * dt, dt=dt) for k in range(count)
        ]

    return make


@pytest.fixture
def moving_scene():
    """Bright source crossing a 40x30 sensor at +1 px/frame along x (dt = 10 ms)."""
    return SceneConfig(
        width=40,
        height=30,
        duration=160_000,
        background_rate=200.0,
        rng_seed=7,
        dt=10_000,
        sources=[
            SourceSpec(
                start_position=(9.5, 15.0),
                velocity=(100.0, 0.0),
                event_rate=3000.0,
                t_exit=160_000,
            )
        ],
    )


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="also run the slow acceptance studies")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
