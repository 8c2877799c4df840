import numpy as np
import pytest
from hypothesis import settings

from semslam.geometry import CameraIntrinsics, Pose, nearest_rotation

settings.register_profile("repo", max_examples=60, deadline=None)
settings.load_profile("repo")


@pytest.fixture
def intr():
    return CameraIntrinsics(718.0, 320.0, 240.0)


def random_rotation(rng):
    return nearest_rotation(rng.normal(size=(3, 3)))


def random_pose(rng, scale=5.0):
    return Pose(random_rotation(rng), rng.uniform(-scale, scale, 3))


@pytest.fixture(scope="session")
def small_world():
    from semslam.simulator import SimConfig, generate_world

    return generate_world(SimConfig(n_frames=120, n_cars=6), seed=4)
