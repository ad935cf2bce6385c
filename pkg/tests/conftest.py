import numpy as np
import pytest

from keysample import Keyframe, Pose


def make_pose(x, y=0.0, z=0.0):
    return Pose([x, y, z])


def make_keyframes(positions, descriptors):
    positions = np.asarray(positions, dtype=float)
    descriptors = np.asarray(descriptors, dtype=float)
    return [
        Keyframe(i, Pose(positions[i]), descriptors[i])
        for i in range(positions.shape[0])
    ]


def random_window(rng, n, m, step_low=0.5, step_high=4.0, dscale=1.0):
    """Random-walk keyframes whose consecutive gaps straddle [1, 5] m.

    Bounding the steps away from zero keeps the arc-length denominators,
    and with them the objective values, well conditioned. `dscale` shrinks
    the descriptors; agreement checks against the pure-Python reference use
    a small scale so eigensolver round-off stays far below the tolerance.
    """
    steps = rng.uniform(step_low, step_high, size=n - 1)
    directions = rng.normal(size=(n - 1, 3))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    positions = np.vstack(
        [np.zeros(3), np.cumsum(steps[:, None] * directions, axis=0)]
    )
    descriptors = rng.normal(size=(n, m)) * dscale
    return make_keyframes(positions, descriptors), positions, descriptors


@pytest.fixture(scope="session")
def seeded_windows():
    """200 random windows shared by the optimizer soundness checks."""
    rng = np.random.default_rng(20240817)
    windows = []
    for _ in range(200):
        n = int(rng.integers(4, 13))
        windows.append(random_window(rng, n, m=8))
    return windows
