import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from depthtrack.synthcam import NoiseSpec, SceneSpec, default_rig, orbit_pose, render_scene

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def rig():
    return default_rig()


@pytest.fixture(scope="session")
def spec():
    return SceneSpec()


@pytest.fixture(scope="session")
def clean_scene(spec, rig):
    """One zero-noise frame of the 300 x 240 plate, seen from 500 mm, slightly above."""
    r = rig.with_pose(orbit_pose(spec, 500.0, 10.0, 8.0))
    frame, truth = render_scene(spec, r, NoiseSpec())
    return frame, truth, r


def block_mask(shape, *blocks):
    m = np.zeros(shape, dtype=bool)
    for r0, r1, c0, c1 in blocks:
        m[r0:r1, c0:c1] = True
    return m


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
