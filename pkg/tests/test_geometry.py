import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from depthtrack.depthio import CameraRig, ImagePlanePoint
from depthtrack.errors import DegenerateGeometryError, NonPositiveDepthError
from depthtrack.geometry import (CameraPoint, estimate_pose_size, project, to_world, transform_points, unproject,
                                 unproject_many)
from depthtrack.synthcam import look_at

finite = st.floats(-50, 50, allow_nan=False)


def test_optical_axis():
    assert unproject(ImagePlanePoint(0.0, 0.0), 500.0) == CameraPoint(0.0, 0.0, 500.0)


def test_unit_U_substitution():
    p = unproject(ImagePlanePoint(1.0, 0.0), 100.0 * math.sqrt(2.0))
    assert p.x == pytest.approx(-100.0, rel=1e-12)
    assert p.y == 0.0
    assert p.z == pytest.approx(100.0, rel=1e-12)
    assert math.hypot(*p) == pytest.approx(100.0 * math.sqrt(2.0), rel=1e-12)


def test_norm_preserved_on_10k_inputs():
    rng = np.random.default_rng(1)
    U = rng.uniform(-3, 3, 10_000)
    V = rng.uniform(-3, 3, 10_000)
    d = rng.uniform(1, 65535, 10_000)
    pts = unproject_many(U, V, d)
    assert np.all(np.abs(np.linalg.norm(pts, axis=1) - d) <= 1e-9 * d)


@given(finite, finite, st.floats(1e-3, 1e5))
def test_norm_preserved_property(U, V, d):
    p = unproject(ImagePlanePoint(U, V), d)
    assert abs(math.sqrt(p.x ** 2 + p.y ** 2 + p.z ** 2) - d) <= 1e-9 * d


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(1, 5000))
def test_projection_round_trip(U, V, d):
    rig = CameraRig(10, 10, 1.0, 1.0, 0.0, 0.0)
    p = unproject(ImagePlanePoint(U, V), d)
    u, v = project(rig, p)
    assert u == pytest.approx(U, abs=1e-9) and v == pytest.approx(V, abs=1e-9)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_nonpositive_depth(d):
    with pytest.raises(NonPositiveDepthError):
        unproject(ImagePlanePoint(0.0, 0.0), d)


def test_to_world_identity_and_translation():
    rig = CameraRig(4, 4, 1, 1, 0, 0)
    assert to_world(rig, (1.5, -2.0, 7.0)) == (1.5, -2.0, 7.0)
    m = np.eye(4)
    m[:3, 3] = (10, 20, 30)
    assert to_world(rig.with_pose(m), (0, 0, 500)) == (10, 20, 530)


def _random_rigid(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    r = np.array([[1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                  [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                  [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)]])
    m = np.eye(4)
    m[:3, :3] = r
    m[:3, 3] = rng.uniform(-1000, 1000, 3)
    return m


@given(st.integers(0, 2 ** 32 - 1))
def test_rigid_transform_preserves_distances(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-500, 500, (4, 3))
    rig = CameraRig(4, 4, 1, 1, 0, 0, cam_to_world=_random_rigid(rng))
    out = np.array([to_world(rig, p) for p in pts])
    for i in range(4):
        for j in range(i + 1, 4):
            a = np.linalg.norm(pts[i] - pts[j])
            assert np.linalg.norm(out[i] - out[j]) == pytest.approx(a, rel=1e-9)


SQUARE = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)


def test_unit_square_pose():
    pose = estimate_pose_size(SQUARE)
    assert pose.center == pytest.approx((0.5, 0.5, 0.0))
    assert abs(pose.normal[2]) == pytest.approx(1.0)
    assert pose.extents == pytest.approx((1.0, 1.0))
    assert pose.rms_planarity == pytest.approx(0.0, abs=1e-15)


def test_translated_square():
    t = np.array([3.0, -7.0, 11.0])
    a = estimate_pose_size(SQUARE)
    b = estimate_pose_size(SQUARE + t)
    assert np.allclose(np.array(b.center) - np.array(a.center), t)
    assert np.allclose(b.normal, a.normal) and b.extents == pytest.approx(a.extents)


@pytest.mark.parametrize("pts", [
    [[0, 0, 0], [1, 1, 1], [2, 2, 2], [3, 3, 3]],
    [[0, 0, 0], [0, 0, 0], [1, 0, 0], [0, 1, 0]],
    [[1, 2, 3]] * 4,
])
def test_degenerate_corners(pts):
    with pytest.raises(DegenerateGeometryError):
        estimate_pose_size(np.array(pts, dtype=float))


@given(st.integers(0, 2 ** 32 - 1))
def test_pose_equivariance(seed):
    rng = np.random.default_rng(seed)
    quad = np.array([[-150, 120, 0], [150, 120, 0], [150, -120, 0], [-150, -120, 0]], dtype=float)
    quad += rng.normal(scale=2.0, size=quad.shape)
    m = _random_rigid(rng)
    a = estimate_pose_size(quad)
    b = estimate_pose_size(transform_points(m, quad))
    assert np.allclose(transform_points(m, np.array(a.center))[0], b.center, atol=1e-9 * 1000)
    assert np.allclose(m[:3, :3] @ np.array(a.normal), b.normal, atol=1e-9)
    assert b.edge_u == pytest.approx(a.edge_u, rel=1e-9)
    assert b.edge_v == pytest.approx(a.edge_v, rel=1e-9)
    assert b.rms_planarity == pytest.approx(a.rms_planarity, rel=1e-9, abs=1e-9)


def test_normal_is_unit_and_faces_counter_clockwise_viewer():
    pose = estimate_pose_size(SQUARE * 100)
    assert np.linalg.norm(pose.normal) == pytest.approx(1.0, abs=1e-12)
    assert pose.normal[2] > 0
    assert estimate_pose_size(SQUARE[::-1] * 100).normal[2] < 0


def test_look_at_axes():
    m = look_at([0, 0, -500], [0, 0, 0])
    assert np.allclose(m[:3, 2], [0, 0, 1])
    assert np.allclose(m[:3, 1], [0, 1, 0])
    assert np.linalg.det(m[:3, :3]) == pytest.approx(1.0)
