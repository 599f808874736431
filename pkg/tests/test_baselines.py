import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial import cKDTree

from depthtrack.baselines import (PointCloud, depth_to_point_cloud, evaluate_baselines, fit_rigid,
                                  icp_point_to_point, nearest_neighbors, plate_model_cloud, ransac_plane)
from depthtrack.depthio import DepthFrame
from depthtrack.errors import DegenerateCorrespondenceError, InvalidConfigError, NoPlaneError
from depthtrack.synthcam import NoiseSpec, SceneSpec, look_at, orbit_trajectory, render_scene

from oracles import brute_nearest


def _rot(axis, deg):
    a = np.radians(deg)
    axis = np.asarray(axis, float) / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    m = np.eye(4)
    m[:3, :3] = np.eye(3) + np.sin(a) * k + (1 - np.cos(a)) * k @ k
    return m


def test_cloud_has_one_point_per_nonzero_pixel(clean_scene):
    frame, _, rig = clean_scene
    cloud = depth_to_point_cloud(frame, rig)
    assert len(cloud) == np.count_nonzero(frame.depths)
    assert np.array_equal(frame.depths[cloud.pixels[:, 1], cloud.pixels[:, 0]] != 0, np.ones(len(cloud), bool))


def test_principal_point_pixel_on_axis(rig):
    d = np.zeros((rig.height, rig.width), np.uint16)
    d[224, 243] = 500
    cloud = depth_to_point_cloud(DepthFrame(d), rig.with_pose(np.eye(4)))
    # principal point is at (243.5, 224.5); the nearest pixel is half a pixel off axis
    assert cloud.points[0, 2] == pytest.approx(500, abs=0.01)
    assert np.linalg.norm(cloud.points[0]) == pytest.approx(500)


def test_fronto_parallel_cloud_is_planar(rig):
    spec = SceneSpec(arm_enabled=False)
    r = rig.with_pose(look_at((0, 0, 500), (0, 0, 0)))
    frame, _ = render_scene(spec, r)
    pts = depth_to_point_cloud(frame, r).points
    assert np.abs(pts[:, 2] - 500).max() < 1.5


def test_nearest_neighbors_match_brute_force():
    rng = np.random.default_rng(4)
    target = rng.normal(size=(1500, 3)) * 50
    query = rng.normal(size=(300, 3)) * 50
    dist, idx = nearest_neighbors(query, cKDTree(target))
    bidx, bdist = brute_nearest(query, target)
    assert np.array_equal(idx, bidx)
    assert np.allclose(dist, bdist)


def test_fit_rigid_recovers_transform():
    rng = np.random.default_rng(0)
    src = rng.normal(size=(50, 3))
    t = _rot([1, 2, 3], 20)
    t[:3, 3] = [4, -5, 6]
    dst = src @ t[:3, :3].T + t[:3, 3]
    assert np.allclose(fit_rigid(src, dst), t)


def test_fit_rigid_collinear_is_degenerate():
    src = np.outer(np.arange(5.0), [1, 0, 0])
    with pytest.raises(DegenerateCorrespondenceError):
        fit_rigid(src, src)


def test_icp_identity_converges_immediately():
    cloud = plate_model_cloud(SceneSpec(), 2000)
    res = icp_point_to_point(cloud, cloud)
    assert res.rms == 0 and res.iterations == 0
    assert np.allclose(res.transform, np.eye(4))


def test_icp_recovers_small_translation():
    rng = np.random.default_rng(1)
    model = PointCloud(rng.uniform(-100, 100, (2000, 3)))
    shift = np.eye(4)
    shift[:3, 3] = [5, 0, 0]
    target = PointCloud(model.points + [5, 0, 0])
    res = icp_point_to_point(model, target)
    assert np.allclose(res.transform, shift, atol=1e-6)


@given(st.integers(0, 10_000), st.floats(0, 10), st.floats(0, 10))
def test_icp_rms_non_increasing(seed, deg, shift):
    rng = np.random.default_rng(seed)
    model = PointCloud(rng.uniform(-50, 50, (300, 3)))
    t = _rot(rng.normal(size=3), deg)
    t[:3, 3] = rng.normal(size=3) * shift
    target = PointCloud(model.points @ t[:3, :3].T + t[:3, 3] + rng.normal(size=(300, 3)))
    hist = icp_point_to_point(model, target, max_iters=30).history
    assert all(b <= a * (1 + 1e-9) + 1e-9 for a, b in zip(hist, hist[1:]))


def test_plate_model_grid():
    cloud = plate_model_cloud(SceneSpec(), 10_000)
    assert abs(len(cloud) - 10_000) < 200
    assert np.allclose(cloud.points.min(axis=0), [-150, -120, 0])
    assert np.allclose(cloud.points.max(axis=0), [150, 120, 0])


def _plane_points(n, rng):
    xy = rng.uniform(-100, 100, (n, 2))
    return np.column_stack([xy, 0.2 * xy[:, 0] - 0.1 * xy[:, 1] + 500])


def test_ransac_single_plane_all_inliers():
    pts = _plane_points(500, np.random.default_rng(0))
    plane, mask = ransac_plane(PointCloud(pts), inlier_threshold=1.0, iterations=50)
    assert mask.all()
    assert np.abs(plane.distances(pts)).max() < 1e-6


def test_ransac_with_outliers_recovers_normal():
    rng = np.random.default_rng(5)
    pts = _plane_points(900, rng) + rng.normal(scale=0.5, size=(900, 3)) * [0, 0, 1]
    outliers = rng.uniform([-100, -100, 300], [100, 100, 700], (100, 3))
    plane, mask = ransac_plane(PointCloud(np.vstack([pts, outliers])), 2.0, 200, seed=3)
    true_n = np.array([0.2, -0.1, -1.0]) / np.linalg.norm([0.2, -0.1, -1.0])
    ang = np.degrees(np.arccos(min(1.0, abs(float(np.dot(plane.normal, true_n))))))
    assert ang < 1.0
    assert mask[:900].mean() > 0.95


def test_ransac_is_seed_deterministic():
    rng = np.random.default_rng(8)
    cloud = PointCloud(np.vstack([_plane_points(300, rng), rng.uniform(-100, 600, (200, 3))]))
    a = ransac_plane(cloud, 5.0, 40, seed=9)
    b = ransac_plane(cloud, 5.0, 40, seed=9)
    assert a[0] == b[0] and np.array_equal(a[1], b[1])


def test_ransac_degenerate_inputs():
    with pytest.raises(NoPlaneError):
        ransac_plane(PointCloud(np.zeros((2, 3))))
    line = PointCloud(np.outer(np.arange(20.0), [1, 2, 3]))
    with pytest.raises(NoPlaneError):
        ransac_plane(line, iterations=30)
    with pytest.raises(InvalidConfigError):
        ransac_plane(PointCloud(np.eye(3)), inlier_threshold=0)


def test_evaluate_baselines_rows(spec, rig):
    poses = orbit_trajectory(spec, 2, 450.0, 650.0)
    rigs = [rig.with_pose(p) for p in poses]
    pairs = [render_scene(spec, r, NoiseSpec(1.0, 1.0, 0.0, k)) for k, r in enumerate(rigs)]
    frames = [p[0] for p in pairs] + [DepthFrame.zeros(rig.width, rig.height)]
    truths = [p[1] for p in pairs] + [pairs[0][1]]
    rows = evaluate_baselines(frames, truths, rigs + [rigs[0]], spec, ransac_iterations=50)
    assert len(rows) == 9
    ok = [r for r in rows if r.error_code == "ok"]
    for r in ok:
        if r.accuracy_kind == "dice":
            assert 0.9 <= r.accuracy_value <= 1
        else:
            assert r.accuracy_value < 5
    assert {r.method: r.error_code for r in rows[6:]} == {
        "icp": "icp-degenerate", "ransac": "ransac-no-plane", "tracker": "empty-frame"}


def test_evaluate_baselines_rejects_unknown_method(spec, rig):
    with pytest.raises(InvalidConfigError):
        evaluate_baselines([], [], rig, spec, methods=("lidar",))
