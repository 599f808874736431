import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from depthtrack.depthio import (CameraRig, DepthFrame, ImagePlanePoint, distort, image_plane_to_pixel,
                                load_camera_rig, load_depth_frame, pixel_to_image_plane, pixels_to_image_plane,
                                save_camera_rig, save_depth_frame)
from depthtrack.errors import (InvalidConfigError, MalformedHeaderError, MissingFieldError, NonRigidTransformError,
                               TruncatedPayloadError, UndistortionError, UnsupportedBitDepthError)

from oracles import undistort_fixed_point


def _rig_doc(**over):
    doc = {"width": 488, "height": 450, "fx": 300.0, "fy": 300.0, "cx": 243.5, "cy": 224.5,
           "k1": 0.0, "k2": 0.0, "cam_to_world": np.eye(4).ravel().tolist()}
    doc.update(over)
    return doc


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return path


def test_pgm_4x3_all_500(tmp_path):
    p = tmp_path / "f.pgm"
    p.write_bytes(b"P5\n4 3\n65535\n" + np.full((3, 4), 500, dtype=">u2").tobytes())
    f = load_depth_frame(p)
    assert (f.width, f.height) == (4, 3)
    assert f.depths.tolist() == [[500] * 4] * 3


def test_pgm_header_comments_are_skipped(tmp_path):
    p = tmp_path / "f.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n# max\n65535\n" + np.array([[1, 65535]], dtype=">u2").tobytes())
    assert load_depth_frame(p).depths.tolist() == [[1, 65535]]


def test_pgm_8bit_rejected(tmp_path):
    p = tmp_path / "f.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes(4))
    with pytest.raises(UnsupportedBitDepthError):
        load_depth_frame(p)


def test_pgm_truncated(tmp_path):
    p = tmp_path / "f.pgm"
    p.write_bytes(b"P5\n4 4\n65535\n" + bytes(10))
    with pytest.raises(TruncatedPayloadError):
        load_depth_frame(p)


@pytest.mark.parametrize("blob", [b"P2\n1 1\n65535\n0", b"P5\n4\n", b"P5\nx 1\n65535\n\0\0", b"P5\n0 3\n65535\n"])
def test_pgm_malformed(tmp_path, blob):
    p = tmp_path / "f.pgm"
    p.write_bytes(blob)
    with pytest.raises(MalformedHeaderError):
        load_depth_frame(p)


def test_pgm_errors_are_distinct():
    codes = {UnsupportedBitDepthError.code, TruncatedPayloadError.code, MalformedHeaderError.code}
    assert len(codes) == 3


@given(arrays(np.uint16, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_pgm_round_trip(tmp_path_factory, depths):
    p = tmp_path_factory.mktemp("rt") / "f.pgm"
    f = DepthFrame(depths)
    save_depth_frame(f, p)
    assert load_depth_frame(p) == f


def test_pgm_zero_and_max_frames(tmp_path):
    z = DepthFrame.zeros(488, 450)
    save_depth_frame(z, tmp_path / "z.pgm")
    back = load_depth_frame(tmp_path / "z.pgm")
    assert back.depths.shape == (450, 488) and not back.depths.any()
    m = DepthFrame(np.array([[65535, 0]], dtype=np.uint16))
    save_depth_frame(m, tmp_path / "m.pgm")
    assert load_depth_frame(tmp_path / "m.pgm").depths[0, 0] == 65535


def test_frame_is_immutable_and_validated():
    f = DepthFrame(np.ones((2, 2), dtype=np.uint16))
    with pytest.raises(ValueError):
        f.depths[0, 0] = 3
    with pytest.raises(InvalidConfigError):
        DepthFrame(np.ones((2, 2)) * 1.5)
    with pytest.raises(InvalidConfigError):
        DepthFrame(np.zeros((0, 3), dtype=np.uint16))
    with pytest.raises(InvalidConfigError):
        DepthFrame(np.array([[70000]]))


def test_rig_identity(tmp_path):
    rig = load_camera_rig(_write(tmp_path / "r.json", _rig_doc()))
    assert np.array_equal(rig.cam_to_world, np.eye(4))
    assert not rig.has_distortion


def test_rig_scaled_rotation_rejected(tmp_path):
    m = np.eye(4)
    m[:3, :3] *= 2
    with pytest.raises(NonRigidTransformError):
        load_camera_rig(_write(tmp_path / "r.json", _rig_doc(cam_to_world=m.ravel().tolist())))


def test_rig_reflection_rejected(tmp_path):
    m = np.diag([1.0, 1.0, -1.0, 1.0])
    with pytest.raises(NonRigidTransformError):
        load_camera_rig(_write(tmp_path / "r.json", _rig_doc(cam_to_world=m.ravel().tolist())))


def test_rig_missing_field(tmp_path):
    doc = _rig_doc()
    del doc["fx"]
    with pytest.raises(MissingFieldError):
        load_camera_rig(_write(tmp_path / "r.json", doc))


@given(st.floats(-1e-6, 1e-6), st.floats(2e-6, 1e-3))
def test_rig_orthonormality_tolerance(ok_eps, bad_eps):
    m = np.eye(4)
    m[0, 1] = ok_eps
    CameraRig(4, 4, 1, 1, 0, 0, cam_to_world=m)  # |R^T R - I| ~ eps <= 1e-6
    m[0, 1] = bad_eps
    with pytest.raises(NonRigidTransformError):
        CameraRig(4, 4, 1, 1, 0, 0, cam_to_world=m)


def test_accepted_rig_is_orthonormal_to_1e9():
    m = np.eye(4)
    m[0, 1] = 9e-7
    rig = CameraRig(4, 4, 1, 1, 0, 0, cam_to_world=m)
    r = rig.cam_to_world[:3, :3]
    assert np.abs(r.T @ r - np.eye(3)).max() <= 1e-9
    assert np.linalg.det(r) > 0


def test_rig_save_load(tmp_path, rig):
    save_camera_rig(rig, tmp_path / "r.json")
    assert load_camera_rig(tmp_path / "r.json") == rig
    assert set(json.loads((tmp_path / "r.json").read_text())) == {
        "width", "height", "fx", "fy", "cx", "cy", "k1", "k2", "cam_to_world"}


def test_rig_bad_intrinsics():
    with pytest.raises(InvalidConfigError):
        CameraRig(4, 4, 0.0, 1, 0, 0)


def test_principal_point_maps_to_axis(rig):
    assert pixel_to_image_plane(rig, rig.cx, rig.cy) == ImagePlanePoint(0.0, 0.0, -1.0)


def test_unit_intrinsics():
    r = CameraRig(4, 4, 1, 1, 0, 0)
    p = pixel_to_image_plane(r, 1, 0)
    assert (p.U, p.V, p.W) == (1.0, 0.0, -1.0)


@given(st.floats(0, 487), st.floats(0, 449))
def test_zero_distortion_is_affine(u, v):
    r = CameraRig(488, 450, 301.0, 299.0, 243.5, 224.5)
    p = pixel_to_image_plane(r, u, v)
    assert p.U == (u - 243.5) / 301.0 and p.V == (v - 224.5) / 299.0


def test_k1_matches_fixed_point_oracle():
    r = CameraRig(488, 450, 300, 300, 243.5, 224.5, k1=0.1)
    u, v = 400.0, 50.0
    got = pixel_to_image_plane(r, u, v)
    ref = undistort_fixed_point((u - r.cx) / r.fx, (v - r.cy) / r.fy, 0.1, 0.0)
    assert got.U == pytest.approx(ref[0], abs=1e-12)
    assert got.V == pytest.approx(ref[1], abs=1e-12)
    back = image_plane_to_pixel(r, got.U, got.V)
    assert back[0] == pytest.approx(u, abs=1e-7) and back[1] == pytest.approx(v, abs=1e-7)


@given(st.floats(-0.3, 0.3), st.floats(-0.1, 0.1), st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_distortion_round_trip(k1, k2, xd, yd):
    r = CameraRig(10, 10, 1, 1, 0, 0, k1=k1, k2=k2)
    try:
        U, V = pixels_to_image_plane(r, xd, yd)
    except UndistortionError:
        return  # no undistorted preimage near the input for this (k1, k2)
    fx, fy = distort(U, V, k1, k2)
    assert abs(fx - xd) <= 1e-9 and abs(fy - yd) <= 1e-9


def test_pathological_distortion_raises():
    r = CameraRig(10, 10, 1, 1, 0, 0, k1=-5.0, k2=0.0)
    with pytest.raises(UndistortionError):
        pixels_to_image_plane(r, 0.9, 0.9)
