"""Synthetic depth scenes with exact ground truth.

A rectangular plate is ray cast together with an optional capsule "arm"
holding it from below and optional clutter spheres. Depth is the range
from the aperture along each pixel's ray, the same quantity the tracker
unprojects, rounded half-up to whole millimetres.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .depthio import CameraRig, DepthFrame, check_rigid, load_depth_frame, pixels_to_image_plane, save_depth_frame
from .errors import InvalidConfigError, MissingFieldError, OutOfFrustumError
from .geometry import transform_points, world_to_pixels

NO_RETURN = "no-return"
FAR = "far"
FAR_DEPTH_MM = 1100
DISCONTINUITY_MM = 20.0
BOUNDARY_PX = 3


@dataclass(frozen=True, eq=False)
class SceneSpec:
    """A plate of ``plane_width`` x ``plane_height`` mm centred at ``plane_pose``.

    In plate coordinates x runs along the width, y along the height (up)
    and +z is the front face normal.
    """

    plane_width: float = 300.0
    plane_height: float = 240.0
    plane_pose: np.ndarray = field(default_factory=lambda: np.eye(4))
    arm_enabled: bool = True
    arm_radius: float = 40.0
    background_mode: str = NO_RETURN
    clutter: tuple = ()  # ((cx, cy, cz), radius) world spheres

    def __post_init__(self):
        if not (self.plane_width > 0 and self.plane_height > 0):
            raise InvalidConfigError("plane dimensions must be positive")
        if self.arm_enabled and not self.arm_radius > 0:
            raise InvalidConfigError("arm_radius must be positive when the arm is enabled")
        if self.background_mode not in (NO_RETURN, FAR):
            raise InvalidConfigError(f"background_mode must be {NO_RETURN!r} or {FAR!r}")
        pose = check_rigid(self.plane_pose)
        pose.setflags(write=False)
        object.__setattr__(self, "plane_pose", pose)
        clutter = []
        for item in self.clutter:
            center, radius = item
            if not radius > 0:
                raise InvalidConfigError("clutter sphere radius must be positive")
            clutter.append((tuple(float(c) for c in center), float(radius)))
        object.__setattr__(self, "clutter", tuple(clutter))

    def local_corners(self) -> np.ndarray:
        """Top-left, top-right, bottom-right, bottom-left in plate coordinates."""
        w, h = self.plane_width / 2.0, self.plane_height / 2.0
        return np.array([[-w, h, 0.0], [w, h, 0.0], [w, -h, 0.0], [-w, -h, 0.0]])

    def world_corners(self) -> np.ndarray:
        return transform_points(self.plane_pose, self.local_corners())

    def to_dict(self) -> dict:
        return {
            "plane_width": self.plane_width,
            "plane_height": self.plane_height,
            "plane_pose": [float(x) for x in self.plane_pose.ravel()],
            "arm_enabled": bool(self.arm_enabled),
            "arm_radius": self.arm_radius,
            "background_mode": self.background_mode,
            "clutter": [{"center": list(c), "radius": r} for c, r in self.clutter],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        for key in ("plane_width", "plane_height"):
            if key not in data:
                raise MissingFieldError(f"scene: missing field {key}")
        kwargs = dict(plane_width=float(data["plane_width"]), plane_height=float(data["plane_height"]))
        if "plane_pose" in data:
            kwargs["plane_pose"] = np.asarray(data["plane_pose"], dtype=np.float64).reshape(4, 4)
        for key, kind in (("arm_enabled", bool), ("arm_radius", float), ("background_mode", str)):
            if key in data:
                kwargs[key] = kind(data[key])
        if "clutter" in data:
            kwargs["clutter"] = tuple((tuple(c["center"]), float(c["radius"])) for c in data["clutter"])
        return cls(**kwargs)


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0  # mm
    boundary_sigma_scale: float = 1.0
    dropout_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidConfigError("sigma must be >= 0")
        if not 0 <= self.dropout_prob < 1:
            raise InvalidConfigError("dropout_prob must be in [0, 1)")
        if self.boundary_sigma_scale < 0:
            raise InvalidConfigError("boundary_sigma_scale must be >= 0")

    @property
    def is_zero(self) -> bool:
        return self.sigma == 0 and self.dropout_prob == 0

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "boundary_sigma_scale": self.boundary_sigma_scale,
            "dropout_prob": self.dropout_prob,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseSpec":
        return cls(
            sigma=float(data.get("sigma", 0.0)),
            boundary_sigma_scale=float(data.get("boundary_sigma_scale", 1.0)),
            dropout_prob=float(data.get("dropout_prob", 0.0)),
            seed=int(data.get("seed", 0)),
        )


@dataclass(frozen=True, eq=False)
class SceneTruth:
    world_corners: np.ndarray  # (4, 3) mm, TL TR BR BL
    pixel_corners: np.ndarray  # (4, 2) fractional pixels
    po_mask: np.ndarray  # (H, W) bool, pixels where the plate is the visible surface


def load_scene_spec(path) -> SceneSpec:
    with open(path) as fh:
        return SceneSpec.from_dict(json.load(fh))


def save_scene_spec(spec: SceneSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
        fh.write("\n")


def load_noise_spec(path) -> NoiseSpec:
    with open(path) as fh:
        return NoiseSpec.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# ray casting


@functools.lru_cache(maxsize=8)
def _ray_dirs(width, height, fx, fy, cx, cy, k1, k2):
    rig = CameraRig(width, height, fx, fy, cx, cy, k1, k2)
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    U, V = pixels_to_image_plane(rig, u, v)
    d = np.stack([-U, -V, np.ones_like(U)], axis=-1)
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    d.setflags(write=False)
    return d


def ray_directions(rig: CameraRig) -> np.ndarray:
    """Unit camera-frame ray through each pixel centre, shape ``(H, W, 3)``."""
    return _ray_dirs(rig.width, rig.height, rig.fx, rig.fy, rig.cx, rig.cy, rig.k1, rig.k2)


def _hit_plane(dirs, center, ex, ey, normal, half_w, half_h):
    denom = dirs @ normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(denom) > 1e-12, float(center @ normal) / denom, np.inf)
    p = dirs * t[..., None]
    rel = p - center
    a = rel @ ex
    b = rel @ ey
    ok = (t > 0) & np.isfinite(t) & (np.abs(a) <= half_w) & (np.abs(b) <= half_h)
    return np.where(ok, t, np.inf)


def _hit_sphere(dirs, center, radius):
    # origin at the camera aperture
    b = dirs @ center
    c = float(center @ center) - radius * radius
    h = b * b - c
    with np.errstate(invalid="ignore"):
        s = np.sqrt(h)
    t = np.where(b - s > 0, b - s, b + s)
    return np.where((h >= 0) & (t > 0), t, np.inf)


def _hit_capsule(dirs, a, b, radius):
    ba = b - a
    oa = -a
    baba = float(ba @ ba)
    bard = dirs @ ba
    baoa = float(ba @ oa)
    rdoa = dirs @ oa
    oaoa = float(oa @ oa)
    qa = baba - bard * bard
    qb = baba * rdoa - baoa * bard
    qc = baba * oaoa - baoa * baoa - radius * radius * baba
    h = qb * qb - qa * qc
    with np.errstate(invalid="ignore", divide="ignore"):
        t_body = (-qb - np.sqrt(h)) / qa
    y = baoa + t_body * bard
    body = (h >= 0) & (qa > 1e-12) & (y > 0) & (y < baba) & (t_body > 0)
    t = np.where(body, t_body, np.inf)
    t = np.minimum(t, _hit_sphere(dirs, a, radius))
    t = np.minimum(t, _hit_sphere(dirs, b, radius))
    return t


def _round_half_up(x):
    return np.floor(x + 0.5)


def arm_segment(spec: SceneSpec, rig: CameraRig):
    """Capsule end points (camera frame) of the arm holding the plate from below.

    The arm starts one radius behind the bottom-edge centre and ends just
    below the bottom of the image at 80 % of the start depth.
    """
    plate_to_cam = rig.world_to_cam @ spec.plane_pose
    rot = plate_to_cam[:3, :3]
    center = plate_to_cam[:3, 3]
    normal = rot[:, 2]
    front = normal if float(normal @ -center) > 0 else -normal
    bottom = center - rot[:, 1] * (spec.plane_height / 2.0)
    if bottom[2] <= 0:
        raise OutOfFrustumError("plate bottom edge is behind the camera")
    start = bottom - spec.arm_radius * front
    u_b = rig.cx + rig.fx * (-bottom[0] / bottom[2])
    z_end = 0.8 * start[2]
    v_end = rig.height - 1 + spec.arm_radius * rig.fy / z_end + 5.0
    U = (u_b - rig.cx) / rig.fx
    V = (v_end - rig.cy) / rig.fy
    end = np.array([-U * z_end, -V * z_end, z_end])
    return start, end


def render_scene(spec: SceneSpec, rig: CameraRig, noise: NoiseSpec | None = None):
    """Render one frame and its ground truth. Returns ``(DepthFrame, SceneTruth)``."""
    noise = noise or NoiseSpec()
    dirs = ray_directions(rig)
    plate_to_cam = rig.world_to_cam @ spec.plane_pose
    rot = plate_to_cam[:3, :3]
    center = plate_to_cam[:3, 3]
    t_plane = _hit_plane(dirs, center, rot[:, 0], rot[:, 1], rot[:, 2], spec.plane_width / 2.0,
                         spec.plane_height / 2.0)
    t_other = np.full(t_plane.shape, np.inf)
    if spec.arm_enabled:
        a, b = arm_segment(spec, rig)
        t_other = np.minimum(t_other, _hit_capsule(dirs, a, b, spec.arm_radius))
    for c, r in spec.clutter:
        c_cam = transform_points(rig.world_to_cam, np.asarray(c))[0]
        t_other = np.minimum(t_other, _hit_sphere(dirs, c_cam, r))
    po_mask = np.isfinite(t_plane) & (t_plane <= t_other)
    if not po_mask.any():
        raise OutOfFrustumError("plate is not visible from this pose")
    t = np.minimum(t_plane, t_other)
    hit = np.isfinite(t)
    background = 0 if spec.background_mode == NO_RETURN else FAR_DEPTH_MM
    depth = np.where(hit, np.clip(_round_half_up(np.where(hit, t, 0.0)), 1, 65535), background)
    frame = DepthFrame(depth.astype(np.uint16))

    world = spec.world_corners()
    truth = SceneTruth(world, world_to_pixels(rig, world), po_mask)
    return inject_noise(frame, noise), truth


def boundary_zone(depths: np.ndarray, gap_mm: float = DISCONTINUITY_MM, radius_px: int = BOUNDARY_PX) -> np.ndarray:
    """Pixels within ``radius_px`` (chessboard) of a neighbouring-depth jump above ``gap_mm``."""
    d = depths.astype(np.float64)
    jump = np.zeros(d.shape, dtype=bool)
    dx = np.abs(np.diff(d, axis=1)) > gap_mm
    dy = np.abs(np.diff(d, axis=0)) > gap_mm
    jump[:, 1:] |= dx
    jump[:, :-1] |= dx
    jump[1:, :] |= dy
    jump[:-1, :] |= dy
    return ndimage.maximum_filter(jump.view(np.uint8), size=2 * radius_px + 1, mode="constant").astype(bool)


def inject_noise(frame: DepthFrame, noise: NoiseSpec) -> DepthFrame:
    """Gaussian depth noise (scaled up near discontinuities) and pixel dropout.

    Zero pixels stay zero; perturbed pixels are rounded half-up and clamped
    to ``[1, 65535]``.
    """
    if noise.is_zero:
        return frame
    rng = np.random.default_rng(noise.seed)
    d = frame.depths.astype(np.float64)
    nz = frame.depths != 0
    out = d
    if noise.sigma > 0:
        sig = np.full(d.shape, noise.sigma)
        if noise.boundary_sigma_scale != 1.0:
            sig[boundary_zone(frame.depths)] *= noise.boundary_sigma_scale
        perturbed = np.clip(_round_half_up(d + rng.standard_normal(d.shape) * sig), 1, 65535)
        out = np.where(nz, perturbed, 0.0)
    if noise.dropout_prob > 0:
        out = np.where(rng.random(d.shape) < noise.dropout_prob, 0.0, out)
    return DepthFrame(out.astype(np.uint16))


def render_sequence(spec: SceneSpec, rig: CameraRig, noise: NoiseSpec | None, n: int, trajectory):
    """Render frame ``i`` from pose ``trajectory[i]`` with noise seed ``noise.seed + i``."""
    noise = noise or NoiseSpec()
    trajectory = list(trajectory)
    if n < 1:
        raise InvalidConfigError("need at least one frame")
    if len(trajectory) != n:
        raise InvalidConfigError(f"trajectory has {len(trajectory)} poses for {n} frames")
    return [render_scene(spec, rig.with_pose(pose), replace(noise, seed=noise.seed + i))
            for i, pose in enumerate(trajectory)]


# ---------------------------------------------------------------------------
# camera placement


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Camera-to-world pose for a camera at ``eye`` looking at ``target``.

    Camera axes follow the unprojection convention: +z forward, +y up on
    the image, +x towards image left.
    """
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(up, dtype=np.float64))
    n = np.linalg.norm(right)
    if n < 1e-9:
        raise InvalidConfigError("look_at: up vector is parallel to the viewing direction")
    right /= n
    true_up = np.cross(right, fwd)
    m = np.eye(4)
    m[:3, 0] = -right
    m[:3, 1] = true_up
    m[:3, 2] = fwd
    m[:3, 3] = eye
    return m


def orbit_pose(spec: SceneSpec, distance: float, yaw_deg: float, pitch_deg: float) -> np.ndarray:
    """Camera ``distance`` mm from the plate centre, gazing at it, upright w.r.t. the plate."""
    yaw, pitch = np.radians(yaw_deg), np.radians(pitch_deg)
    local_eye = distance * np.array([np.sin(yaw) * np.cos(pitch), np.sin(pitch), np.cos(yaw) * np.cos(pitch)])
    pose = spec.plane_pose
    eye = transform_points(pose, local_eye)[0]
    return look_at(eye, pose[:3, 3], up=pose[:3, 1])


def static_pose(spec: SceneSpec, distance: float = 500.0, height: float = 142.0) -> np.ndarray:
    """Camera ``distance`` mm in front of the plate and ``height`` mm above its centre, facing it squarely."""
    pose = spec.plane_pose
    eye = transform_points(pose, np.array([0.0, height, distance]))[0]
    return look_at(eye, eye - pose[:3, 2], up=pose[:3, 1])


def orbit_trajectory(spec: SceneSpec, n: int, min_range: float = 300.0, max_range: float = 900.0,
                     max_yaw_deg: float = 25.0, pitch_deg: tuple = (-5.0, 20.0)) -> list:
    """Deterministic scripted walk around the plate.

    Range sweeps quasi-uniformly over ``[min_range, max_range]``; yaw and
    pitch oscillate at incommensurate rates so the views mix distance and
    angle.
    """
    if n < 1:
        raise InvalidConfigError("need at least one pose")
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    lo, hi = pitch_deg
    poses = []
    for i in range(n):
        frac = (0.5 + i * golden) % 1.0
        dist = min_range + (max_range - min_range) * frac
        yaw = max_yaw_deg * np.sin(2.0 * np.pi * (i + 0.5) * 3.0 / max(n, 1))
        pitch = lo + (hi - lo) * 0.5 * (1.0 + np.cos(2.0 * np.pi * (i + 0.5) * 2.0 / max(n, 1)))
        poses.append(orbit_pose(spec, dist, yaw, pitch))
    return poses


# ---------------------------------------------------------------------------
# truth sidecars


def save_truth(truth: SceneTruth, path, mask_path=None) -> None:
    """Write ``path`` (JSON) and the plate mask as a 0/1 PGM beside it."""
    path = Path(path)
    if mask_path is None:
        stem = path.name[: -len(".truth.json")] if path.name.endswith(".truth.json") else path.stem
        mask_path = path.with_name(stem + ".mask.pgm")
    mask_path = Path(mask_path)
    save_depth_frame(DepthFrame(truth.po_mask.astype(np.uint16)), mask_path)
    doc = {
        "world_corners": [float(x) for x in np.asarray(truth.world_corners).ravel()],
        "pixel_corners": [float(x) for x in np.asarray(truth.pixel_corners).ravel()],
        "po_mask_path": mask_path.name if mask_path.parent == path.parent else str(mask_path),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_truth(path) -> SceneTruth:
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("world_corners", "pixel_corners", "po_mask_path"):
        if key not in doc:
            raise MissingFieldError(f"{path}: missing field {key}")
    mask_path = Path(doc["po_mask_path"])
    if not mask_path.is_absolute():
        mask_path = path.parent / mask_path
    mask = load_depth_frame(mask_path).depths != 0
    return SceneTruth(
        np.asarray(doc["world_corners"], dtype=np.float64).reshape(4, 3),
        np.asarray(doc["pixel_corners"], dtype=np.float64).reshape(4, 2),
        mask,
    )


def default_rig(fx: float = 300.0, cam_to_world=None) -> CameraRig:
    """488 x 450 pinhole rig with the principal point at the image centre."""
    return CameraRig(488, 450, fx, fx, 243.5, 224.5, 0.0, 0.0,
                     np.eye(4) if cam_to_world is None else cam_to_world)
