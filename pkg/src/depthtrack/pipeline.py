"""Depth frame to world-space corners: tracker followed by the unprojection chain."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .depthio import CameraRig, DepthFrame, pixels_to_image_plane
from .geometry import PlanePose, estimate_pose_size, transform_points, unproject_many
from .tracker import TrackerConfig, TrackResult, track


@dataclass(frozen=True, eq=False)
class TrackedTarget:
    pixel_corners: np.ndarray  # (4, 2)
    depths: np.ndarray  # (4,) mm
    camera_corners: np.ndarray  # (4, 3) mm
    world_corners: np.ndarray  # (4, 3) mm
    pose: PlanePose
    latency_ms: float
    track: TrackResult = field(repr=False)


def corners_to_world(rig: CameraRig, pixel_corners, depths):
    """Pixel corners + ranges -> camera-frame and world-frame points."""
    pc = np.asarray(pixel_corners, dtype=np.float64).reshape(-1, 2)
    U, V = pixels_to_image_plane(rig, pc[:, 0], pc[:, 1])
    cam = unproject_many(U, V, depths)
    return cam, transform_points(rig.cam_to_world, cam)


def locate(frame: DepthFrame, rig: CameraRig, cfg: TrackerConfig | None = None) -> TrackedTarget:
    """Run the full chain; ``latency_ms`` spans tracker entry to world corners and pose."""
    t0 = time.perf_counter()
    result = track(frame, cfg)
    cam, world = corners_to_world(rig, result.quad.corners, result.quad.depths)
    pose = estimate_pose_size(world)
    latency = (time.perf_counter() - t0) * 1e3
    return TrackedTarget(result.quad.corners, result.quad.depths, cam, world, pose, latency, result)


def warmup(cfg: TrackerConfig | None = None) -> None:
    """Run the chain once on a rendered frame so JIT compilation stays out of timings."""
    from .synthcam import SceneSpec, default_rig, orbit_pose, render_scene

    spec = SceneSpec()
    rig = default_rig(cam_to_world=orbit_pose(spec, 500.0, 0.0, 10.0))
    frame, _ = render_scene(spec, rig)
    locate(frame, rig, cfg)
