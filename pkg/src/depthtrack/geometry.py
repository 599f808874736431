"""Image plane -> camera -> world, and plane pose/size from four corners."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .depthio import CameraRig, ImagePlanePoint, image_plane_to_pixel
from .errors import DegenerateGeometryError, NonPositiveDepthError


class CameraPoint(NamedTuple):
    x: float
    y: float
    z: float


class WorldPoint(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class PlanePose:
    center: WorldPoint
    normal: tuple[float, float, float]
    edge_u: float
    edge_v: float
    rms_planarity: float

    @property
    def extents(self) -> tuple[float, float]:
        return self.edge_u, self.edge_v


def unproject(p: ImagePlanePoint, depth: float) -> CameraPoint:
    """Scale the reversed image-plane ray to length ``depth``.

    ``depth`` is the range from the aperture, so the result has norm ``depth``.
    """
    if not depth > 0:
        raise NonPositiveDepthError(f"depth must be positive, got {depth}")
    scale = depth / np.sqrt(p.U * p.U + p.V * p.V + p.W * p.W)
    return CameraPoint(-p.U * scale, -p.V * scale, -p.W * scale)


def unproject_many(U, V, depth) -> np.ndarray:
    """Vectorized :func:`unproject`; returns an ``(n, 3)`` array. Depths must be positive."""
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth <= 0):
        raise NonPositiveDepthError("all depths must be positive")
    scale = depth / np.sqrt(U * U + V * V + 1.0)
    return np.stack([-U * scale, -V * scale, scale], axis=-1)


def to_world(rig: CameraRig, p) -> WorldPoint:
    h = rig.cam_to_world @ np.array([p[0], p[1], p[2], 1.0])
    return WorldPoint(*(h[:3] / h[3]))


def transform_points(matrix: np.ndarray, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    return pts @ matrix[:3, :3].T + matrix[:3, 3]


def project(rig: CameraRig, p) -> tuple[float, float]:
    """Camera-frame point -> fractional pixel, the inverse of unprojection."""
    x, y, z = (float(c) for c in p)
    if z <= 0:
        raise DegenerateGeometryError("point is behind the camera")
    u, v = image_plane_to_pixel(rig, -x / z, -y / z)
    return float(u), float(v)


def project_many(rig: CameraRig, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    u, v = image_plane_to_pixel(rig, -pts[:, 0] / pts[:, 2], -pts[:, 1] / pts[:, 2])
    return np.stack([u, v], axis=-1)


def world_to_pixels(rig: CameraRig, world_pts) -> np.ndarray:
    return project_many(rig, transform_points(rig.world_to_cam, world_pts))


def estimate_pose_size(corners: Sequence) -> PlanePose:
    """Centroid, least-squares normal and mean opposite-side extents of a quad.

    Corners must be in boundary order so that sides (0-1, 2-3) and
    (1-2, 3-0) are the opposite pairs. The normal is oriented so that the
    corner order is counter-clockwise when viewed from its tip.
    """
    pts = np.asarray(corners, dtype=np.float64)
    if pts.shape != (4, 3):
        raise DegenerateGeometryError(f"expected 4 corners of 3 coordinates, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateGeometryError("corners contain non-finite values")
    center = pts.mean(axis=0)
    centered = pts - center
    _, s, vt = np.linalg.svd(centered)
    scale = max(s[0], 1e-300)
    if s[1] <= 1e-9 * scale or s[0] == 0:
        raise DegenerateGeometryError("corners are collinear or coincident")
    for i in range(4):
        for j in range(i + 1, 4):
            if np.linalg.norm(pts[i] - pts[j]) <= 1e-9 * scale:
                raise DegenerateGeometryError("duplicate corners")
    normal = vt[2]
    winding = np.cross(pts[1] - pts[0], pts[2] - pts[1]) + np.cross(pts[3] - pts[2], pts[0] - pts[3])
    if np.dot(normal, winding) < 0:
        normal = -normal
    residual = centered @ normal
    flat = pts - np.outer(residual, normal)

    def side(a, b):
        return float(np.linalg.norm(flat[b] - flat[a]))

    edge_u = 0.5 * (side(0, 1) + side(2, 3))
    edge_v = 0.5 * (side(1, 2) + side(3, 0))
    rms = float(np.sqrt(np.mean(residual ** 2)))
    return PlanePose(WorldPoint(*center), tuple(float(c) for c in normal), edge_u, edge_v, rms)
