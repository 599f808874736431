"""Point-cloud baselines: point-to-point ICP against a plate model, and RANSAC plane segmentation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .depthio import CameraRig, DepthFrame, pixels_to_image_plane
from .errors import DegenerateCorrespondenceError, DepthTrackError, InvalidConfigError, NoPlaneError
from .geometry import transform_points, unproject_many
from .metrics import corner_error, corner_segmentation, dice, truth_segmentation
from .synthcam import SceneSpec

MODEL_POINTS = 10_000


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray  # (n, 3) mm, camera frame
    pixels: np.ndarray | None = None  # (n, 2) integer (u, v) source pixel of each point

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise InvalidConfigError("point cloud has non-finite coordinates")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class PlaneModel:
    normal: tuple[float, float, float]
    offset: float  # plane is normal . x == offset

    def distances(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts) @ np.asarray(self.normal) - self.offset


def depth_to_point_cloud(frame: DepthFrame, rig: CameraRig) -> PointCloud:
    """One camera-frame point per nonzero pixel, unprojected with its range."""
    v, u = np.nonzero(frame.depths)
    if u.size == 0:
        return PointCloud(np.empty((0, 3)), np.empty((0, 2), dtype=np.int64))
    U, V = pixels_to_image_plane(rig, u, v)
    pts = unproject_many(U, V, frame.depths[v, u].astype(np.float64))
    return PointCloud(pts, np.stack([u, v], axis=-1))


# ---------------------------------------------------------------------------
# ICP

def nearest_neighbors(query: np.ndarray, tree: cKDTree):
    dist, idx = tree.query(query, k=1)
    return dist, idx


def fit_rigid(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Least-squares rotation + translation taking ``src`` onto ``dst`` (SVD / Kabsch)."""
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    h = (src - cs).T @ (dst - cd)
    u, s, vt = np.linalg.svd(h)
    if s[0] <= 0 or s[1] <= 1e-12 * s[0]:
        raise DegenerateCorrespondenceError("correspondence covariance has rank < 2")
    d = np.sign(np.linalg.det(vt.T @ u.T)) or 1.0
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    out = np.eye(4)
    out[:3, :3] = rot
    out[:3, 3] = cd - rot @ cs
    return out


@dataclass(frozen=True, eq=False)
class IcpResult:
    transform: np.ndarray  # model -> target frame
    rms: float
    history: tuple = field(default=())  # RMS at each visited transform

    @property
    def iterations(self) -> int:
        return max(len(self.history) - 1, 0)


def icp_point_to_point(model: PointCloud, target: PointCloud, init=None, max_iters: int = 50,
                       tol: float = 1e-4, tree: cKDTree | None = None) -> IcpResult:
    """Classic point-to-point ICP: nearest neighbours, closed-form rigid fit, repeat.

    Stops when the RMS drops by less than ``tol`` mm or after ``max_iters``
    fits. The RMS sequence is checked to be non-increasing on every run.
    """
    if len(model) < 3 or len(target) < 3:
        raise DegenerateCorrespondenceError("ICP needs at least 3 points in each cloud")
    tree = tree or cKDTree(target.points)
    transform = np.eye(4) if init is None else np.asarray(init, dtype=np.float64).copy()
    history = []
    for k in range(max_iters + 1):
        moved = transform_points(transform, model.points)
        dist, idx = nearest_neighbors(moved, tree)
        rms = float(np.sqrt(np.mean(dist * dist)))
        if history and rms > history[-1] * (1.0 + 1e-9) + 1e-9:
            raise RuntimeError(f"ICP RMS increased from {history[-1]} to {rms}")
        history.append(rms)
        if k == max_iters or (k > 0 and history[-2] - rms < tol) or rms == 0.0:
            break
        step = fit_rigid(moved, target.points[idx])
        transform = step @ transform
    return IcpResult(transform, history[-1], tuple(history))


def plate_model_cloud(spec: SceneSpec, n_points: int = MODEL_POINTS) -> PointCloud:
    """Regular grid over the plate face in plate coordinates, edges included."""
    w, h = spec.plane_width, spec.plane_height
    nx = max(int(round(np.sqrt(n_points * w / h))), 2)
    ny = max(int(round(n_points / nx)), 2)
    xs = np.linspace(-w / 2.0, w / 2.0, nx)
    ys = np.linspace(-h / 2.0, h / 2.0, ny)
    gx, gy = np.meshgrid(xs, ys)
    return PointCloud(np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=-1))


# ---------------------------------------------------------------------------
# RANSAC

def _plane_through(p0, p1, p2):
    n = np.cross(p1 - p0, p2 - p0)
    norm = np.linalg.norm(n, axis=-1)
    return n, norm


def fit_plane_lsq(pts: np.ndarray) -> PlaneModel:
    c = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - c, full_matrices=False)
    n = vt[-1]
    return PlaneModel(tuple(float(x) for x in n), float(n @ c))


def ransac_plane(cloud: PointCloud, inlier_threshold: float = 10.0, iterations: int = 200, seed: int = 0):
    """Max-consensus plane over ``iterations`` random 3-point samples, refit by least squares.

    Round ``i`` draws its sample from a generator seeded by ``(seed, i)``,
    so rounds are independent of evaluation order; ties go to the earliest
    round. Returns ``(PlaneModel, inlier mask)``.
    """
    pts = cloud.points
    n = pts.shape[0]
    if n < 3:
        raise NoPlaneError("RANSAC needs at least 3 points")
    if not inlier_threshold > 0:
        raise InvalidConfigError("inlier_threshold must be positive")
    samples = np.stack([np.random.default_rng([seed, i]).choice(n, 3, replace=False) for i in range(iterations)])
    normals, norms = _plane_through(pts[samples[:, 0]], pts[samples[:, 1]], pts[samples[:, 2]])
    scale = np.max(np.abs(pts)) + 1.0
    valid = norms > 1e-9 * scale * scale
    if not valid.any():
        raise NoPlaneError(f"all {iterations} samples were collinear")
    best_i, best_count = -1, -1
    chunk = max(1, 4_000_000 // max(n, 1))
    vidx = np.flatnonzero(valid)
    for s in range(0, vidx.size, chunk):
        rounds = vidx[s:s + chunk]
        nrm = normals[rounds] / norms[rounds, None]
        off = np.einsum("ij,ij->i", nrm, pts[samples[rounds, 0]])
        counts = (np.abs(pts @ nrm.T - off) <= inlier_threshold).sum(axis=0)
        k = int(np.argmax(counts))
        if counts[k] > best_count:
            best_i, best_count = int(rounds[k]), int(counts[k])
    nrm = normals[best_i] / norms[best_i]
    best = PlaneModel(tuple(float(x) for x in nrm), float(nrm @ pts[samples[best_i, 0]]))
    mask = np.abs(best.distances(pts)) <= inlier_threshold
    refit = fit_plane_lsq(pts[mask])
    refit_mask = np.abs(refit.distances(pts)) <= inlier_threshold
    if refit_mask.sum() >= best_count:
        best, mask = refit, refit_mask
    if mask.sum() < best_count:
        raise RuntimeError("RANSAC returned fewer inliers than its best sampled plane")
    return best, mask


# ---------------------------------------------------------------------------
# comparison

@dataclass(frozen=True)
class BaselineRow:
    method: str
    frame: str
    accuracy_value: float
    accuracy_kind: str  # "mm" or "dice"
    elapsed_ms: float
    error_code: str = "ok"
    extra: dict = field(default_factory=dict, compare=False)


def _perturb(transform: np.ndarray, rng: np.random.Generator, angle_deg: float, shift_mm: float) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    a = np.radians(angle_deg)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    rot = np.eye(3) + np.sin(a) * k + (1 - np.cos(a)) * k @ k
    d = rng.normal(size=3)
    d *= shift_mm / np.linalg.norm(d)
    delta = np.eye(4)
    delta[:3, :3] = rot
    delta[:3, 3] = d
    return transform @ delta


def evaluate_icp(frame, truth, rig, spec: SceneSpec, model: PointCloud, init_mode: str = "truth",
                 seed: int = 0, frame_id: str = "", cloud: PointCloud | None = None, **icp_kwargs) -> BaselineRow:
    """Register the plate model to the frame's cloud; score by world corner distance."""
    try:
        cloud = cloud if cloud is not None else depth_to_point_cloud(frame, rig)
        init = rig.world_to_cam @ spec.plane_pose
        if init_mode == "perturbed":
            init = _perturb(init, np.random.default_rng([seed, 1]), 3.0, 15.0)
        elif init_mode != "truth":
            raise InvalidConfigError(f"unknown ICP init mode {init_mode!r}")
        t0 = time.perf_counter()
        res = icp_point_to_point(model, cloud, init, **icp_kwargs)
        elapsed = (time.perf_counter() - t0) * 1e3
    except DepthTrackError as exc:
        return BaselineRow("icp", frame_id, float("nan"), "mm", float("nan"), exc.code)
    cam = transform_points(res.transform, spec.local_corners())
    world = transform_points(rig.cam_to_world, cam)
    _, err = corner_error(world, truth.world_corners)
    return BaselineRow("icp", frame_id, err, "mm", elapsed, "ok",
                       {"rms": res.rms, "iterations": res.iterations, "history": res.history})


def evaluate_ransac(frame, truth, rig, threshold: float = 10.0, iterations: int = 200, seed: int = 0,
                    frame_id: str = "", cloud: PointCloud | None = None) -> BaselineRow:
    """Segment the dominant plane; score by Dice against the plate's points."""
    try:
        cloud = cloud if cloud is not None else depth_to_point_cloud(frame, rig)
        t0 = time.perf_counter()
        plane, inliers = ransac_plane(cloud, threshold, iterations, seed)
        elapsed = (time.perf_counter() - t0) * 1e3
    except DepthTrackError as exc:
        return BaselineRow("ransac", frame_id, float("nan"), "dice", float("nan"), exc.code)
    seg = np.zeros(frame.depths.shape, dtype=bool)
    px = cloud.pixels[inliers]
    seg[px[:, 1], px[:, 0]] = True
    score = dice(seg, truth_segmentation(frame, truth))
    return BaselineRow("ransac", frame_id, score, "dice", elapsed, "ok", {"normal": plane.normal, "offset": plane.offset})


def evaluate_tracker(frame, truth, rig, cfg=None, frame_id: str = "") -> BaselineRow:
    """The tracker's corners turned into a segmentation, scored by Dice like RANSAC."""
    from .pipeline import locate

    try:
        target = locate(frame, rig, cfg)
    except DepthTrackError as exc:
        return BaselineRow("tracker", frame_id, float("nan"), "dice", float("nan"), exc.code)
    score = dice(corner_segmentation(frame, target.pixel_corners), truth_segmentation(frame, truth))
    return BaselineRow("tracker", frame_id, score, "dice", target.latency_ms, "ok")


def evaluate_baselines(frames, truths, rigs, spec: SceneSpec, methods=("icp", "ransac", "tracker"),
                       icp_init: str = "truth", ransac_threshold: float = 10.0, ransac_iterations: int = 200,
                       seed: int = 0, frame_ids=None, cfg=None) -> list[BaselineRow]:
    """Per-frame comparison rows; per-method failures become error codes, never exceptions."""
    frames = list(frames)
    truths = list(truths)
    if len(frames) != len(truths):
        raise InvalidConfigError("frames and truths must pair up")
    rigs = list(rigs) if isinstance(rigs, (list, tuple)) else [rigs] * len(frames)
    ids = list(frame_ids) if frame_ids is not None else [f"{i:04d}" for i in range(len(frames))]
    unknown = set(methods) - {"icp", "ransac", "tracker"}
    if unknown:
        raise InvalidConfigError(f"unknown method(s): {', '.join(sorted(unknown))}")
    model = plate_model_cloud(spec) if "icp" in methods else None
    rows = []
    for i, (frame, truth) in enumerate(zip(frames, truths)):
        cloud = depth_to_point_cloud(frame, rigs[i]) if {"icp", "ransac"} & set(methods) else None
        for m in methods:
            if m == "icp":
                rows.append(evaluate_icp(frame, truth, rigs[i], spec, model, icp_init, seed + i, ids[i], cloud))
            elif m == "ransac":
                rows.append(evaluate_ransac(frame, truth, rigs[i], ransac_threshold, ransac_iterations, seed + i,
                                            ids[i], cloud))
            else:
                rows.append(evaluate_tracker(frame, truth, rigs[i], cfg, ids[i]))
    return rows
