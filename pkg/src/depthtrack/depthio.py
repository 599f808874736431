"""Depth frames, camera rigs, and the pixel <-> image-plane mapping.

Frames are stored as 16-bit binary PGM (``P5``, big-endian samples) and rigs
as a small JSON document with the keys listed in :data:`RIG_KEYS`.

Pixel centres sit at integer coordinates: pixel ``(u, v)`` covers
``[u - 0.5, u + 0.5] x [v - 0.5, v + 0.5]``, ``u`` growing to the right and
``v`` growing downwards.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    InvalidConfigError,
    MalformedHeaderError,
    MissingFieldError,
    NonRigidTransformError,
    TruncatedPayloadError,
    UndistortionError,
    UnsupportedBitDepthError,
)

RIG_KEYS = ("width", "height", "fx", "fy", "cx", "cy", "k1", "k2", "cam_to_world")
RIGID_TOL = 1e-6
_NEWTON_MAX_ITERS = 50
_NEWTON_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class DepthFrame:
    """Row-major grid of integer millimetre depths; 0 means "no return"."""

    depths: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.depths)
        if d.ndim != 2 or d.shape[0] == 0 or d.shape[1] == 0:
            raise InvalidConfigError(f"depth grid must be a non-empty 2-D array, got shape {d.shape}")
        if d.dtype != np.uint16:
            if np.issubdtype(d.dtype, np.integer) or np.issubdtype(d.dtype, np.bool_):
                if d.size and (d.min() < 0 or d.max() > 65535):
                    raise InvalidConfigError("depth values must lie in 0..65535")
            else:
                raise InvalidConfigError(f"depths must be integer millimetres, got dtype {d.dtype}")
            d = d.astype(np.uint16)
        else:
            d = d.copy() if d.flags.writeable else d
        d.setflags(write=False)
        object.__setattr__(self, "depths", d)

    @property
    def width(self) -> int:
        return self.depths.shape[1]

    @property
    def height(self) -> int:
        return self.depths.shape[0]

    @classmethod
    def zeros(cls, width: int, height: int) -> "DepthFrame":
        return cls(np.zeros((height, width), dtype=np.uint16))

    def __eq__(self, other):
        if not isinstance(other, DepthFrame):
            return NotImplemented
        return self.depths.shape == other.depths.shape and bool(np.array_equal(self.depths, other.depths))

    __hash__ = None


@dataclass(frozen=True)
class ImagePlanePoint:
    """Undistorted point on the unit-focal image plane; ``W`` is always -1."""

    U: float
    V: float
    W: float = -1.0

    def __post_init__(self):
        if self.W != -1.0:
            raise InvalidConfigError("image-plane points have W = -1")


def _orthonormalize(rot: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(rot)
    r = u @ vt
    if np.linalg.det(r) < 0:  # pragma: no cover - callers reject det <= 0 first
        u[:, -1] *= -1
        r = u @ vt
    return r


def check_rigid(matrix, tol: float = RIGID_TOL) -> np.ndarray:
    """Validate a 4x4 rigid transform and return it with an exactly orthonormal rotation."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.shape == (16,):
        m = m.reshape(4, 4)
    if m.shape != (4, 4):
        raise NonRigidTransformError(f"cam_to_world must be 4x4 (or 16 reals), got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonRigidTransformError("cam_to_world has non-finite entries")
    if np.max(np.abs(m[3] - [0.0, 0.0, 0.0, 1.0])) > tol:
        raise NonRigidTransformError("bottom row of cam_to_world must be [0, 0, 0, 1]")
    rot = m[:3, :3]
    dev = np.max(np.abs(rot.T @ rot - np.eye(3)))
    det = np.linalg.det(rot)
    if dev > tol or det <= 0:
        raise NonRigidTransformError(
            f"rotation block is not a proper rotation (|R^T R - I|inf = {dev:.3g}, det = {det:.6g})"
        )
    out = np.eye(4)
    out[:3, :3] = _orthonormalize(rot)
    out[:3, 3] = m[:3, 3]
    return out


@dataclass(frozen=True, eq=False)
class CameraRig:
    """Pinhole intrinsics, two-term radial distortion and the camera-to-world pose."""

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    cam_to_world: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise InvalidConfigError("rig width and height must be positive")
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidConfigError("focal lengths must be positive")
        for name in ("fx", "fy", "cx", "cy", "k1", "k2"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidConfigError(f"{name} must be finite")
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        m = check_rigid(self.cam_to_world)
        m.setflags(write=False)
        object.__setattr__(self, "cam_to_world", m)

    @property
    def world_to_cam(self) -> np.ndarray:
        r = self.cam_to_world[:3, :3]
        t = self.cam_to_world[:3, 3]
        out = np.eye(4)
        out[:3, :3] = r.T
        out[:3, 3] = -r.T @ t
        return out

    @property
    def has_distortion(self) -> bool:
        return self.k1 != 0.0 or self.k2 != 0.0

    def with_pose(self, cam_to_world) -> "CameraRig":
        return CameraRig(self.width, self.height, self.fx, self.fy, self.cx, self.cy,
                         self.k1, self.k2, np.asarray(cam_to_world, dtype=np.float64))

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "k1": self.k1,
            "k2": self.k2,
            "cam_to_world": [float(x) for x in self.cam_to_world.ravel()],
        }

    def __eq__(self, other):
        if not isinstance(other, CameraRig):
            return NotImplemented
        a, b = self.to_dict(), other.to_dict()
        return a == b

    __hash__ = None


# ---------------------------------------------------------------------------
# PGM I/O

_TOKEN = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)")


def _header_tokens(buf: bytes, count: int):
    pos = 0
    tokens = []
    for _ in range(count):
        m = _TOKEN.match(buf, pos)
        if m is None:
            raise MalformedHeaderError("PGM header ended early")
        tokens.append(m.group(2))
        pos = m.end()
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(buf) or buf[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r"):
        raise MalformedHeaderError("missing whitespace after PGM maxval")
    return tokens, pos + 1


def load_depth_frame(path) -> DepthFrame:
    """Read a 16-bit binary PGM written by :func:`save_depth_frame` (or any P5 with maxval > 255)."""
    buf = Path(path).read_bytes()
    if not buf.startswith(b"P5"):
        raise MalformedHeaderError(f"{path}: not a binary PGM (magic {buf[:2]!r})")
    # the magic counts as the first token
    tokens, offset = _header_tokens(buf, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise MalformedHeaderError(f"{path}: non-numeric header field") from exc
    if width <= 0 or height <= 0:
        raise MalformedHeaderError(f"{path}: invalid dimensions {width}x{height}")
    if not 0 < maxval <= 65535:
        raise MalformedHeaderError(f"{path}: invalid maxval {maxval}")
    if maxval < 256:
        raise UnsupportedBitDepthError(f"{path}: maxval {maxval} means 8-bit samples; 16-bit required")
    need = width * height * 2
    payload = buf[offset:offset + need]
    if len(payload) < need:
        raise TruncatedPayloadError(f"{path}: expected {need} payload bytes, found {len(payload)}")
    depths = np.frombuffer(payload, dtype=">u2").reshape(height, width).astype(np.uint16)
    return DepthFrame(depths)


def save_depth_frame(frame: DepthFrame, path) -> None:
    path = Path(path)
    header = f"P5\n{frame.width} {frame.height}\n65535\n".encode("ascii")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(frame.depths.astype(">u2").tobytes())
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# rig files

def rig_from_dict(data: dict, source: str = "rig") -> CameraRig:
    missing = [k for k in RIG_KEYS if k not in data and k not in ("k1", "k2")]
    if missing:
        raise MissingFieldError(f"{source}: missing field(s) {', '.join(missing)}")
    c2w = np.asarray(data["cam_to_world"], dtype=np.float64)
    if c2w.size != 16:
        raise MissingFieldError(f"{source}: cam_to_world needs 16 reals, got {c2w.size}")
    return CameraRig(
        width=int(data["width"]),
        height=int(data["height"]),
        fx=float(data["fx"]),
        fy=float(data["fy"]),
        cx=float(data["cx"]),
        cy=float(data["cy"]),
        k1=float(data.get("k1", 0.0)),
        k2=float(data.get("k2", 0.0)),
        cam_to_world=c2w.reshape(4, 4),
    )


def load_camera_rig(path) -> CameraRig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MissingFieldError(f"{path}: not a key/value JSON document ({exc})") from exc
    if not isinstance(data, dict):
        raise MissingFieldError(f"{path}: expected a JSON object")
    return rig_from_dict(data, str(path))


def save_camera_rig(rig: CameraRig, path) -> None:
    with open(path, "w") as fh:
        json.dump(rig.to_dict(), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# pixel <-> image plane

def distort(U, V, k1: float, k2: float):
    """Forward radial model: undistorted normalized coords -> distorted ones."""
    r2 = U * U + V * V
    f = 1.0 + k1 * r2 + k2 * r2 * r2
    return U * f, V * f


def _undistort(xd, yd, k1: float, k2: float):
    """Invert :func:`distort` with Newton's method (vectorized)."""
    xd = np.asarray(xd, dtype=np.float64)
    yd = np.asarray(yd, dtype=np.float64)
    x = xd.copy()
    y = yd.copy()
    for _ in range(_NEWTON_MAX_ITERS):
        r2 = x * x + y * y
        f = 1.0 + k1 * r2 + k2 * r2 * r2
        ex = x * f - xd
        ey = y * f - yd
        if np.all(np.abs(ex) <= _NEWTON_TOL * (1 + np.abs(xd))) and np.all(
            np.abs(ey) <= _NEWTON_TOL * (1 + np.abs(yd))
        ):
            break
        g = 2.0 * (k1 + 2.0 * k2 * r2)
        a = f + g * x * x
        b = g * x * y
        d = f + g * y * y
        det = a * d - b * b
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = (d * ex - b * ey) / det
            dy = (a * ey - b * ex) / det
        x = x - dx
        y = y - dy
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            break
    ex, ey = distort(x, y, k1, k2)
    r2 = x * x + y * y
    # the root must sit where r -> r f(r) is increasing, else it is a folded-over preimage
    slope = 1.0 + 3.0 * k1 * r2 + 5.0 * k2 * r2 * r2
    ok = np.isfinite(x) & np.isfinite(y) & (np.abs(ex - xd) <= 1e-10) & (np.abs(ey - yd) <= 1e-10) & (slope > 0)
    if not np.all(ok):
        raise UndistortionError(
            f"radial undistortion did not converge (k1={k1}, k2={k2}) for {int(np.size(ok) - np.count_nonzero(ok))} point(s)"
        )
    return x, y


def pixels_to_image_plane(rig: CameraRig, u, v):
    """Vectorized :func:`pixel_to_image_plane`; returns the ``(U, V)`` arrays."""
    xd = (np.asarray(u, dtype=np.float64) - rig.cx) / rig.fx
    yd = (np.asarray(v, dtype=np.float64) - rig.cy) / rig.fy
    if not rig.has_distortion:
        return xd, yd
    return _undistort(xd, yd, rig.k1, rig.k2)


def pixel_to_image_plane(rig: CameraRig, u: float, v: float) -> ImagePlanePoint:
    U, V = pixels_to_image_plane(rig, u, v)
    return ImagePlanePoint(float(U), float(V))


def image_plane_to_pixel(rig: CameraRig, U, V):
    """Forward model: undistorted image-plane coords -> fractional pixel coords."""
    xd, yd = distort(np.asarray(U, dtype=np.float64), np.asarray(V, dtype=np.float64), rig.k1, rig.k2)
    return rig.cx + rig.fx * xd, rig.cy + rig.fy * yd
