"""Outer border following on a binary mask.

Regions are 8-connected. Each region's border is traced from its first pixel
in raster order using the Suzuki-Abe border-following step; the traced pixels
are the region's foreground pixels that are 4-adjacent to its surrounding
background, in boundary order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .._accel import USE_NUMBA, njit
from .mask import BinaryMask

_EIGHT = np.ones((3, 3), dtype=bool)

# clockwise on screen (rows grow downwards): E, SE, S, SW, W, NW, N, NE
_DR = np.array([0, 1, 1, 1, 0, -1, -1, -1], dtype=np.int64)
_DC = np.array([1, 1, 0, -1, -1, -1, 0, 1], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class OutlinePolygon:
    """Closed boundary polygon; ``vertices`` is an ``(n, 2)`` array of ``(x, y)`` pixels."""

    vertices: np.ndarray
    area_px: int
    closed: bool = True

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        if v.shape[0] == 0:
            raise ValueError("outline needs at least one vertex")
        if v.shape[0] > 1:
            same = np.all(v == np.roll(v, -1, axis=0), axis=1)
            if np.any(same):
                raise ValueError("outline has consecutive duplicate vertices")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return self.vertices.shape[0]

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        """``(x_min, y_min, x_max, y_max)`` over the vertices."""
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def signed_area(self) -> float:
        """Shoelace area in pixel coordinates (y down); sign gives the orientation."""
        x = self.vertices[:, 0]
        y = self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    def centroid(self) -> tuple[float, float]:
        """Area centroid of the polygon, falling back to the vertex mean when flat."""
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        a = cross.sum() / 2.0
        if abs(a) < 1e-12:
            m = v.mean(axis=0)
            return float(m[0]), float(m[1])
        cx = ((x + xn) * cross).sum() / (6.0 * a)
        cy = ((y + yn) * cross).sum() / (6.0 * a)
        return float(cx), float(cy)


def _trace_py(img, r0, c0, capacity):
    """Suzuki-Abe outer border following from ``(r0, c0)`` on a zero-padded image."""
    out = np.empty((capacity, 2), dtype=np.int64)
    # 3.1: clockwise from the west neighbour
    found = -1
    for k in range(8):
        d = (4 + k) % 8
        if img[r0 + _DR[d], c0 + _DC[d]] != 0:
            found = d
            break
    if found < 0:
        out[0, 0] = r0
        out[0, 1] = c0
        return out[:1]
    r1 = r0 + _DR[found]
    c1 = c0 + _DC[found]
    r2, c2 = r1, c1
    r3, c3 = r0, c0
    n = 0
    while True:
        # 3.3: counter-clockwise around (r3, c3), starting after (r2, c2)
        dr = r2 - r3
        dc = c2 - c3
        start = 0
        for d in range(8):
            if _DR[d] == dr and _DC[d] == dc:
                start = d
                break
        r4 = r3
        c4 = c3
        for k in range(1, 9):
            d = (start - k) % 8
            rr = r3 + _DR[d]
            cc = c3 + _DC[d]
            if img[rr, cc] != 0:
                r4 = rr
                c4 = cc
                break
        out[n, 0] = r3
        out[n, 1] = c3
        n += 1
        if r4 == r0 and c4 == c0 and r3 == r1 and c3 == c1:
            break
        r2, c2 = r3, c3
        r3, c3 = r4, c4
    return out[:n]


_trace_nb = njit(_trace_py)
_trace = _trace_nb if USE_NUMBA else _trace_py


def _dedupe(points: np.ndarray) -> np.ndarray:
    if points.shape[0] < 2:
        return points
    keep = np.any(points != np.roll(points, 1, axis=0), axis=1)
    if not np.any(keep):
        return points[:1]
    return points[keep]


def extract_outlines(mask: BinaryMask, min_area: int = 0, *, tracer=None) -> list[OutlinePolygon]:
    """One outer outline per 8-connected foreground region, in raster order of the regions.

    ``min_area`` skips tracing regions smaller than that many pixels.
    """
    bits = mask.bits
    if not bits.any():
        return []
    labels, count = ndimage.label(bits, structure=_EIGHT)
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    padded = np.zeros((bits.shape[0] + 2, bits.shape[1] + 2), dtype=np.uint8)
    padded[1:-1, 1:-1] = bits
    trace = tracer or _trace
    outlines = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None or areas[k] < min_area:
            continue
        r = sl[0].start
        row = labels[r, sl[1].start:sl[1].stop]
        c = sl[1].start + int(np.argmax(row == k))
        pts = trace(padded, r + 1, c + 1, 4 * int(areas[k]) + 8)
        pts = _dedupe(np.asarray(pts)) - 1
        outlines.append(OutlinePolygon(pts[:, ::-1].astype(np.float64), int(areas[k])))
    return outlines
