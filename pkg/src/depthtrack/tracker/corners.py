"""Candidate regions, corner groups and target selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NoTargetError
from .config import TrackerConfig
from .contours import OutlinePolygon
from .mask import BinaryMask


@dataclass(frozen=True, eq=False)
class Candidate:
    polygon: OutlinePolygon  # simplified
    bbox: tuple[float, float, float, float]  # x_min, y_min, x_max, y_max
    touches_bottom: bool


@dataclass(frozen=True, eq=False)
class CornerGroup:
    vertices: np.ndarray  # (4, 2) x, y in outline order
    indices: tuple[int, int, int, int]  # positions in the simplified polygon
    centroid: tuple[float, float]
    bbox: tuple[float, float, float, float]
    area_px: int

    @property
    def centroid_ratio(self) -> float:
        x0, y0, x1, y1 = self.bbox
        h = y1 - y0
        return (self.centroid[1] - y0) / h if h > 0 else 0.0


def internal_angles(vertices: np.ndarray) -> np.ndarray:
    """Interior angle in degrees at each vertex of a closed polygon.

    The interior side comes from the sign of the polygon's signed area, so
    reflex vertices get angles above 180.
    """
    v = np.asarray(vertices, dtype=np.float64)
    prev = np.roll(v, 1, axis=0)
    nxt = np.roll(v, -1, axis=0)
    e1 = v - prev
    e2 = nxt - v
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    dot = e1[:, 0] * e2[:, 0] + e1[:, 1] * e2[:, 1]
    turn = np.degrees(np.arctan2(cross, dot))
    x, y = v[:, 0], v[:, 1]
    area2 = float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    orient = 1.0 if area2 >= 0 else -1.0
    return 180.0 - orient * turn


def identify_candidates(outlines, mask: BinaryMask, cfg: TrackerConfig) -> list[Candidate]:
    """Keep large regions whose bounding box reaches a bottom corner of the mask.

    ``outlines`` are simplified outlines; each keeps the pixel count of its
    source region in ``area_px``.
    """
    bottom = mask.height - 1
    right = mask.width - 1
    prox = cfg.bottom_proximity_px
    out = []
    for poly in outlines:
        if poly.area_px < cfg.min_region_px:
            continue
        x0, y0, x1, y1 = poly.bbox
        if bottom - y1 > prox:
            continue
        near_left = abs(x0 - 0) <= prox
        near_right = abs(right - x1) <= prox
        if near_left or near_right:
            out.append(Candidate(poly, (x0, y0, x1, y1), True))
    return out


def _first_run_of_four(flags: np.ndarray):
    n = flags.shape[0]
    if n < 4:
        return None
    if flags.all():
        return 0
    for s in range(n):
        if flags[s] and not flags[s - 1]:
            if all(flags[(s + k) % n] for k in range(4)):
                return s
    return None


def detect_corners(candidate: Candidate, cfg: TrackerConfig) -> CornerGroup | None:
    """Four corner vertices of a candidate, or ``None``.

    Vertices in the bottom ``height_fraction`` of the box are dropped, the
    rest are flagged when their interior angle lies in
    ``[angle_lo, angle_hi]``. Four cyclically consecutive flags win;
    otherwise the first flagged vertex whose window of itself plus four
    successors holds four flags.
    """
    poly = candidate.polygon
    v = poly.vertices
    n = v.shape[0]
    if n < 4:
        return None
    x0, y0, x1, y1 = candidate.bbox
    cutoff = y1 - cfg.height_fraction * (y1 - y0)
    high_enough = v[:, 1] <= cutoff
    angles = internal_angles(v)
    flags = high_enough & (angles >= cfg.angle_lo) & (angles <= cfg.angle_hi)

    start = _first_run_of_four(flags)
    if start is not None:
        idx = tuple((start + k) % n for k in range(4))
    else:
        idx = None
        for s in np.flatnonzero(flags):
            window = [(s + k) % n for k in range(5)]
            hits = [w for w in window if flags[w]]
            if len(hits) >= 4 and len(set(hits[:4])) == 4:
                idx = tuple(hits[:4])
                break
        if idx is None:
            return None
    return CornerGroup(
        vertices=v[list(idx)].copy(),
        indices=tuple(int(i) for i in idx),
        centroid=poly.centroid(),
        bbox=candidate.bbox,
        area_px=poly.area_px,
    )


def select_target(groups) -> CornerGroup:
    """The group whose outline centroid sits highest within its box; ties go to the larger region."""
    groups = list(groups)
    if not groups:
        raise NoTargetError("no corner group found", step="select")
    best = groups[0]
    for g in groups[1:]:
        r, rb = g.centroid_ratio, best.centroid_ratio
        if np.isclose(r, rb, rtol=0.0, atol=1e-12):
            if g.area_px > best.area_px:
                best = g
        elif r < rb:
            best = g
    return best
