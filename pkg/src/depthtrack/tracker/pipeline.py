"""The four tracker steps composed into :func:`track`."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..depthio import DepthFrame
from ..errors import DepthTrackError, NoTargetError
from .config import TrackerConfig
from .contours import extract_outlines
from .corners import CornerGroup, detect_corners, identify_candidates, select_target
from .mask import threshold_mask, trim
from .patch import sample_patch_depth_counted
from .refine import RefineResult, refine_corners
from .simplify import simplify_outline


@dataclass(frozen=True, eq=False)
class CornerQuad:
    corners: np.ndarray  # (4, 2) fractional pixels in the input frame, outline order
    depths: np.ndarray  # (4,) mm

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=np.float64).reshape(4, 2)
        d = np.asarray(self.depths, dtype=np.float64).reshape(4)
        if np.any(d <= 0):
            raise ValueError("corner depths must be positive")
        object.__setattr__(self, "corners", c)
        object.__setattr__(self, "depths", d)


@dataclass(frozen=True, eq=False)
class TrackResult:
    quad: CornerQuad
    group: CornerGroup
    refine: RefineResult
    patch_work: int  # pixels visited while sampling depths
    timings_ms: dict = field(default_factory=dict)


def track(frame: DepthFrame, cfg: TrackerConfig | None = None) -> TrackResult:
    """Trim, find the target's four corners, refine them and sample their depths.

    Raises EmptyFrameError, NoTargetError or SamplingFailureError; each
    carries the step it came from.
    """
    cfg = cfg or TrackerConfig()
    clock = time.perf_counter
    timings = {}
    t0 = clock()

    trimmed, (dx, dy) = trim(frame)
    mask = threshold_mask(trimmed, cfg, (dx, dy))
    t1 = clock()
    timings["trim"] = (t1 - t0) * 1e3

    outlines = extract_outlines(mask, min_area=cfg.min_region_px)
    simplified = [simplify_outline(o, cfg.simplify_epsilon) for o in outlines]
    candidates = identify_candidates(simplified, mask, cfg)
    t2 = clock()
    timings["candidates"] = (t2 - t1) * 1e3

    if not candidates:
        raise NoTargetError("no region qualifies as a target candidate", step="candidates")
    groups = [g for g in (detect_corners(c, cfg) for c in candidates) if g is not None]
    if not groups:
        raise NoTargetError("no candidate yields four corners", step="corners")
    group = select_target(groups)
    corners = group.vertices + np.array([dx, dy], dtype=np.float64)

    full = np.zeros(frame.depths.shape, dtype=np.float64)
    full[dy:dy + mask.height, dx:dx + mask.width] = mask.bits
    refined = refine_corners(full, corners, cfg)
    t3 = clock()
    timings["corners"] = (t3 - t2) * 1e3

    depths = np.empty(4)
    work = 0
    band = (cfg.threshold_lo, cfg.threshold_hi)
    try:
        for k in range(4):
            depths[k], visited = sample_patch_depth_counted(frame.depths, refined.corners[k], cfg.patch_size, band=band)
            work += visited
    except DepthTrackError as exc:
        exc.step = exc.step or "sample"
        raise
    t4 = clock()
    timings["sample"] = (t4 - t3) * 1e3
    timings["total"] = (t4 - t0) * 1e3
    return TrackResult(CornerQuad(refined.corners, depths), group, refined, work, timings)
