"""Depth-image tracker: trim, candidates, corners, patch depth sampling."""

from .config import TrackerConfig, load_tracker_config
from .contours import OutlinePolygon, extract_outlines
from .corners import Candidate, CornerGroup, detect_corners, identify_candidates, internal_angles, select_target
from .mask import BinaryMask, threshold_mask, trim
from .patch import sample_patch_depth, sample_patch_depth_counted
from .pipeline import CornerQuad, TrackResult, track
from .refine import RefineResult, refine_corners
from .simplify import simplify_outline

__all__ = [
    "BinaryMask",
    "Candidate",
    "CornerGroup",
    "CornerQuad",
    "OutlinePolygon",
    "RefineResult",
    "TrackResult",
    "TrackerConfig",
    "detect_corners",
    "extract_outlines",
    "identify_candidates",
    "internal_angles",
    "load_tracker_config",
    "refine_corners",
    "sample_patch_depth",
    "sample_patch_depth_counted",
    "select_target",
    "simplify_outline",
    "threshold_mask",
    "track",
    "trim",
]
