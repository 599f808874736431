"""Marker-less planar target tracking on depth images."""

__version__ = "0.1.0"

from .depthio import CameraRig, DepthFrame, ImagePlanePoint, load_camera_rig, load_depth_frame
from .errors import DepthTrackError
from .pipeline import TrackedTarget, locate
from .tracker import TrackerConfig, track

__all__ = [
    "CameraRig",
    "DepthFrame",
    "DepthTrackError",
    "ImagePlanePoint",
    "TrackedTarget",
    "TrackerConfig",
    "__version__",
    "load_camera_rig",
    "load_depth_frame",
    "locate",
    "track",
]
