"""Exception hierarchy.

Every error that can end a single frame's processing carries a short
``code`` string; the CLI writes it into the ``error_code`` column so that a
failing frame never aborts a run.
"""

from __future__ import annotations


class DepthTrackError(Exception):
    code = "error"

    def __init__(self, message: str = "", *, step: str | None = None):
        super().__init__(message)
        self.step = step

    def __str__(self) -> str:
        msg = super().__str__()
        return f"[{self.step}] {msg}" if self.step else msg


# --- file and rig errors -------------------------------------------------

class FormatError(DepthTrackError):
    code = "format"


class MalformedHeaderError(FormatError):
    code = "malformed-header"


class TruncatedPayloadError(FormatError):
    code = "truncated-payload"


class UnsupportedBitDepthError(FormatError):
    code = "unsupported-bit-depth"


class MissingFieldError(FormatError):
    code = "missing-field"


class NonRigidTransformError(DepthTrackError):
    code = "non-rigid"


class UndistortionError(DepthTrackError):
    code = "undistortion"


# --- per-frame tracking errors -------------------------------------------

class EmptyFrameError(DepthTrackError):
    code = "empty-frame"


class NoTargetError(DepthTrackError):
    code = "no-target"


class SamplingFailureError(DepthTrackError):
    code = "sampling-failure"


class DegenerateGeometryError(DepthTrackError):
    code = "degenerate-geometry"


class NonPositiveDepthError(DepthTrackError):
    code = "non-positive-depth"


# --- baselines -------------------------------------------------------------

class DegenerateCorrespondenceError(DepthTrackError):
    code = "icp-degenerate"


class NoPlaneError(DepthTrackError):
    code = "ransac-no-plane"


# --- scene generation ------------------------------------------------------

class OutOfFrustumError(DepthTrackError):
    code = "out-of-frustum"


class InvalidConfigError(DepthTrackError, ValueError):
    code = "config"
