"""Trimming the zero padding and thresholding to a binary mask."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..depthio import DepthFrame
from ..errors import EmptyFrameError
from .config import TrackerConfig


@dataclass(frozen=True, eq=False)
class BinaryMask:
    bits: np.ndarray  # bool, (height, width)
    origin_offset: tuple[int, int] = (0, 0)  # (dx, dy) of bits[0, 0] in the source frame

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.ndim != 2:
            raise ValueError("mask must be 2-D")
        object.__setattr__(self, "bits", b)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


def nonzero_bounds(depths: np.ndarray):
    """Row and column index ranges holding nonzero samples, or ``None`` if all zero."""
    rows = np.flatnonzero(depths.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(depths.any(axis=0))
    return int(rows[0]), int(rows[-1]), int(cols[0]), int(cols[-1])


def trim(frame: DepthFrame) -> tuple[DepthFrame, tuple[int, int]]:
    """Crop to the smallest rectangle holding every nonzero pixel.

    Returns the cropped frame and ``(dx, dy)``, its top-left corner in the input.
    """
    bounds = nonzero_bounds(frame.depths)
    if bounds is None:
        raise EmptyFrameError("frame has no nonzero depth", step="trim")
    r0, r1, c0, c1 = bounds
    if r0 == 0 and c0 == 0 and r1 == frame.height - 1 and c1 == frame.width - 1:
        return frame, (0, 0)
    return DepthFrame(frame.depths[r0:r1 + 1, c0:c1 + 1]), (c0, r0)


def threshold_depths(depths: np.ndarray, lo: int, hi: int) -> np.ndarray:
    return (depths >= lo) & (depths <= hi)


def threshold_mask(frame: DepthFrame, cfg: TrackerConfig, origin_offset=(0, 0)) -> BinaryMask:
    """Inclusive band ``threshold_lo <= depth <= threshold_hi``."""
    return BinaryMask(threshold_depths(frame.depths, cfg.threshold_lo, cfg.threshold_hi), tuple(origin_offset))
