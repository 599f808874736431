"""Depth sampling at a corner: mean of the nonzero samples in a square patch."""

from __future__ import annotations

import math

import numpy as np

from .._accel import USE_NUMBA, njit
from ..errors import SamplingFailureError


def _patch_sum_py(depths, cu, cv, half, lo, hi):
    h, w = depths.shape
    r0 = max(cv - half, 0)
    r1 = min(cv + half, h - 1)
    c0 = max(cu - half, 0)
    c1 = min(cu + half, w - 1)
    total = 0.0
    count = 0
    visited = 0
    for r in range(r0, r1 + 1):
        for c in range(c0, c1 + 1):
            visited += 1
            d = depths[r, c]
            if d != 0 and d >= lo and d <= hi:
                total += d
                count += 1
    return total, count, visited


def _patch_sum_np(depths, cu, cv, half, lo, hi):
    h, w = depths.shape
    win = depths[max(cv - half, 0):min(cv + half, h - 1) + 1, max(cu - half, 0):min(cu + half, w - 1) + 1]
    nz = win[(win != 0) & (win >= lo) & (win <= hi)]
    return float(nz.sum(dtype=np.float64)), int(nz.size), int(win.size)


_patch_sum = njit(_patch_sum_py) if USE_NUMBA else _patch_sum_np


def sample_patch_depth_counted(depths, corner, patch_size: int, *, band=None, kernel=None) -> tuple[float, int]:
    """Return ``(mean nonzero depth, pixels visited)`` for the patch centred on ``round(corner)``.

    With ``band=(lo, hi)`` samples outside the inclusive band count as zero,
    which is how the tracker samples its thresholded image without
    materialising it.
    """
    if patch_size < 1 or patch_size % 2 == 0:
        raise ValueError(f"patch_size must be odd and >= 1, got {patch_size}")
    arr = getattr(depths, "depths", depths)
    cu = int(math.floor(float(corner[0]) + 0.5))
    cv = int(math.floor(float(corner[1]) + 0.5))
    h, w = arr.shape
    if not (0 <= cu < w and 0 <= cv < h):
        raise SamplingFailureError(f"corner {tuple(corner)} lies outside the frame", step="sample")
    lo, hi = band if band is not None else (1, 65535)
    total, count, visited = (kernel or _patch_sum)(arr, cu, cv, patch_size // 2, int(lo), int(hi))
    if count == 0:
        raise SamplingFailureError(
            f"all {visited} samples in the {patch_size}x{patch_size} patch at ({cu}, {cv}) are zero",
            step="sample",
        )
    return total / count, int(visited)


def sample_patch_depth(depths, corner, patch_size: int, *, band=None) -> float:
    return sample_patch_depth_counted(depths, corner, patch_size, band=band)[0]
