"""Förstner-style sub-pixel corner refinement.

Each corner moves to the point minimising the gradient-weighted squared
distances to the edge lines through the pixels of a square window, i.e.
the least-squares intersection of the local edge elements. The window is
re-centred on the new estimate and the step repeated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrackerConfig

OK = "ok"
MARGIN = "margin"
SINGULAR = "singular"
DRIFT = "drift"


@dataclass(frozen=True, eq=False)
class RefineResult:
    corners: np.ndarray  # (4, 2)
    status: tuple[str, ...]
    iterations: tuple[int, ...]

    @property
    def flagged(self) -> tuple[bool, ...]:
        return tuple(s != OK for s in self.status)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _sobel(patch: np.ndarray):
    """Sobel gradients (scaled to unit step response) of the interior of ``patch``."""
    p = patch
    gx = (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:] - p[:-2, :-2] - 2.0 * p[1:-1, :-2] - p[2:, :-2]) / 8.0
    gy = (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:] - p[:-2, :-2] - 2.0 * p[:-2, 1:-1] - p[:-2, 2:]) / 8.0
    return gx, gy


def forstner_point(image: np.ndarray, x: float, y: float, half: int, cond_limit: float = 1e8):
    """One least-squares step around ``(x, y)``.

    Returns ``(status, point)``; ``point`` is ``None`` when the window leaves
    the image or the normal matrix is singular.
    """
    cx = _round_half_up(x)
    cy = _round_half_up(y)
    h, w = image.shape
    if cx - half - 1 < 0 or cy - half - 1 < 0 or cx + half + 1 > w - 1 or cy + half + 1 > h - 1:
        return MARGIN, None
    gx, gy = _sobel(image[cy - half - 1:cy + half + 2, cx - half - 1:cx + half + 2])
    ys, xs = np.mgrid[cy - half:cy + half + 1, cx - half:cx + half + 1]
    gxx = gx * gx
    gyy = gy * gy
    gxy = gx * gy
    sxx, syy, sxy = gxx.sum(), gyy.sum(), gxy.sum()
    bx = (gxx * xs + gxy * ys).sum()
    by = (gxy * xs + gyy * ys).sum()
    tr = sxx + syy
    det = sxx * syy - sxy * sxy
    if tr <= 0 or det <= tr * tr / cond_limit:
        return SINGULAR, None
    return OK, np.array([syy * bx - sxy * by, sxx * by - sxy * bx]) / det


def refine_corners(image, corners, cfg: TrackerConfig) -> RefineResult:
    """Refine each corner on ``image`` (2-D array or DepthFrame).

    A corner whose window leaves the image, whose normal matrix is singular,
    or that would drift more than half a window from its input is returned
    unchanged and flagged.
    """
    img = np.asarray(getattr(image, "depths", image), dtype=np.float64)
    half = cfg.refine_window // 2
    pts = np.asarray(corners, dtype=np.float64).reshape(-1, 2)
    out = pts.copy()
    status = []
    iters = []
    for k, (x0, y0) in enumerate(pts):
        x, y = x0, y0
        st = OK
        it = 0
        for it in range(1, cfg.refine_max_iters + 1):
            st, sol = forstner_point(img, x, y, half)
            if sol is None:
                break
            shift = float(np.hypot(sol[0] - x, sol[1] - y))
            x, y = float(sol[0]), float(sol[1])
            if shift < cfg.refine_shift_tol:
                break
        if st == OK and np.hypot(x - x0, y - y0) > cfg.refine_window / 2.0:
            st = DRIFT
        if st == OK:
            out[k] = (x, y)
        status.append(st)
        iters.append(it)
    return RefineResult(out, tuple(status), tuple(iters))
