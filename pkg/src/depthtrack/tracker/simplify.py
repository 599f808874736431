"""Douglas-Peucker simplification of closed outlines.

The closed polygon is split at its two farthest-apart vertices and each half
is simplified as an open chain. Distances are measured to the chord
*segment*, so every dropped vertex ends up within ``epsilon`` of the output
polygon.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .._accel import USE_NUMBA, njit
from .contours import OutlinePolygon


def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _farthest_pair_py(pts):
    """Indices ``(i, j)``, ``i < j``, of the farthest-apart vertices; ties go to the smallest pair."""
    n = pts.shape[0]
    if n < 2:
        return 0, 0
    by_y = np.argsort(pts[:, 1], kind="mergesort")
    order = by_y[np.argsort(pts[by_y, 0], kind="mergesort")]
    hull = np.empty(2 * n, dtype=np.int64)
    k = 0
    for idx in range(n):
        p = order[idx]
        while k >= 2 and _cross(pts[hull[k - 2], 0], pts[hull[k - 2], 1], pts[hull[k - 1], 0], pts[hull[k - 1], 1],
                                pts[p, 0], pts[p, 1]) <= 0:
            k -= 1
        hull[k] = p
        k += 1
    lower = k + 1
    for idx in range(n - 2, -1, -1):
        p = order[idx]
        while k >= lower and _cross(pts[hull[k - 2], 0], pts[hull[k - 2], 1], pts[hull[k - 1], 0],
                                    pts[hull[k - 1], 1], pts[p, 0], pts[p, 1]) <= 0:
            k -= 1
        hull[k] = p
        k += 1
    # every vertex sharing coordinates with a hull vertex is a candidate
    cand = np.zeros(n, dtype=np.bool_)
    for h in range(k):
        hx = pts[hull[h], 0]
        hy = pts[hull[h], 1]
        for i in range(n):
            if pts[i, 0] == hx and pts[i, 1] == hy:
                cand[i] = True
    idx = np.flatnonzero(cand)
    best = -1.0
    bi = 0
    bj = 0
    for a in range(idx.shape[0]):
        i = idx[a]
        for b in range(a + 1, idx.shape[0]):
            j = idx[b]
            dx = pts[j, 0] - pts[i, 0]
            dy = pts[j, 1] - pts[i, 1]
            d = dx * dx + dy * dy
            if d > best:
                best = d
                bi = i
                bj = j
    return bi, bj


def _farthest_pair_np(pts):
    """Same contract as :func:`_farthest_pair_py`, hull from qhull and a vectorized pair scan."""
    n = pts.shape[0]
    if n < 2:
        return 0, 0
    try:
        hull = ConvexHull(pts).vertices
    except QhullError:  # collinear or coincident input
        hull = np.arange(n)
    hp = pts[hull]
    cand = np.flatnonzero((pts[:, None, :] == hp[None, :, :]).all(axis=-1).any(axis=1))
    c = pts[cand]
    d = ((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1)
    d = np.triu(d, 1) - np.tril(np.ones_like(d))  # lower triangle and diagonal never win
    k = int(np.argmax(d))  # first maximum in row-major order = smallest (i, j)
    return int(cand[k // len(cand)]), int(cand[k % len(cand)])


def _seg_dist(px, py, ax, ay, bx, by):
    abx = bx - ax
    aby = by - ay
    dx = px - ax
    dy = py - ay
    l2 = abx * abx + aby * aby
    if l2 == 0.0:
        return math.sqrt(dx * dx + dy * dy)
    t = (dx * abx + dy * aby) / l2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    ex = dx - t * abx
    ey = dy - t * aby
    return math.sqrt(ex * ex + ey * ey)


def _dp_keep_py(chain, eps):
    """Keep-flags for an open chain; both endpoints are always kept."""
    n = chain.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    keep[0] = True
    keep[n - 1] = True
    stack = np.empty((n + 1, 2), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = n - 1
    top = 1
    while top > 0:
        top -= 1
        s = stack[top, 0]
        e = stack[top, 1]
        if e - s < 2:
            continue
        dmax = -1.0
        imax = s
        ax = chain[s, 0]
        ay = chain[s, 1]
        bx = chain[e, 0]
        by = chain[e, 1]
        for i in range(s + 1, e):
            d = _seg_dist(chain[i, 0], chain[i, 1], ax, ay, bx, by)
            if d > dmax:
                dmax = d
                imax = i
        if dmax > eps:
            keep[imax] = True
            stack[top, 0] = s
            stack[top, 1] = imax
            top += 1
            stack[top, 0] = imax
            stack[top, 1] = e
            top += 1
    return keep


def _dp_keep_np(chain, eps):
    """Same contract as :func:`_dp_keep_py`, with the inner distance scan vectorized."""
    n = chain.shape[0]
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        s, e = stack.pop()
        if e - s < 2:
            continue
        a = chain[s]
        ab = chain[e] - a
        d = chain[s + 1:e] - a
        l2 = ab[0] * ab[0] + ab[1] * ab[1]
        if l2 == 0.0:
            dist = np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1])
        else:
            t = np.clip((d[:, 0] * ab[0] + d[:, 1] * ab[1]) / l2, 0.0, 1.0)
            ex = d[:, 0] - t * ab[0]
            ey = d[:, 1] - t * ab[1]
            dist = np.sqrt(ex * ex + ey * ey)
        k = int(np.argmax(dist))
        if dist[k] > eps:
            i = s + 1 + k
            keep[i] = True
            stack.append((s, i))
            stack.append((i, e))
    return keep


_seg_dist = njit(_seg_dist) if USE_NUMBA else _seg_dist
_cross = njit(_cross) if USE_NUMBA else _cross
if USE_NUMBA:
    _farthest_pair = njit(_farthest_pair_py)
    _dp_keep = njit(_dp_keep_py)
else:
    _farthest_pair = _farthest_pair_np
    _dp_keep = _dp_keep_np


def simplify_closed(vertices: np.ndarray, epsilon: float, *, keep_fn=None, pair_fn=None) -> np.ndarray:
    """Indices (ascending) of the vertices retained from a closed polygon."""
    pts = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    if n <= 3:
        return np.arange(n)
    keep_fn = keep_fn or _dp_keep
    pair_fn = pair_fn or _farthest_pair
    i, j = pair_fn(pts)
    i, j = int(i), int(j)
    if i == j:  # every vertex coincides
        return np.array([0])
    first = np.ascontiguousarray(pts[i:j + 1])
    second_idx = np.concatenate([np.arange(j, n), np.arange(0, i + 1)])
    second = np.ascontiguousarray(pts[second_idx])
    kept = np.concatenate([
        np.arange(i, j + 1)[keep_fn(first, float(epsilon))],
        second_idx[keep_fn(second, float(epsilon))],
    ])
    return np.unique(kept)


def simplify_outline(outline: OutlinePolygon, epsilon: float) -> OutlinePolygon:
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    idx = simplify_closed(outline.vertices, epsilon)
    verts = outline.vertices[idx]
    if verts.shape[0] > 1:
        keep = np.any(verts != np.roll(verts, 1, axis=0), axis=1)
        if not np.any(keep):
            keep[0] = True
        verts = verts[keep]
    return OutlinePolygon(verts, outline.area_px)
