"""Evaluation quantities: corner error, Dice, Random error, latency aggregates, patch-size sweep."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .depthio import CameraRig, DepthFrame
from .errors import DepthTrackError, InvalidConfigError
from .synthcam import SceneTruth


@dataclass(frozen=True, eq=False)
class MetricsRecord:
    """Population aggregates of a list of per-frame values."""

    mean: float
    sd: float
    min: float
    max: float
    values: tuple = ()

    @property
    def n(self) -> int:
        return len(self.values)

    @classmethod
    def of(cls, values) -> "MetricsRecord":
        v = np.asarray(list(values), dtype=np.float64)
        if v.size == 0:
            raise InvalidConfigError("cannot aggregate an empty sample")
        mean = float(v.mean())
        sd = float(np.sqrt(np.mean((v - mean) ** 2)))
        lo, hi = float(v.min()), float(v.max())
        # keep min <= mean <= max exact in the face of rounding
        mean = min(max(mean, lo), hi)
        return cls(mean, sd, lo, hi, tuple(float(x) for x in v))

    def as_dict(self) -> dict:
        return {"mean": self.mean, "sd": self.sd, "min": self.min, "max": self.max, "n": self.n}


def latency_stats(samples) -> MetricsRecord:
    return MetricsRecord.of(samples)


# ---------------------------------------------------------------------------
# corner error

def _alignments(n: int = 4):
    for shift in range(n):
        base = [(shift + k) % n for k in range(n)]
        yield base
        yield [base[0]] + base[:0:-1]


def align_corners(tracked, truth) -> list[int]:
    """Ordering of ``tracked`` (one of the 8 quad symmetries) closest to ``truth``."""
    a = np.asarray(tracked, dtype=np.float64)
    b = np.asarray(truth, dtype=np.float64)
    best, best_cost = None, np.inf
    for perm in _alignments(len(a)):
        cost = float(np.linalg.norm(a[perm] - b, axis=1).sum())
        if cost < best_cost - 1e-12:
            best, best_cost = perm, cost
    return best


def corner_error(tracked, truth) -> tuple[np.ndarray, float]:
    """Per-corner Euclidean distances after alignment, and their mean."""
    a = np.asarray(tracked, dtype=np.float64)
    b = np.asarray(truth, dtype=np.float64)
    perm = align_corners(a, b)
    d = np.linalg.norm(a[perm] - b, axis=1)
    return d, float(d.mean())


# ---------------------------------------------------------------------------
# Dice

def _as_set(x):
    if isinstance(x, (set, frozenset)):
        return x
    arr = np.asarray(x)
    if arr.dtype == bool:
        return None
    return {tuple(np.atleast_1d(p).tolist()) for p in arr}


def dice(a, b) -> float:
    """``2|A & B| / (|A| + |B|)`` for two boolean masks of equal shape or two sets.

    Two empty sets score 1.0.
    """
    sa, sb = _as_set(a), _as_set(b)
    if sa is None or sb is None:
        ma = np.asarray(a, dtype=bool)
        mb = np.asarray(b, dtype=bool)
        if ma.shape != mb.shape:
            raise InvalidConfigError(f"mask shapes differ: {ma.shape} vs {mb.shape}")
        inter = int(np.count_nonzero(ma & mb))
        total = int(np.count_nonzero(ma)) + int(np.count_nonzero(mb))
    else:
        inter = len(sa & sb)
        total = len(sa) + len(sb)
    if total == 0:
        return 1.0
    return 2.0 * inter / total


def polygon_mask(shape, polygon) -> np.ndarray:
    """Pixels whose centres lie inside (or on) ``polygon`` given as ``(x, y)`` vertices."""
    h, w = shape
    poly = np.asarray(polygon, dtype=np.float64)
    x0 = max(int(np.floor(poly[:, 0].min())), 0)
    x1 = min(int(np.ceil(poly[:, 0].max())), w - 1)
    y0 = max(int(np.floor(poly[:, 1].min())), 0)
    y1 = min(int(np.ceil(poly[:, 1].max())), h - 1)
    out = np.zeros((h, w), dtype=bool)
    if x1 < x0 or y1 < y0:
        return out
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1].astype(np.float64)
    inside = np.zeros(xs.shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        crosses = (ay > ys) != (by > ys)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (ys - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (xs < xint)
    out[y0:y1 + 1, x0:x1 + 1] = inside
    return out


def corner_segmentation(frame: DepthFrame, pixel_corners) -> np.ndarray:
    """Points of the frame's cloud (nonzero pixels) inside the tracked quad."""
    return polygon_mask(frame.depths.shape, pixel_corners) & (frame.depths != 0)


def truth_segmentation(frame: DepthFrame, truth: SceneTruth) -> np.ndarray:
    """Points of the frame's cloud that belong to the plate."""
    return truth.po_mask & (frame.depths != 0)


# ---------------------------------------------------------------------------
# Random error

@dataclass(frozen=True, eq=False)
class DepthSeries:
    frames: np.ndarray  # (N, H, W)
    mask: np.ndarray  # (H, W) bool

    def __post_init__(self):
        frames = self.frames
        if isinstance(frames, (list, tuple)):
            frames = np.stack([getattr(f, "depths", f) for f in frames])
        frames = np.asarray(frames)
        mask = np.asarray(self.mask, dtype=bool)
        if frames.ndim != 3 or frames.shape[0] < 2:
            raise InvalidConfigError("a depth series needs at least two frames of equal size")
        if mask.shape != frames.shape[1:]:
            raise InvalidConfigError(f"mask shape {mask.shape} does not match frames {frames.shape[1:]}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "mask", mask)


@dataclass(frozen=True, eq=False)
class RandomErrorReport:
    per_pixel: np.ndarray  # (H, W) mm, NaN outside the mask
    mean: float
    sd: float
    min: float
    max: float


def random_error(series: DepthSeries) -> RandomErrorReport:
    """Per-pixel population standard deviation over the series, aggregated over the mask."""
    if not series.mask.any():
        raise InvalidConfigError("random error needs a non-empty mask")
    d = series.frames[:, series.mask].astype(np.float64)
    mean = d.mean(axis=0)
    err = np.sqrt(((d - mean) ** 2).mean(axis=0))
    per_pixel = np.full(series.mask.shape, np.nan)
    per_pixel[series.mask] = err
    agg = MetricsRecord.of(err)
    return RandomErrorReport(per_pixel, agg.mean, agg.sd, agg.min, agg.max)


# ---------------------------------------------------------------------------
# patch-size sweep

DEFAULT_PATCH_SIZES = (1, 3, 5, 7, 9, 11, 13)


@dataclass(frozen=True, eq=False)
class SweepRecord:
    patch_size: int
    frame_id: str
    latency_ms: float
    mean_corner_err_mm: float
    dice: float
    error_code: str
    patch_work: int  # pixels visited by depth sampling, all four corners


@dataclass(frozen=True, eq=False)
class SweepRow:
    patch_size: int
    latency: MetricsRecord | None
    accuracy: MetricsRecord | None
    dice: MetricsRecord | None
    patch_work: float  # mean pixels visited per sampled corner
    failures: dict = field(default_factory=dict)


def evaluate_frame(frame, truth, rig, cfg, frame_id: str = "") -> tuple[SweepRecord, object]:
    """Track one frame against its truth; errors become an ``error_code``."""
    from .pipeline import locate

    try:
        target = locate(frame, rig, cfg)
    except DepthTrackError as exc:
        return SweepRecord(cfg.patch_size, frame_id, float("nan"), float("nan"), float("nan"), exc.code, 0), None
    _, err = corner_error(target.world_corners, truth.world_corners)
    seg = corner_segmentation(frame, target.pixel_corners)
    score = dice(seg, truth_segmentation(frame, truth))
    return SweepRecord(cfg.patch_size, frame_id, target.latency_ms, err, score, "ok", target.track.patch_work), target


def patch_sweep(samples: Sequence, rig: CameraRig | Sequence[CameraRig], sizes=DEFAULT_PATCH_SIZES,
                cfg=None, repeats: int = 1, frame_ids=None):
    """Run the tracker at every patch size over ``(frame, truth)`` samples.

    ``rig`` may be one rig or one per frame. Sizes are interleaved per frame,
    in an order rotated by one position each frame, and each measurement is
    the fastest of ``repeats`` runs, so slow drift, cache warmth and
    scheduler noise hit every size alike. Returns
    ``(rows ascending by size, per-frame records)``; failed frames are
    counted per code and left out of the aggregates.
    """
    from .tracker import TrackerConfig

    sizes = sorted(int(s) for s in sizes)
    if not sizes or any(s < 1 or s % 2 == 0 for s in sizes):
        raise InvalidConfigError(f"patch sizes must be odd and >= 1, got {sizes}")
    base = cfg or TrackerConfig()
    cfgs = {s: base.updated(patch_size=s) for s in sizes}
    samples = list(samples)
    rigs = list(rig) if isinstance(rig, (list, tuple)) else [rig] * len(samples)
    ids = list(frame_ids) if frame_ids is not None else [f"{i:04d}" for i in range(len(samples))]
    per_size = {s: [] for s in sizes}
    for i, (frame, truth) in enumerate(samples):
        k = i % len(sizes)
        for s in sizes[k:] + sizes[:k]:
            best = None
            for _ in range(max(1, repeats)):
                rec, _ = evaluate_frame(frame, truth, rigs[i], cfgs[s], ids[i])
                if best is None or rec.latency_ms < best.latency_ms:
                    best = rec
            per_size[s].append(best)
    rows = []
    records = []
    for s in sizes:
        recs = per_size[s]
        records.extend(recs)
        ok = [r for r in recs if r.error_code == "ok"]
        fails = {}
        for r in recs:
            if r.error_code != "ok":
                fails[r.error_code] = fails.get(r.error_code, 0) + 1
        rows.append(SweepRow(
            s,
            MetricsRecord.of(r.latency_ms for r in ok) if ok else None,
            MetricsRecord.of(r.mean_corner_err_mm for r in ok) if ok else None,
            MetricsRecord.of(r.dice for r in ok) if ok else None,
            sum(r.patch_work for r in ok) / (4.0 * len(ok)) if ok else 0.0,
            fails,
        ))
    return rows, records


def timed(fn, *args, **kwargs):
    """``(result, elapsed_ms)`` of one call, on the monotonic clock."""
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, (time.perf_counter() - t0) * 1e3
