"""Compare the numba kernels with their pure numpy/python twins.

Kernel timings run in-process, calling both forms directly. End-to-end
tracker latency runs once per backend in a subprocess, because the backend
is fixed at import time by DEPTHTRACK_DISABLE_NUMBA.

    python benchmarks/bench_kernels.py [--frames 30] [--repeats 7]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from depthtrack._accel import USE_NUMBA
from depthtrack.synthcam import NoiseSpec, SceneSpec, default_rig, orbit_trajectory, render_scene
from depthtrack.tracker import TrackerConfig, threshold_mask, trim
from depthtrack.tracker import contours, patch, simplify


def measure(func, *args, repeats=7):
    func(*args)  # compile / warm caches
    t = timeit.Timer(lambda: func(*args))
    number, _ = t.autorange()
    return min(t.repeat(repeat=repeats, number=number)) / number * 1e3


def _scene(noise=None):
    spec = SceneSpec()
    rig = default_rig(cam_to_world=orbit_trajectory(spec, 10)[3])
    frame, _ = render_scene(spec, rig, noise or NoiseSpec(1.8, 3.0, 0.005, 1))
    return frame


def kernel_table(repeats):
    frame = _scene()
    cfg = TrackerConfig()
    trimmed, _ = trim(frame)
    mask = threshold_mask(trimmed, cfg)
    outline = max(contours.extract_outlines(mask, cfg.min_region_px), key=lambda o: o.area_px)
    pts = np.ascontiguousarray(outline.vertices, dtype=np.float64)
    i, j = simplify._farthest_pair_py(pts)
    chain = np.ascontiguousarray(pts[i:j + 1])
    depths = np.ascontiguousarray(frame.depths)
    cu, cv = frame.width // 2, frame.height // 2

    def trace_with(tracer):
        return lambda: contours.extract_outlines(mask, cfg.min_region_px, tracer=tracer)

    rows = [
        ("border following", trace_with(contours._trace_nb), trace_with(contours._trace_py)),
        ("farthest pair", lambda: simplify._farthest_pair(pts), lambda: simplify._farthest_pair_np(pts)),
        ("douglas-peucker chain", lambda: simplify._dp_keep(chain, 3.0), lambda: simplify._dp_keep_np(chain, 3.0)),
        ("patch mean 13x13", lambda: patch._patch_sum(depths, cu, cv, 6, 150, 1000),
         lambda: patch._patch_sum_np(depths, cu, cv, 6, 150, 1000)),
    ]
    print(f"outline: {len(pts)} vertices, chain {len(chain)}")
    print(f"{'kernel':<24}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, fast, slow in rows:
        a = measure(fast, repeats=repeats)
        b = measure(slow, repeats=repeats)
        print(f"{name:<24}{a:>12.4f}{b:>12.4f}{b / a:>10.1f}")


def _latency_child(frames):
    from depthtrack.pipeline import locate, warmup

    spec = SceneSpec()
    rig = default_rig()
    poses = orbit_trajectory(spec, frames)
    warmup()
    lat = []
    for k, pose in enumerate(poses):
        r = rig.with_pose(pose)
        frame, _ = render_scene(spec, r, NoiseSpec(1.8, 3.0, 0.005, k))
        lat.append(locate(frame, r).latency_ms)
    print(json.dumps({"numba": USE_NUMBA, "mean": float(np.mean(lat)), "min": float(np.min(lat)),
                      "max": float(np.max(lat))}))


def latency_table(frames):
    print(f"\nend-to-end tracker latency over {frames} noisy orbit frames")
    for flag in ("0", "1"):
        env = dict(os.environ, DEPTHTRACK_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, __file__, "--child", str(frames)], env=env,
                             capture_output=True, text=True, check=True)
        res = json.loads(out.stdout.strip().splitlines()[-1])
        name = "numba" if res["numba"] else "numpy"
        print(f"{name:<8} mean {res['mean']:8.3f} ms   min {res['min']:8.3f}   max {res['max']:8.3f}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=30)
    ap.add_argument("--repeats", type=int, default=7)
    ap.add_argument("--child", type=int, help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        _latency_child(args.child)
        return
    if not USE_NUMBA:
        sys.exit("run the benchmark with numba enabled; it switches backends itself")
    kernel_table(args.repeats)
    latency_table(args.frames)


if __name__ == "__main__":
    main()
