"""Command-line front end: ``depthtrack synth|track|sweep|randerr|baseline|rerun``.

Every run writes one manifest next to its outputs: ``manifest.json`` in the
``synth`` output directory, ``<out stem>.manifest.json`` for the commands
that write a single result file. The manifest holds
the argv, working directory and resolved settings needed to repeat the run,
plus a digest of every output. Wall-clock fields (latency, elapsed time)
are listed as volatile and blanked, in CSV columns and JSON keys alike,
before digesting, so ``rerun --check``
can confirm that everything else came out bit-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend_name
from .baselines import evaluate_baselines
from .depthio import CameraRig, load_camera_rig, load_depth_frame, save_camera_rig, save_depth_frame
from .errors import DepthTrackError, InvalidConfigError
from .metrics import DEFAULT_PATCH_SIZES, DepthSeries, corner_error, corner_segmentation, dice, patch_sweep
from .metrics import random_error, truth_segmentation
from .pipeline import locate, warmup
from .synthcam import (NoiseSpec, SceneSpec, default_rig, load_scene_spec, load_truth, orbit_trajectory,
                       render_scene, save_truth, static_pose)
from .tracker import TrackerConfig, load_tracker_config

MANIFEST = "manifest.json"
EXIT_USAGE = 2

TRACK_COLUMNS = (
    ["frame", "error_code"]
    + [f"{a}{i}" for i in range(4) for a in ("u", "v")]
    + [f"d{i}" for i in range(4)]
    + [f"w{a}{i}" for i in range(4) for a in ("x", "y", "z")]
    + ["cx", "cy", "cz", "nx", "ny", "nz", "width_mm", "height_mm", "rms_planarity_mm", "latency_ms",
       "corner_err_mm", "pixel_err_px", "dice"]
)
SWEEP_COLUMNS = ["patch_size", "frame_id", "latency_ms", "mean_corner_err_mm", "dice", "error_code"]
BASELINE_COLUMNS = ["method", "frame", "accuracy_value", "accuracy_kind", "elapsed_ms", "error_code"]
VOLATILE = {"latency_ms", "elapsed_ms"}


class UsageError(Exception):
    pass


def sub_seed(seed: int, index: int, purpose: str) -> int:
    """Stable 63-bit seed for one ``(seed, index, purpose)`` triple."""
    digest = hashlib.blake2b(f"{seed}:{index}:{purpose}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    x = float(x)
    if not np.isfinite(x):
        return ""
    return repr(x)


def _write_csv(path: Path, columns, rows) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
    os.replace(tmp, path)


def _write_json(path: Path, doc) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _blank_volatile(doc):
    if isinstance(doc, dict):
        return {k: None if k in VOLATILE else _blank_volatile(v) for k, v in doc.items()}
    if isinstance(doc, list):
        return [_blank_volatile(v) for v in doc]
    return doc


def stable_digest(path) -> str:
    """SHA-256 of a file, with volatile CSV columns and JSON keys blanked."""
    path = Path(path)
    data = path.read_bytes()
    if path.suffix == ".json":
        doc = _blank_volatile(json.loads(data))
        data = json.dumps(doc, indent=2, sort_keys=True).encode()
    if path.suffix == ".csv":
        rows = list(csv.reader(io.StringIO(data.decode())))
        if rows:
            drop = {i for i, name in enumerate(rows[0]) if name in VOLATILE}
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(rows[0])
            for r in rows[1:]:
                w.writerow(["" if i in drop else v for i, v in enumerate(r)])
            data = buf.getvalue().encode()
    return hashlib.sha256(data).hexdigest()


def _list_frames(frames_dir: Path):
    if not frames_dir.is_dir():
        raise UsageError(f"frames directory not found: {frames_dir}")
    frames = sorted(p for p in frames_dir.glob("*.pgm") if not p.name.endswith(".mask.pgm"))
    if not frames:
        raise UsageError(f"no .pgm frames in {frames_dir}")
    return frames


def _sidecar(frame_path: Path, suffix: str) -> Path:
    return frame_path.with_name(frame_path.stem + suffix)


def _frame_rig(frame_path: Path, rig: CameraRig) -> CameraRig:
    side = _sidecar(frame_path, ".rig.json")
    return load_camera_rig(side) if side.exists() else rig


def _load_rig(path) -> CameraRig:
    return default_rig() if path is None else load_camera_rig(path)


def _tracker_config(args) -> TrackerConfig:
    cfg = load_tracker_config(args.config) if args.config else TrackerConfig()
    return cfg.updated(
        patch_size=getattr(args, "patch", None),
        threshold_lo=args.threshold_lo,
        threshold_hi=args.threshold_hi,
        min_region_px=args.min_region,
        simplify_epsilon=args.epsilon,
    )


class Run:
    """Collects outputs and error tallies, then writes the manifest."""

    def __init__(self, command: str, argv, manifest_path: Path, seed):
        self.command = command
        self.argv = list(argv)
        self.manifest_path = manifest_path
        self.seed = seed
        self.outputs: list[Path] = []
        self.errors: dict[str, int] = {}
        self.config: dict = {}

    def output(self, path: Path) -> Path:
        self.outputs.append(path)
        return path

    def tally(self, code: str) -> None:
        if code != "ok":
            self.errors[code] = self.errors.get(code, 0) + 1

    def finish(self) -> Path:
        doc = {
            "command": self.command,
            "argv": self.argv,
            "cwd": os.getcwd(),
            "seed": self.seed,
            "version": __version__,
            "backend": backend_name(),
            "config": self.config,
            "outputs": {str(p): stable_digest(p) for p in self.outputs},
            "volatile_columns": sorted(VOLATILE),
            "error_tally": dict(sorted(self.errors.items())),
        }
        _write_json(self.manifest_path, doc)
        return self.manifest_path


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _file_run(command: str, argv, out: Path, seed) -> "Run":
    """Run whose outputs sit beside ``out``; its manifest is ``<stem>.manifest.json``."""
    _out_dir(out.parent)
    return Run(command, argv, out.with_name(out.stem + ".manifest.json"), seed)


# ---------------------------------------------------------------------------
# commands

def cmd_synth(args, argv) -> int:
    if args.frames < 1:
        raise UsageError("--frames must be >= 1")
    spec = load_scene_spec(args.scene) if args.scene else SceneSpec()
    rig = _load_rig(args.rig)
    base_noise = NoiseSpec(args.sigma, args.boundary_scale, args.dropout, 0)
    out = _out_dir(args.out)
    run = Run("synth", argv, out / MANIFEST, args.seed)
    if args.trajectory == "orbit":
        poses = orbit_trajectory(spec, args.frames, args.min_range, args.max_range)
    else:
        poses = [static_pose(spec, args.distance, args.height)] * args.frames
    run.config = {"scene": spec.to_dict(), "rig": rig.to_dict(), "noise": base_noise.to_dict(),
                  "frames": args.frames, "trajectory": args.trajectory}
    width = max(4, len(str(args.frames - 1)))
    for i, pose in enumerate(poses):
        name = f"frame_{i:0{width}d}"
        frig = rig.with_pose(pose)
        noise = NoiseSpec(args.sigma, args.boundary_scale, args.dropout, sub_seed(args.seed, i, "noise"))
        try:
            frame, truth = render_scene(spec, frig, noise)
        except DepthTrackError as exc:
            run.tally(exc.code)
            print(f"{name}: {exc}", file=sys.stderr)
            continue
        save_depth_frame(frame, run.output(out / f"{name}.pgm"))
        save_truth(truth, run.output(out / f"{name}.truth.json"), run.output(out / f"{name}.mask.pgm"))
        save_camera_rig(frig, run.output(out / f"{name}.rig.json"))
    run.finish()
    return 0


def _track_row(name, frame, target, truth, rig):
    row = {"frame": name, "error_code": "ok", "latency_ms": target.latency_ms}
    for i in range(4):
        row[f"u{i}"], row[f"v{i}"] = target.pixel_corners[i]
        row[f"d{i}"] = target.depths[i]
        row[f"wx{i}"], row[f"wy{i}"], row[f"wz{i}"] = target.world_corners[i]
    pose = target.pose
    row["cx"], row["cy"], row["cz"] = pose.center
    row["nx"], row["ny"], row["nz"] = pose.normal
    row["width_mm"], row["height_mm"] = pose.extents
    row["rms_planarity_mm"] = pose.rms_planarity
    if truth is not None:
        row["corner_err_mm"] = corner_error(target.world_corners, truth.world_corners)[1]
        row["pixel_err_px"] = corner_error(target.pixel_corners, truth.pixel_corners)[1]
        row["dice"] = dice(corner_segmentation(frame, target.pixel_corners), truth_segmentation(frame, truth))
    return row


def cmd_track(args, argv) -> int:
    cfg = _tracker_config(args)
    rig = _load_rig(args.rig)
    paths = _list_frames(Path(args.frames_dir))
    out = Path(args.out)
    run = _file_run("track", argv, out, args.seed)
    run.config = {"tracker": cfg.to_dict(), "rig": rig.to_dict()}
    warmup(cfg)
    rows = []
    for path in paths:
        name = path.stem
        try:
            frame = load_depth_frame(path)
            frig = _frame_rig(path, rig)
            truth_path = _sidecar(path, ".truth.json")
            truth = load_truth(truth_path) if truth_path.exists() else None
            target = locate(frame, frig, cfg)
            row = _track_row(name, frame, target, truth, frig)
        except DepthTrackError as exc:
            row = {"frame": name, "error_code": exc.code}
        run.tally(row["error_code"])
        rows.append(row)
    _write_csv(run.output(out), TRACK_COLUMNS, rows)
    run.finish()
    return 0


def _load_samples(paths, rig):
    samples, rigs, ids = [], [], []
    for path in paths:
        truth_path = _sidecar(path, ".truth.json")
        if not truth_path.exists():
            raise UsageError(f"{path.name}: missing truth sidecar {truth_path.name}")
        samples.append((load_depth_frame(path), load_truth(truth_path)))
        rigs.append(_frame_rig(path, rig))
        ids.append(path.stem)
    return samples, rigs, ids


def _parse_sizes(text: str):
    try:
        sizes = sorted({int(s) for s in text.split(",") if s.strip()})
    except ValueError:
        raise UsageError(f"bad --sizes value {text!r}")
    if not sizes or any(s < 1 or s % 2 == 0 for s in sizes):
        raise UsageError(f"patch sizes must be odd and >= 1, got {text!r}")
    return sizes


def cmd_sweep(args, argv) -> int:
    sizes = _parse_sizes(args.sizes)
    cfg = _tracker_config(args)
    rig = _load_rig(args.rig)
    samples, rigs, ids = _load_samples(_list_frames(Path(args.frames_dir)), rig)
    out = Path(args.out)
    run = _file_run("sweep", argv, out, args.seed)
    run.config = {"tracker": cfg.to_dict(), "sizes": sizes, "repeats": args.repeats}
    warmup(cfg)
    rows, records = patch_sweep(samples, rigs, sizes, cfg, args.repeats, ids)
    for rec in records:
        run.tally(rec.error_code)
    _write_csv(run.output(out), SWEEP_COLUMNS, [
        {"patch_size": str(r.patch_size), "frame_id": r.frame_id, "latency_ms": r.latency_ms,
         "mean_corner_err_mm": r.mean_corner_err_mm, "dice": r.dice, "error_code": r.error_code}
        for r in records])
    summary = []
    for row in rows:
        summary.append({
            "patch_size": row.patch_size,
            "latency_ms": row.latency.as_dict() if row.latency else None,
            "corner_err_mm": row.accuracy.as_dict() if row.accuracy else None,
            "dice": row.dice.as_dict() if row.dice else None,
            "patch_work": row.patch_work,
            "failures": row.failures,
        })
    _write_json(run.output(out.with_name(out.stem + ".summary.json")), {"rows": summary})
    run.finish()
    return 0


def cmd_randerr(args, argv) -> int:
    paths = _list_frames(Path(args.frames_dir))
    if len(paths) < 2:
        raise UsageError("random error needs at least 2 frames")
    mask = load_depth_frame(args.mask).depths != 0
    frames = [load_depth_frame(p).depths for p in paths]
    try:
        report = random_error(DepthSeries(np.stack(frames), mask))
    except InvalidConfigError as exc:
        raise UsageError(str(exc))
    out = Path(args.out)
    run = _file_run("randerr", argv, out, args.seed)
    run.config = {"frames": len(frames), "mask": str(args.mask), "mask_pixels": int(mask.sum())}
    map_path = out.with_name(out.stem + ".npy")
    np.save(run.output(map_path), report.per_pixel)
    _write_json(run.output(out), {
        "frames": len(frames),
        "mask_pixels": int(mask.sum()),
        "mean_mm": report.mean,
        "sd_mm": report.sd,
        "min_mm": report.min,
        "max_mm": report.max,
        "per_pixel_map": map_path.name,
    })
    run.finish()
    return 0


def cmd_baseline(args, argv) -> int:
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    bad = [m for m in methods if m not in ("icp", "ransac", "tracker")]
    if not methods or bad:
        raise UsageError(f"--method takes icp, ransac and/or tracker, got {args.method!r}")
    spec = load_scene_spec(args.scene) if args.scene else SceneSpec()
    cfg = _tracker_config(args)
    rig = _load_rig(args.rig)
    samples, rigs, ids = _load_samples(_list_frames(Path(args.frames_dir)), rig)
    out = Path(args.out)
    run = _file_run("baseline", argv, out, args.seed)
    run.config = {"methods": methods, "scene": spec.to_dict(), "icp_init": args.icp_init,
                  "ransac_threshold": args.ransac_threshold, "ransac_iterations": args.ransac_iterations,
                  "tracker": cfg.to_dict()}
    warmup(cfg)
    rows = []
    for i, ((frame, truth), frig) in enumerate(zip(samples, rigs)):
        rows.extend(evaluate_baselines([frame], [truth], [frig], spec, methods, args.icp_init,
                                       args.ransac_threshold, args.ransac_iterations,
                                       sub_seed(args.seed, i, "baseline"), [ids[i]], cfg))
    for r in rows:
        run.tally(r.error_code)
    _write_csv(run.output(out), BASELINE_COLUMNS, [
        {"method": r.method, "frame": r.frame, "accuracy_value": r.accuracy_value,
         "accuracy_kind": r.accuracy_kind, "elapsed_ms": r.elapsed_ms, "error_code": r.error_code}
        for r in rows])
    run.finish()
    return 0


def cmd_rerun(args, argv) -> int:
    path = Path(args.manifest)
    try:
        doc = json.loads(path.read_text())
        recorded, cwd = doc["argv"], doc["cwd"]
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}")
    expected = dict(doc.get("outputs", {}))
    prev = os.getcwd()
    os.chdir(cwd)
    try:
        code = main(recorded)
        if code != 0 or not args.check:
            return code
        bad = [p for p, digest in expected.items() if not Path(p).exists() or stable_digest(p) != digest]
    finally:
        os.chdir(prev)
    for p in bad:
        print(f"mismatch: {p}", file=sys.stderr)
    print(f"{len(expected) - len(bad)}/{len(expected)} outputs reproduced")
    return 1 if bad else 0


# ---------------------------------------------------------------------------
# argument parsing

def _common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--rig", help="rig JSON (default: built-in 488x450 rig)")
    p.add_argument("--out", required=True, help=out_help)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="tracker config JSON")


def _tracker_flags(p: argparse.ArgumentParser, patch: bool = True) -> None:
    if patch:
        p.add_argument("--patch", type=int, help="patch size (odd)")
    p.add_argument("--threshold-lo", type=int)
    p.add_argument("--threshold-hi", type=int)
    p.add_argument("--min-region", type=int)
    p.add_argument("--epsilon", type=float, help="simplification tolerance in px")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="depthtrack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render synthetic frames with ground truth")
    _common(p, "output directory")
    p.add_argument("--scene", help="scene spec JSON (default: 300x240 mm plate with arm)")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--boundary-scale", type=float, default=1.0)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--trajectory", choices=("orbit", "static"), default="orbit")
    p.add_argument("--min-range", type=float, default=300.0)
    p.add_argument("--max-range", type=float, default=900.0)
    p.add_argument("--distance", type=float, default=500.0, help="static trajectory range")
    p.add_argument("--height", type=float, default=142.0, help="static camera height above the plate centre")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("track", help="track every frame in a directory")
    _common(p, "results CSV")
    p.add_argument("--frames-dir", required=True)
    _tracker_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("sweep", help="patch-size sweep")
    _common(p, "sweep CSV")
    p.add_argument("--frames-dir", required=True)
    p.add_argument("--sizes", default=",".join(str(s) for s in DEFAULT_PATCH_SIZES))
    p.add_argument("--repeats", type=int, default=3, help="timing repeats per measurement (fastest kept)")
    _tracker_flags(p, patch=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("randerr", help="per-pixel random error over a static series")
    _common(p, "report JSON (a .npy map is written beside it)")
    p.add_argument("--frames-dir", required=True)
    p.add_argument("--mask", required=True, help="0/1 PGM region of interest")
    p.set_defaults(func=cmd_randerr)

    p = sub.add_parser("baseline", help="ICP / RANSAC / tracker comparison")
    _common(p, "comparison CSV")
    p.add_argument("--frames-dir", required=True)
    p.add_argument("--method", default="icp,ransac,tracker", help="comma list of icp, ransac, tracker")
    p.add_argument("--scene", help="scene spec JSON used to build the ICP model")
    p.add_argument("--icp-init", choices=("truth", "perturbed"), default="truth")
    p.add_argument("--ransac-threshold", type=float, default=10.0)
    p.add_argument("--ransac-iterations", type=int, default=200)
    _tracker_flags(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("rerun", help="repeat a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--check", action="store_true", help="compare outputs against the manifest digests")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except (UsageError, InvalidConfigError) as exc:
        parser.error(str(exc))
    except (DepthTrackError, OSError, ValueError) as exc:
        # unreadable or invalid inputs: nothing was processed
        print(f"depthtrack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
