"""Command-line front end.

Subcommands:
  measure  mask + depth + intrinsics -> report.json / report.csv (+ overlay)
  grasp    measure, then rank parallel-gripper grasp candidates
  synth    write a synthetic fixture (mask, depth, intrinsics, ground truth)

Configuration precedence: CLI flags > --config JSON file > built-in defaults.
Exit code is 0 iff a report (or fixture) was produced.
"""

import argparse
import concurrent.futures
import json
import math
import sys
from pathlib import Path

from . import fileio, synth
from .errors import ConfigError, DimensionMismatchError, PipelineError
from .grasp import GraspWeights
from .mask_ops import MaskConfig
from .pipeline import GEOMETRY_MODES, RunConfig, run_grasp, run_measure
from .project import CameraIntrinsics
from .segments import SamplingConfig


def _add_io_args(p):
    p.add_argument("mask", help="binary mask PNG (nonzero = object)")
    p.add_argument("depth", help="depth map: 16-bit mm PNG or raw float32 grid")
    p.add_argument("intrinsics", help="intrinsics JSON {fx, fy, cx, cy, dist}")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--overlay", action="store_true",
                   help="also write an overlay PNG")


def _add_pipeline_args(p):
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--geometry", choices=GEOMETRY_MODES, default=None,
                   help="skeleton mode (default rod)")
    p.add_argument("--stride", type=int, default=None,
                   help="skeleton indices between stations")
    p.add_argument("--slope-offset", type=int, default=None,
                   help="finite-difference half width for local slopes")
    p.add_argument("--depth-gate", type=float, default=None,
                   help="relative depth gate around the station depth")
    p.add_argument("--march-step", type=float, default=None,
                   help="perpendicular march step in pixels")
    p.add_argument("--min-object-size", type=int, default=None)
    p.add_argument("--kernel-size", type=int, default=None)
    p.add_argument("--rdp-epsilon", type=float, default=None)


def _add_grasp_args(p):
    p.add_argument("--weights", default=None,
                   help="grasp weights w1,w2,w3 (must sum to 1)")
    p.add_argument("--top-k", type=int, default=None,
                   help="number of grasp candidates to keep")
    p.add_argument("--window", type=int, default=None,
                   help="diameter smoothing window (odd)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskmeasure",
        description="Dimensional measurement and grasp ranking from a binary "
                    "mask, an aligned depth map, and camera intrinsics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_measure = sub.add_parser("measure", help="measure diameters/length/volume")
    _add_io_args(p_measure)
    _add_pipeline_args(p_measure)
    p_measure.add_argument("--batch", help="JSON manifest of input triplets")
    p_measure.add_argument("--jobs", type=int, default=1,
                           help="parallel workers for --batch")

    p_grasp = sub.add_parser("grasp", help="measure and rank grasp candidates")
    _add_io_args(p_grasp)
    _add_pipeline_args(p_grasp)
    _add_grasp_args(p_grasp)

    p_synth = sub.add_parser("synth", help="write a synthetic fixture")
    p_synth.add_argument("--shape", choices=("cylinder", "bottle"),
                         default="cylinder")
    p_synth.add_argument("--radius", type=float, default=0.02,
                         help="cylinder radius in meters")
    p_synth.add_argument("--height", type=float, default=0.5,
                         help="cylinder height in meters")
    p_synth.add_argument("--tilt-deg", type=float, default=0.0,
                         help="axis tilt in the image plane, degrees")
    p_synth.add_argument("--distance", type=float, default=1.0,
                         help="camera-to-axis distance in meters")
    p_synth.add_argument("--fx", type=float, default=700.0)
    p_synth.add_argument("--image-size", default="640x480",
                         help="WxH in pixels")
    p_synth.add_argument("--noise-sigma", type=float, default=0.0,
                         help="depth noise sigma in meters")
    p_synth.add_argument("--edge-dropout", type=int, default=0,
                         help="missing-depth band width in pixels")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--depth-format", choices=("png", "raw"),
                         default="png")
    p_synth.add_argument("--out", default=".", help="fixture directory")
    return parser


def _pick(*values):
    for v in values:
        if v is not None:
            return v
    return None


def build_run_config(args) -> RunConfig:
    """Merge defaults, an optional config file, and CLI flags."""
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as f:
            file_cfg = json.load(f)
    try:
        mask_cfg = MaskConfig(
            min_object_size=_pick(args.min_object_size,
                                  file_cfg.get("min_object_size"), 64),
            kernel_size=_pick(args.kernel_size, file_cfg.get("kernel_size"), 5),
            rdp_epsilon=_pick(args.rdp_epsilon,
                              file_cfg.get("rdp_epsilon"), 2.0),
        )
        sampling_cfg = SamplingConfig(
            stride=_pick(args.stride, file_cfg.get("stride"), 5),
            slope_offset=_pick(args.slope_offset,
                               file_cfg.get("slope_offset"), 5),
            depth_gate=_pick(args.depth_gate, file_cfg.get("depth_gate"), 0.1),
            march_step=_pick(args.march_step, file_cfg.get("march_step"), 0.5),
        )
        weights_arg = getattr(args, "weights", None)
        if weights_arg is not None:
            parts = [float(x) for x in weights_arg.split(",")]
            if len(parts) != 3:
                raise ConfigError("--weights needs exactly w1,w2,w3")
            weights = GraspWeights(*parts)
        else:
            weights = GraspWeights(*file_cfg.get("weights", (0.35, 0.35, 0.30)))
        return RunConfig(
            geometry=_pick(args.geometry, file_cfg.get("geometry"), "rod"),
            mask=mask_cfg,
            sampling=sampling_cfg,
            weights=weights,
            window=_pick(getattr(args, "window", None),
                         file_cfg.get("window"), 5),
            top_k=_pick(getattr(args, "top_k", None), file_cfg.get("top_k"), 7),
            overlay=bool(getattr(args, "overlay", False)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _load_inputs(mask_path, depth_path, intr_path):
    mask = fileio.read_mask(mask_path)
    depth = fileio.read_depth(depth_path)
    intr = CameraIntrinsics.from_json(intr_path)
    if depth.shape != mask.shape:
        raise DimensionMismatchError(
            f"mask {mask.shape[1]}x{mask.shape[0]} vs depth "
            f"{depth.shape[1]}x{depth.shape[0]}")
    return mask, depth, intr


def _measure_one(mask_path, depth_path, intr_path, cfg: RunConfig, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mask, depth, intr = _load_inputs(mask_path, depth_path, intr_path)
    result = run_measure(mask, depth, intr, cfg)
    fileio.write_report_json(out / "report.json", result.report,
                             result.segments)
    fileio.write_report_csv(out / "report.csv", result.report, result.segments)
    if cfg.overlay:
        overlay = fileio.draw_overlay(result.refined_mask, result.skeleton,
                                      result.segments, result.report)
        import cv2
        cv2.imwrite(str(out / "overlay.png"), overlay)
    return result


def cmd_measure(args) -> int:
    cfg = build_run_config(args)
    if args.batch:
        with open(args.batch) as f:
            jobs = json.load(f)
        failures = 0
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as ex:
            futures = {
                ex.submit(_measure_one, j["mask"], j["depth"], j["intrinsics"],
                          cfg, j.get("out", args.out)): j
                for j in jobs
            }
            for fut, job in futures.items():
                try:
                    fut.result()
                except PipelineError as exc:
                    failures += 1
                    print(f"error [{job['mask']}]: {exc}", file=sys.stderr)
        return 1 if failures else 0
    result = _measure_one(args.mask, args.depth, args.intrinsics, cfg, args.out)
    print(f"length_m={result.report.length:.6f} "
          f"volume_ml={result.report.volume * 1e6:.2f} "
          f"stations={len(result.report.diameters)}")
    return 0


def cmd_grasp(args) -> int:
    cfg = build_run_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mask, depth, intr = _load_inputs(args.mask, args.depth, args.intrinsics)
    result, candidates = run_grasp(mask, depth, intr, cfg)
    fileio.write_report_json(out / "report.json", result.report,
                             result.segments)
    fileio.write_candidates_json(out / "grasp_candidates.json", candidates)
    if cfg.overlay:
        overlay = fileio.draw_overlay(result.refined_mask, result.skeleton,
                                      result.segments, result.report,
                                      candidates)
        import cv2
        cv2.imwrite(str(out / "overlay.png"), overlay)
    best = candidates[0]
    print(f"top candidate: station {best.station_index} score {best.score:.3f}")
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    w, h = (int(x) for x in args.image_size.lower().split("x"))
    intr = CameraIntrinsics(fx=args.fx, fy=args.fx,
                            cx=(w - 1) / 2.0, cy=(h - 1) / 2.0)
    pose = dict(tilt=math.radians(args.tilt_deg), distance=args.distance,
                image_size=(w, h))
    if args.shape == "bottle":
        profile = synth.bottle_profile(**pose)
    else:
        profile = synth.cylinder_profile(args.radius, args.height, **pose)
    mask, depth, gt = synth.render(profile, intr)
    depth = synth.perturb(depth, args.noise_sigma, args.edge_dropout,
                          seed=args.seed)
    fileio.write_mask(out / "mask.png", mask)
    depth_name = "depth.png" if args.depth_format == "png" else "depth.raw"
    fileio.write_depth(out / depth_name, depth)
    intr.to_json(out / "intrinsics.json")
    gt.to_json(out / "ground_truth.json")
    print(f"fixture written to {out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"measure": cmd_measure, "grasp": cmd_grasp,
               "synth": cmd_synth}[args.command]
    try:
        return handler(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
