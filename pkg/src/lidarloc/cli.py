"""Command-line entry point: dataset prep, rendering, refinement, evaluation.

All subcommands are deterministic under fixed seeds; artifact files are
written atomically (temp + rename) and timestamps can be suppressed with
--no-timestamp so repeated runs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import kitti, synthetic
from .config import ConfigError, RunConfig, parse_config_text, parse_stage_schedule
from .evaluation import (
    REFERENCE_GPU_TIMINGS_MS,
    benchmark,
    plot_error_pdfs,
    summarize,
    write_summary_csv,
    write_summary_json,
)
from .pointmap import CropSpec, PointCloudMap, load_map, save_map, voxel_downsample
from .projection import (
    DepthImage,
    depth_overlay_rgb,
    depth_to_png_bytes,
    project,
    save_depth_raw,
)
from .occlusion import occlusion_filter
from .refine import (
    GridSearchRegressor,
    IdentityRegressor,
    OracleRegressor,
    RenderSettings,
    SearchGrid,
    SpoolRegressor,
    json_dump_trace,
    refine,
    write_atomic,
)
from .se3 import (
    pose_error,
    pose_from_kitti_line,
    pose_to_kitti_line,
    sample_init_pose,
)


def _write_text_atomic(path: Path, text: str) -> None:
    write_atomic(path, text.encode())


def _write_csv_atomic(path: Path, rows) -> None:
    lines = [",".join(str(v) for v in row) for row in rows]
    _write_text_atomic(path, "\n".join(lines) + "\n")


def _load_config(args) -> RunConfig:
    mapping = {}
    if args.config:
        mapping = parse_config_text(Path(args.config).read_text())
    # flag overrides, only when explicitly given
    overrides = {
        "dataset": args.dataset,
        "sequence": args.sequence,
        "map_resolution": args.map_resolution,
        "crop_forward": args.crop_forward,
        "crop_lateral": args.crop_lateral,
        "crop_vertical": args.crop_vertical,
        "occlusion_window": args.occlusion_window,
        "occlusion_th": args.occlusion_th,
        "noise_t": args.noise_t,
        "noise_r_deg": args.noise_r,
        "regressor": args.regressor,
        "seed": args.seed,
        "jobs": args.jobs,
        "out": args.out,
        "frames": getattr(args, "frames", None),
    }
    for key, value in overrides.items():
        if value is not None:
            mapping[key] = str(value)
    if getattr(args, "synthetic", False):
        mapping["synthetic"] = "true"
    if getattr(args, "no_occlusion", False):
        mapping["occlusion"] = "off"
    if args.stages:
        stage_map = parse_config_text(Path(args.stages).read_text())
        mapping.update(stage_map)
    cfg = RunConfig.from_mapping(mapping)
    cfg.timestamp = not getattr(args, "no_timestamp", False)
    return cfg


def _scene_and_camera(cfg: RunConfig):
    if cfg.synthetic:
        return synthetic.synthetic_scene(resolution=cfg.map_resolution), synthetic.synthetic_camera()
    raise ConfigError("synthetic", "this subcommand currently requires --synthetic or --map")


def _load_cloud(cfg: RunConfig, map_path: str | None) -> PointCloudMap:
    if map_path:
        return load_map(map_path)
    if cfg.synthetic:
        return synthetic.synthetic_scene(resolution=cfg.map_resolution)
    raise ConfigError("map", "need --map FILE or --synthetic")


def _gt_poses(cfg: RunConfig):
    return synthetic.synthetic_gt_poses(cfg.frames)


def _build_regressors(cfg: RunConfig, cloud, camera, h_gt):
    """Regressor bindings for one frame; returns (mapping, frame_content)."""
    name = cfg.regressor
    settings_frame = None
    if name == "identity":
        reg = IdentityRegressor()
    elif name.startswith("oracle"):
        contraction = float(name.split(":", 1)[1]) if ":" in name else 0.0
        reg = OracleRegressor(h_gt, contraction)
    elif name == "grid":
        reg = None  # per-stage grids below
        settings_frame = project(cloud, h_gt, camera, cfg.z_near)
    elif name.startswith("external:"):
        reg = SpoolRegressor(name.split(":", 1)[1])
        view = project(cloud, h_gt, camera, cfg.z_near)
        from PIL import Image

        settings_frame = Image.fromarray(depth_overlay_rgb(view))
    else:
        raise ConfigError("regressor", f"unknown regressor {name!r}")

    if reg is not None:
        return {s.regressor: reg for s in cfg.stages}, settings_frame

    regs = {}
    for stage in cfg.stages:
        grid = SearchGrid(
            (stage.max_translation,) * 3 + (stage.max_rotation,) * 3,
            (3, 3, 3, 3, 3, 3),
        )
        regs[stage.regressor] = GridSearchRegressor(cloud, camera, grid, cfg.crop, cfg.z_near)
    return regs, settings_frame


# --- subcommands ----------------------------------------------------------------


def cmd_build_map(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.synthetic:
        cloud = synthetic.synthetic_scene(resolution=cfg.map_resolution)
    else:
        root = cfg.resolve_dataset()
        paths = kitti.SequencePaths(root, cfg.sequence)
        paths.validate()
        scan_paths = paths.scan_paths()
        if args.max_scans:
            scan_paths = scan_paths[: args.max_scans]
        scans = [kitti.read_velodyne_file(p) for p in scan_paths]
        poses = kitti.read_poses_file(paths.poses_path)[: len(scans)]
        cloud = kitti.build_map(scans, poses, cfg.map_resolution)
    map_path = out_dir / "map.bin"
    save_map(cloud, map_path)
    print(f"wrote {map_path} ({len(cloud)} points)")
    return 0


def cmd_render(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cloud = _load_cloud(cfg, args.map)
    camera = synthetic.synthetic_camera()
    if args.pose_line:
        pose = pose_from_kitti_line(args.pose_line)
    else:
        pose = _gt_poses(cfg)[args.frame_index]
    from .pointmap import crop_local

    view = project(crop_local(cloud, pose, cfg.crop), pose, camera, cfg.z_near, cfg.jobs)
    if cfg.occlusion is not None:
        view = occlusion_filter(view, cfg.occlusion)
    write_atomic(out_dir / "render.png", depth_to_png_bytes(view))
    save_depth_raw(view, out_dir / "render.raw")
    from PIL import Image
    import io

    overlay = Image.fromarray(depth_overlay_rgb(view))
    buf = io.BytesIO()
    overlay.save(buf, format="PNG")
    write_atomic(out_dir / "overlay.png", buf.getvalue())
    print(f"wrote {out_dir}/render.png ({view.nonzero_count()} returns)")
    return 0


def cmd_perturb(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    gt = _gt_poses(cfg)
    inits, errors = [], []
    for i, h_gt in enumerate(gt):
        h_init = sample_init_pose(h_gt, cfg.noise, cfg.seed + i)
        inits.append(h_init)
        errors.append(pose_error(h_gt, h_init))
    _write_text_atomic(out_dir / "init_poses.txt", "\n".join(pose_to_kitti_line(h) for h in inits) + "\n")
    rows = [["frame", "longitudinal", "lateral", "vertical", "roll", "pitch", "yaw"]]
    rows += [[i, *[repr(float(v)) for v in e]] for i, e in enumerate(errors)]
    _write_csv_atomic(out_dir / "init_errors.csv", rows)
    summary = summarize(np.array(errors))
    write_summary_json(summary, out_dir / "summary.json", timestamp=cfg.timestamp)
    write_summary_csv(summary, out_dir / "summary.csv")
    print(f"wrote {out_dir}/init_poses.txt ({len(inits)} poses)")
    return 0


def cmd_refine(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cloud = _load_cloud(cfg, args.map)
    camera = synthetic.synthetic_camera()
    gt = _gt_poses(cfg)
    settings = RenderSettings(cfg.crop, cfg.occlusion, cfg.z_near, workers=1)

    def run_frame(i: int):
        h_gt = gt[i]
        h_init = sample_init_pose(h_gt, cfg.noise, cfg.seed + i)
        regressors, frame = _build_regressors(cfg, cloud, camera, h_gt)
        final, trace = refine(h_init, frame, cloud, camera, cfg.stages, regressors, settings, h_gt=h_gt)
        return i, final, trace

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = sorted(pool.map(run_frame, range(cfg.frames)))
    else:
        results = [run_frame(i) for i in range(cfg.frames)]

    final_errors = []
    final_lines = []
    for i, final, trace in results:
        _write_csv_atomic(out_dir / f"trace_{i:04d}.csv", trace.csv_rows())
        json_dump_trace(trace, out_dir / f"trace_{i:04d}.json")
        final_errors.append(trace.entries[-1].error)
        final_lines.append(pose_to_kitti_line(final))
    _write_text_atomic(out_dir / "final_poses.txt", "\n".join(final_lines) + "\n")
    summary = summarize(np.array(final_errors))
    write_summary_json(summary, out_dir / "summary.json", timestamp=cfg.timestamp)
    write_summary_csv(summary, out_dir / "summary.csv")
    print(f"refined {cfg.frames} frames -> {out_dir}/summary.json")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_dir = Path(args.traces)
    trace_files = sorted(trace_dir.glob("trace_*.json"))
    if not trace_files:
        raise ConfigError("traces", f"no trace_*.json files under {trace_dir}")
    per_stage: dict[int, list] = {}
    for path in trace_files:
        data = json.loads(path.read_text())
        for entry in data["stages"]:
            if entry["error"] is not None:
                per_stage.setdefault(entry["stage"], []).append(entry["error"])
    if not per_stage:
        raise ConfigError("traces", "traces carry no ground-truth errors")
    stage_errors = {f"stage {k}": np.array(v) for k, v in sorted(per_stage.items())}
    last = max(per_stage)
    summary = summarize(np.array(per_stage[last]))
    write_summary_json(summary, out_dir / "eval_summary.json", timestamp=cfg.timestamp)
    write_summary_csv(summary, out_dir / "eval_summary.csv")
    bounds = None
    if args.noise_t is not None and args.noise_r is not None:
        bounds = (float(args.noise_t), math.radians(float(args.noise_r)))
    plot_error_pdfs(stage_errors, bounds, out_dir / "error_pdfs.svg")
    print(f"evaluated {len(trace_files)} traces -> {out_dir}/eval_summary.json")
    return 0


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cloud = _load_cloud(cfg, args.map)
    camera = synthetic.synthetic_camera()
    pose = _gt_poses(cfg)[0]
    regressor = IdentityRegressor()

    sizes = []
    forward = cfg.crop.forward
    for k in range(args.sizes):
        frac = (k + 1) / args.sizes
        sizes.append(CropSpec(max(forward * frac, 5.0), cfg.crop.lateral, cfg.crop.vertical))

    report = {"sizes": []}
    csv_rows = [["crop_forward_m", "points", "z_buffer_ms", "occlusion_ms", "regressor_ms", "total_ms"]]
    from .pointmap import crop_local

    for crop in sizes:
        settings = RenderSettings(crop, cfg.occlusion, cfg.z_near, workers=1)
        result = benchmark(cloud, camera, pose, regressor, None, args.repetitions, settings=settings)
        agg = result.aggregate()
        n_points = len(crop_local(cloud, pose, crop))
        report["sizes"].append(
            {"crop_forward_m": crop.forward, "points": n_points, "aggregate": agg}
        )
        csv_rows.append(
            [
                repr(crop.forward),
                n_points,
                repr(agg["z_buffer_ms"]["median"]),
                repr(agg["occlusion_ms"]["median"]),
                repr(agg["regressor_ms"]["median"]),
                repr(agg["total_ms"]["median"]),
            ]
        )
    report["reference_gpu_ms"] = dict(REFERENCE_GPU_TIMINGS_MS)
    _write_text_atomic(out_dir / "bench.json", json.dumps(report, indent=2) + "\n")
    _write_csv_atomic(out_dir / "bench.csv", csv_rows)
    print(f"benchmarked {args.sizes} crop sizes -> {out_dir}/bench.json")
    return 0


# --- argument parsing -------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--dataset", help="KITTI odometry dataset root (or $LIDARLOC_DATASET)")
    sub.add_argument("--sequence", help="sequence id, e.g. 00")
    sub.add_argument("--synthetic", action="store_true", help="use the bundled procedural scene")
    sub.add_argument("--map", help="binary map file produced by build-map")
    sub.add_argument("--map-resolution", type=float, dest="map_resolution")
    sub.add_argument("--crop-forward", type=float, dest="crop_forward")
    sub.add_argument("--crop-lateral", type=float, dest="crop_lateral")
    sub.add_argument("--crop-vertical", type=float, dest="crop_vertical")
    sub.add_argument("--occlusion-window", type=int, dest="occlusion_window")
    sub.add_argument("--occlusion-th", type=float, dest="occlusion_th")
    sub.add_argument("--no-occlusion", action="store_true", dest="no_occlusion")
    sub.add_argument("--noise-t", type=float, dest="noise_t", help="max translation noise per axis [m]")
    sub.add_argument("--noise-r", type=float, dest="noise_r", help="max rotation noise per axis [deg]")
    sub.add_argument("--stages", help="stage schedule config file")
    sub.add_argument("--regressor", help="identity | oracle[:contraction] | grid | external:DIR")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--jobs", type=int)
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--no-timestamp", action="store_true", dest="no_timestamp")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lidarloc",
        description="Localize a camera inside a LiDAR point-cloud map.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("build-map", help="aggregate scans into a downsampled map file")
    _add_common(p)
    p.add_argument("--max-scans", type=int, help="limit scan count (fixtures)")
    p.set_defaults(func=cmd_build_map)

    p = subs.add_parser("render", help="render the depth view at a pose")
    _add_common(p)
    p.add_argument("--frame-index", type=int, default=0)
    p.add_argument("--pose-line", help="12-value row-major [R|T] pose override")
    p.set_defaults(func=cmd_render)

    p = subs.add_parser("perturb", help="emit sampled initial poses and their errors")
    _add_common(p)
    p.add_argument("--frames", type=int)
    p.set_defaults(func=cmd_perturb)

    p = subs.add_parser("refine", help="run the refinement cascade over frames")
    _add_common(p)
    p.add_argument("--frames", type=int)
    p.set_defaults(func=cmd_refine)

    p = subs.add_parser("eval", help="summarize traces and plot error densities")
    _add_common(p)
    p.add_argument("--traces", required=True, help="directory with trace_*.json")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("bench", help="timing breakdown over growing crop sizes")
    _add_common(p)
    p.add_argument("--sizes", type=int, default=5)
    p.add_argument("--repetitions", type=int, default=10)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as exc:
        message = str(exc).replace("\n", " ")
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
