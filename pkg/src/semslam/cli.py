"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from .config import PipelineConfig, load_ini
from .errors import DataError
from .feature_refinement import adaptive_threshold
from .geometry import CameraIntrinsics

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _split_overrides(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _pipeline_config(args) -> PipelineConfig:
    values = load_ini(args.config) if args.config else {}
    values.update(_split_overrides(args.set))
    if getattr(args, "seed", None) is not None:
        values["seed"] = str(args.seed)
    return PipelineConfig.from_mapping(values)


def cmd_run(args) -> int:
    from .dataset import DatasetSource
    from .pipeline import run, run_wallclock, write_report

    if args.config is None and (Path(args.dataset) / "config.ini").exists():
        args.config = str(Path(args.dataset) / "config.ini")
    cfg = _pipeline_config(args)
    source = DatasetSource(args.dataset, cfg)
    report = run_wallclock(cfg, source, pace=args.pace) if args.wallclock else run(cfg, source)
    write_report(report, args.out)
    c = report.counters
    print(f"frames {c['frames_total']} keyframes {c['keyframes']} "
          f"corrections {c['corrections_applied']} points {c['map_points']}")
    if "ate_keyframes_m" in c:
        print(f"ate_keyframes_m {c['ate_keyframes_m']:.6f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .config import coerce_fields
    from .dataset import write_dataset
    from .simulator import DriftModel, SimConfig, generate_world, SimSource

    values = load_ini(args.config) if args.config else {}
    values.update(_split_overrides(args.set))
    sim_cfg = SimConfig.from_mapping(values, strict=False)
    pipe_values = coerce_fields(PipelineConfig, values, strict=False)
    for name in ("h_real", "focal_length", "principal_x", "principal_y", "width", "height", "downsample_factor"):
        pipe_values[name] = getattr(sim_cfg, name)
    pipe_values["seed"] = args.seed
    known = set(coerce_fields(SimConfig, values, strict=False)) | set(pipe_values)
    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    pipe_cfg = PipelineConfig(**pipe_values)
    world = generate_world(sim_cfg, args.seed)
    drift = DriftModel(args.drift_sigma, seed=args.seed, initial_scale=args.initial_scale)
    source = SimSource(world, drift, with_images=args.images)
    write_dataset(source, args.out, pipe_cfg, with_matches=args.matches, with_images=args.images)
    print(f"wrote {sim_cfg.n_frames} frames to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .eval_io import ate_rmse, read_kitti_poses

    try:
        est, gt = read_kitti_poses(args.est), read_kitti_poses(args.gt)
    except OSError as exc:
        raise DataError(str(exc)) from exc
    if args.frames:
        ids = [int(x) for x in Path(args.frames).read_text().split()]
        if len(ids) != len(est):
            raise DataError(f"{args.frames}: {len(ids)} ids for {len(est)} poses")
        est = type(est)(ids, est.poses)
    print(f"{ate_rmse(est, gt):.6f}")
    return EXIT_OK


def _parse_range(text: str):
    """``a:b:step`` with b inclusive; decimal arithmetic avoids float creep."""
    try:
        a, b, step = (Decimal(x) for x in text.split(":"))
    except (ValueError, InvalidOperation):
        raise UsageError(f"--l-range expects a:b:step, got {text!r}")
    if step <= 0 or b < a:
        raise UsageError("--l-range needs step > 0 and a <= b")
    out, x = [], a
    while x <= b:
        out.append(x)
        x += step
    return out


def cmd_threshold_table(args) -> int:
    try:
        f, px, py = (float(x) for x in args.intrinsics.split(","))
    except ValueError:
        raise UsageError(f"--intrinsics expects f,px,py, got {args.intrinsics!r}")
    intr = CameraIntrinsics(f, px, py)
    print("l,T")
    for l in _parse_range(args.l_range):
        print(f"{l},{adaptive_threshold(intr, float(l), args.d):.6f}")
    return EXIT_OK


def _read_points(path) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected x y z")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return np.array(rows, dtype=float).reshape(-1, 3)


def cmd_plane_fit(args) -> int:
    from .ground_plane import RansacConfig, fit_plane_ransac

    try:
        pts = _read_points(args.points)
    except OSError as exc:
        raise DataError(str(exc)) from exc
    cfg = RansacConfig(args.iterations, args.threshold, args.min_inliers, args.seed)
    plane, inliers = fit_plane_ransac(pts, cfg)
    n = plane.normal
    print(f"normal {n[0]:.9f} {n[1]:.9f} {n[2]:.9f}")
    print(f"offset {plane.offset:.9f}")
    print(f"inliers {len(inliers)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="semslam", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run the pipeline on a replay dataset")
    r.add_argument("--dataset", required=True)
    r.add_argument("--config")
    r.add_argument("--out", required=True)
    r.add_argument("--wallclock", action="store_true", help="threaded executor on the wall clock")
    r.add_argument("--pace", action="store_true", help="with --wallclock, sleep out modeled task costs")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("simulate", help="write a synthetic replay dataset")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--drift-sigma", type=float, default=0.0)
    s.add_argument("--initial-scale", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--matches", action="store_true", help="also write matches.csv")
    s.add_argument("--images", action="store_true", help="also write textured frames")
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("evaluate", help="ATE (m) between two KITTI pose files")
    e.add_argument("--est", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--frames", help="frame ids of the --est lines (default 0..n-1)")
    e.set_defaults(func=cmd_evaluate)

    t = sub.add_parser("threshold-table", help="adaptive low-parallax threshold per baseline")
    t.add_argument("--intrinsics", required=True, metavar="F,PX,PY")
    t.add_argument("--d", type=float, default=250.0)
    t.add_argument("--l-range", required=True, metavar="A:B:STEP")
    t.set_defaults(func=cmd_threshold_table)

    f = sub.add_parser("plane-fit", help="RANSAC plane through a point file")
    f.add_argument("--points", required=True)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--iterations", type=int, default=200)
    f.add_argument("--threshold", type=float, default=0.05)
    f.add_argument("--min-inliers", type=int, default=20)
    f.set_defaults(func=cmd_plane_fit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"semslam: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"semslam: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to an exit code
        print(f"semslam: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
