"""Command line interface: synth, track, eval.

Exit codes: 0 success, 1 usage error, 2 data error. Data errors name the
offending file and line where one exists.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io_eval, synthworld
from .errors import TrackingError
from .pipeline import TrackerConfig, run_sequence


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors must be 1
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vptrack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic observation set")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--frames", type=int, default=200)
    p_synth.add_argument("--noise-px", type=float, default=0.0)
    p_synth.add_argument("--outlier-frac", type=float, default=0.0)
    p_synth.add_argument("--style", choices=["corridor", "orbit"], default="corridor")
    p_synth.add_argument("--segments-per-axis", type=int, default=15)
    p_synth.add_argument("--points", type=int, default=60)
    p_synth.add_argument("--out-dir", required=True)

    p_track = sub.add_parser("track", help="track an observation set")
    p_track.add_argument("--obs-dir", required=True)
    p_track.add_argument("--out", required=True, help="output TUM trajectory path")
    p_track.add_argument("--diag", default=None, help="diagnostics CSV (default <out>.diag.csv)")
    p_track.add_argument("--config", default=None, help="JSON file of tracker settings")

    p_eval = sub.add_parser("eval", help="absolute translation RMSE of a trajectory")
    p_eval.add_argument("--est", required=True)
    p_eval.add_argument("--gt", required=True)
    p_eval.add_argument("--residuals", default=None, help="write per-frame residual CSV here")
    return parser


def _cmd_synth(args) -> int:
    intr = synthworld.default_intrinsics()
    scene = synthworld.generate_scene(
        args.seed, n_segments_per_axis=args.segments_per_axis, n_points=args.points
    )
    trajectory = synthworld.generate_trajectory(args.seed, args.frames, style=args.style)
    frames = synthworld.render_sequence(
        scene,
        trajectory,
        intr,
        pixel_noise_sigma=args.noise_px,
        outlier_fraction=args.outlier_frac,
        seed=args.seed,
    )
    out = Path(args.out_dir)
    io_eval.write_observations(out, intr, frames, fps=30.0)
    io_eval.save_trajectory(trajectory, out / "gt.txt")
    print(f"wrote {len(frames)} frames to {out}")
    return 0


def _cmd_track(args) -> int:
    config = TrackerConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = TrackerConfig.from_dict(json.load(fh))
    intr, _, frames = io_eval.read_observations(args.obs_dir)
    trajectory, diagnostics = run_sequence(frames, config, intr)
    io_eval.save_trajectory(trajectory, args.out)
    diag_path = args.diag or (str(args.out) + ".diag.csv")
    io_eval.write_diagnostics_csv(diagnostics, diag_path)
    print(f"tracked {len(trajectory)} frames -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    est = io_eval.load_trajectory(args.est)
    gt = io_eval.load_trajectory(args.gt)
    result = io_eval.evaluate_ate(est, gt)
    if args.residuals:
        io_eval.write_residuals_csv(result, est, args.residuals)
    print(f"{result.rmse:.6f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "track":
            return _cmd_track(args)
        return _cmd_eval(args)
    except (TrackingError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
