"""Command-line front end.

Exit codes: 0 success, 1 usage problems (bad flags or flag values), 2
runtime failures (missing inputs, pipeline errors).  Every subcommand is a
pure function of its flags and input files.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench, recordio
from .geometry import Cuboid, SamplingMesh
from .imaging import (
    IndicatorParams,
    reconstruct_global,
    reconstruct_parallel,
    reconstruct_sequential,
)
from .service import serve_forever
from .smoothing import smooth
from .trajectories import SCENARIO_IDS, builtin_trajectory

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    """Bad flag value; maps to exit code 1."""


def _triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return tuple(float(p) for p in parts)


def build_parser() -> argparse.ArgumentParser:
    epilog = (
        "scenarios: " + ", ".join(SCENARIO_IDS) + "\n"
        "presets:   " + ", ".join(sorted(bench.PRESETS))
    )
    parser = argparse.ArgumentParser(
        prog="airtrace",
        description="Simulate a moving wave emitter and reconstruct its trajectory from receiver data.",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="synthesize a receiver record for a built-in scenario")
    sim.add_argument("--scenario", default="letter-C", help="built-in trajectory id (case-insensitive)")
    sim.add_argument("--medium", default="homogeneous", choices=("homogeneous", "case-ii", "case-iii"))
    sim.add_argument("--noise", type=float, default=0.05, help="relative noise level (0 disables)")
    sim.add_argument("--seed", type=int, default=1)
    sim.add_argument("--out", default=".", help="output directory for record.csv/record.json")
    sim.add_argument("--forward", default=None, choices=("retarded", "approx", "reduced"),
                     help="forward model (default: retarded, or reduced when the medium has an inclusion)")
    sim.add_argument("--omega0", type=float, default=1.0)
    sim.add_argument("--c0", type=float, default=330.0)
    sim.add_argument("--c", type=float, default=1500.0, help="inclusion sound speed")
    sim.add_argument("--duration", type=float, default=None, help="override the scenario duration")
    sim.add_argument("--steps", type=int, default=None, help="override the number of time steps")
    sim.add_argument("--radius", type=float, default=10.0, help="receiver sphere radius")
    sim.add_argument("--receivers", type=int, default=200, help="number of receivers on the patch")
    sim.add_argument("--voxels", type=int, default=20, help="inclusion voxels per axis (reduced model)")
    sim.set_defaults(func=_cmd_simulate)

    rec = sub.add_parser("reconstruct", help="reconstruct a trajectory from a stored record")
    rec.add_argument("--record", required=True, help="path to record.csv (with .json sidecar)")
    rec.add_argument("--method", default="sequential", choices=("global", "sequential", "parallel"))
    rec.add_argument("--grid", type=int, default=50, help="search lattice cells per axis")
    rec.add_argument("--vmax", type=float, default=None,
                     help="speed bound (default: taken from the record's built-in scenario)")
    rec.add_argument("--domain-center", type=_triple, default=(0.0, 0.0, 0.0))
    rec.add_argument("--domain-size", type=_triple, default=(16.0, 16.0, 16.0))
    rec.add_argument("--out", default=None, help="output directory (default: alongside the record)")
    rec.set_defaults(func=_cmd_reconstruct)

    post = sub.add_parser("postprocess", help="segment and Fourier-smooth a reconstruction")
    post.add_argument("--recon", required=True, help="path to recon.csv")
    post.add_argument("--order", type=int, default=3, help="truncation order of the Fourier fit")
    seg = post.add_mutually_exclusive_group()
    seg.add_argument("--segmented", dest="segmented", action="store_true", default=True)
    seg.add_argument("--no-segmented", dest="segmented", action="store_false")
    post.add_argument("--gap-factor", type=float, default=3.0)
    post.add_argument("--out", default=None, help="output directory (default: alongside the recon)")
    post.set_defaults(func=_cmd_postprocess)

    ev = sub.add_parser("evaluate", help="score a reconstruction against a truth curve")
    ev.add_argument("--recon", required=True, help="path to recon.csv or smooth.csv")
    ev.add_argument("--truth", required=True, help="path to a t,x1,x2,x3 truth CSV")
    ev.set_defaults(func=_cmd_evaluate)

    run = sub.add_parser("run", help="run a full configured experiment")
    run.add_argument("--config", required=True, help="preset name or config file path")
    run.add_argument("--base-dir", default="runs")
    run.add_argument("--plots", action="store_true", help="also export plot-ready CSVs")
    run.set_defaults(func=_cmd_run)

    srv = sub.add_parser("serve", help="start the interactive drawing service")
    srv.add_argument("--port", type=int, default=8765)
    srv.add_argument("--host", default="127.0.0.1")
    srv.set_defaults(func=_cmd_serve)

    return parser


def _resolve_scenario(name: str) -> str:
    wanted = name.strip().lower()
    for canon in SCENARIO_IDS:
        if canon.lower() == wanted:
            return canon
    raise UsageError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIO_IDS)}")


def _cmd_simulate(args) -> int:
    if args.noise < 0:
        raise UsageError("--noise must be non-negative")
    if args.steps is not None and args.steps < 1:
        raise UsageError("--steps must be at least 1")
    scenario = _resolve_scenario(args.scenario)
    forward = args.forward
    if forward is None:
        forward = "retarded" if args.medium == "homogeneous" else "reduced"
    if args.medium != "homogeneous" and forward != "reduced":
        raise UsageError(f"forward model {forward!r} only supports homogeneous media")
    config = bench.ExperimentConfig(
        scenario=scenario,
        medium=args.medium,
        omega0=args.omega0,
        c0=args.c0,
        c=args.c,
        duration=args.duration,
        n_steps=args.steps,
        radius=args.radius,
        n_receivers=args.receivers,
        voxels=args.voxels,
        noise=args.noise,
        seed=args.seed,
        forward=forward,
    )
    record = bench._synthesize(config)
    if config.noise > 0:
        from .forward import add_noise

        record = add_noise(record, config.noise, config.seed)
    out = Path(args.out)
    recordio.save_record(record, out / "record.csv")
    print(f"wrote {out / 'record.csv'} and {out / 'record.json'}")
    return 0


def _cmd_reconstruct(args) -> int:
    if args.grid < 2:
        raise UsageError("--grid must be at least 2 cells per axis")
    record_path = Path(args.record)
    if not record_path.exists():
        raise FileNotFoundError(f"record file not found: {record_path}")
    record = recordio.load_record(record_path)
    v_max = args.vmax
    if v_max is None and args.method != "global":
        if record.trajectory_id in SCENARIO_IDS:
            v_max = builtin_trajectory(record.trajectory_id).v_max
        else:
            raise UsageError("--vmax is required when the record has no built-in scenario")
    if v_max is not None and v_max <= 0:
        raise UsageError("--vmax must be positive")
    mesh = SamplingMesh(Cuboid(center=args.domain_center, size=args.domain_size), args.grid)
    params = IndicatorParams()
    if args.method == "global":
        result = reconstruct_global(record, mesh, params)
    elif args.method == "sequential":
        result = reconstruct_sequential(record, mesh, v_max, params)
    else:
        result = reconstruct_parallel(record, mesh, v_max, params)
    out = Path(args.out) if args.out else record_path.parent
    recordio.save_reconstruction(result, out / "recon.csv")
    written = [out / "recon.csv"]
    if result.schedule is not None:
        recordio.save_schedule(result.schedule, out / "schedule.csv")
        written.append(out / "schedule.csv")
    print("wrote " + ", ".join(str(p) for p in written))
    return 0


def _cmd_postprocess(args) -> int:
    if args.order < 0:
        raise UsageError("--order must be non-negative")
    if args.gap_factor <= 0:
        raise UsageError("--gap-factor must be positive")
    recon_path = Path(args.recon)
    if not recon_path.exists():
        raise FileNotFoundError(f"reconstruction file not found: {recon_path}")
    result = recordio.load_reconstruction(recon_path)
    gap_factor = args.gap_factor if args.segmented else float("inf")
    smoothed = smooth(result, order=args.order, gap_factor=gap_factor)
    out = Path(args.out) if args.out else recon_path.parent
    recordio.save_smoothed(smoothed, out / "smooth.csv")
    recordio.save_curves(smoothed.curves, out / "coeffs.json")
    print(f"wrote {out / 'smooth.csv'} and {out / 'coeffs.json'} ({smoothed.n_segments} segments)")
    return 0


def _load_xyz(path: Path) -> tuple[np.ndarray, np.ndarray]:
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[1] < 4:
        raise ValueError(f"{path} needs at least t,x1,x2,x3 columns")
    # recon/smooth files carry step numbers first, plain curves start at t
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if header[0] == "step":
        return table[:, 1], table[:, 2:5]
    return table[:, 0], table[:, 1:4]


def _cmd_evaluate(args) -> int:
    recon_path, truth_path = Path(args.recon), Path(args.truth)
    for p in (recon_path, truth_path):
        if not p.exists():
            raise FileNotFoundError(f"input file not found: {p}")
    times, points = _load_xyz(recon_path)
    t_truth, p_truth = _load_xyz(truth_path)
    truth_at = np.empty_like(points)
    for axis in range(3):
        truth_at[:, axis] = np.interp(times, t_truth, p_truth[:, axis])
    err = np.linalg.norm(points - truth_at, axis=1)
    print(f"n_points={err.size}")
    print(f"max_error={recordio.fmt(err.max() if err.size else 0.0)}")
    print(f"mean_error={recordio.fmt(err.mean() if err.size else 0.0)}")
    print(f"rms_error={recordio.fmt(float(np.sqrt(np.mean(err**2))) if err.size else 0.0)}")
    return 0


def _cmd_run(args) -> int:
    if args.config in bench.PRESETS:
        config = bench.preset(args.config)
    elif Path(args.config).exists():
        config = bench.load_config(args.config)
    else:
        raise UsageError(
            f"--config {args.config!r} is neither a preset ({', '.join(sorted(bench.PRESETS))}) "
            "nor an existing file"
        )
    report = bench.run_experiment(config, base_dir=args.base_dir)
    if args.plots:
        bench.export_plot_data(report)
    print(f"run dir: {report.run_dir}")
    for key in ("n_points", "n_segments", "raw_mean_error", "smooth_mean_error"):
        if report.metrics.get(key) is not None:
            value = report.metrics[key]
            print(f"{key}={recordio.fmt(value) if isinstance(value, float) else value}")
    return 0


def _cmd_serve(args) -> int:
    if not 0 < args.port < 65536:
        raise UsageError("--port must be in 1..65535")
    serve_forever(host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for parse errors; parse errors
        # are usage problems here
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # pipeline failures
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
