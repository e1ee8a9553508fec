"""Configured end-to-end experiments with persistence and plot exports.

An experiment is a flat, hashable configuration: scenario, medium, the
acquisition geometry, noise seed, reconstruction method, and smoothing
order.  Running one walks the full pipeline (synthesize, add noise,
reconstruct, smooth, score) and persists every artifact under a directory
named by the config hash, so identical configs land in identical places
with byte-identical contents.  Wall-clock timings go to a separate file
because they are measurements of the run, not outputs of the config.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import recordio
from .forward import WaveRecord, add_noise, synthesize_approx_record, synthesize_record
from .geometry import Cuboid, MediumSpec, SamplingMesh, TimeGrid, make_receiver_array
from .imaging import (
    IndicatorParams,
    LatticeEvaluator,
    reconstruct_global,
    reconstruct_parallel,
    reconstruct_sequential,
)
from .scattering import synthesize_record_inhomogeneous
from .smoothing import smooth, trajectory_error
from .trajectories import SCENARIO_IDS, builtin_trajectory, trajectory_to_csv

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "MediaComparison",
    "PRESETS",
    "preset",
    "config_text",
    "config_hash",
    "save_config",
    "load_config",
    "run_experiment",
    "compare_media",
    "export_plot_data",
]

_MEDIA = ("homogeneous", "case-ii", "case-iii")
_METHODS = ("global", "sequential", "parallel")
_FORWARDS = ("retarded", "approx", "reduced")

# body stands between emitter and receivers (case-iii) or behind the
# emitter (case-ii); both are 2 x 10 x 10 m cuboids on the x1 axis
_CASE_CENTERS = {"case-ii": (-2.0, 0.0, 0.0), "case-iii": (2.0, 0.0, 0.0)}
_CASE_SIZE = (2.0, 10.0, 10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment description; every field round-trips through the
    key=value config file format."""

    scenario: str = "letter-C"
    medium: str = "homogeneous"
    omega0: float = 1.0
    c0: float = 330.0
    c: float = 1500.0
    duration: float | None = None
    n_steps: int | None = None
    radius: float = 10.0
    polar_lo: float = float(np.pi / 4)
    polar_hi: float = float(3 * np.pi / 4)
    azimuth_lo: float = float(-np.pi / 4)
    azimuth_hi: float = float(np.pi / 4)
    n_receivers: int = 200
    domain_center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    domain_size: tuple[float, float, float] = (16.0, 16.0, 16.0)
    resolution: int = 50
    voxels: int = 20
    noise: float = 0.05
    seed: int = 1
    method: str = "sequential"
    forward: str = "retarded"
    mode: str = "unit-direction"
    order: int = 3
    segmented: bool = True
    gap_factor: float = 3.0
    min_segment: int = 4

    def __post_init__(self):
        if self.scenario not in SCENARIO_IDS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIO_IDS}")
        if self.medium not in _MEDIA:
            raise ValueError(f"medium must be one of {_MEDIA}")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")
        if self.forward not in _FORWARDS:
            raise ValueError(f"forward must be one of {_FORWARDS}")
        if self.noise < 0:
            raise ValueError("noise level must be non-negative")
        if self.order < 0:
            raise ValueError("smoothing order must be non-negative")
        if self.min_segment < 1:
            raise ValueError("min_segment must be at least 1")

    # resolved pieces -----------------------------------------------------

    def trajectory(self):
        return builtin_trajectory(self.scenario)

    def grid(self) -> TimeGrid:
        duration = self.duration if self.duration is not None else self.trajectory().duration
        n_steps = self.n_steps if self.n_steps is not None else round(duration / 0.1)
        return TimeGrid(duration=duration, n_steps=int(n_steps))

    def receivers(self):
        return make_receiver_array(
            radius=self.radius,
            polar_range=(self.polar_lo, self.polar_hi),
            azimuth_range=(self.azimuth_lo, self.azimuth_hi),
            n_receivers=self.n_receivers,
        )

    def medium_spec(self) -> MediumSpec:
        if self.medium == "homogeneous":
            return MediumSpec(c0=self.c0)
        cuboid = Cuboid(center=_CASE_CENTERS[self.medium], size=_CASE_SIZE)
        return MediumSpec(c0=self.c0, inclusion=cuboid, c=self.c)

    def mesh(self) -> SamplingMesh:
        return SamplingMesh(Cuboid(center=self.domain_center, size=self.domain_size), self.resolution)


PRESETS: dict[str, ExperimentConfig] = {
    # reference acquisition: r=10 m patch of 200 receivers, 0.1 s steps,
    # omega0=1, c0=330, search cube [-8,8]^3 at 50 cells/axis
    "paper-default": ExperimentConfig(),
    "paper-default-C": ExperimentConfig(scenario="letter-C", method="sequential"),
    "digit-3": ExperimentConfig(scenario="digit-3"),
    "digit-8": ExperimentConfig(scenario="digit-8"),
    "cyl-spiral": ExperimentConfig(scenario="cyl-spiral", order=1, segmented=False),
    "cone-spiral": ExperimentConfig(scenario="cone-spiral", order=5, segmented=False),
    # hello uses the exhaustive search: connector hops between letters exceed
    # any sensible sequential ball, and stray points are pruned afterwards
    "paper-hello": ExperimentConfig(scenario="hello", noise=0.30, order=3, method="global"),
}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# config file format ------------------------------------------------------


def _field_to_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return recordio.fmt(value)
    if isinstance(value, tuple):
        return ",".join(recordio.fmt(v) for v in value)
    return str(value)


def config_text(config: ExperimentConfig) -> str:
    """Canonical key=value rendering, one field per line in declaration
    order; this exact text is what gets hashed."""
    lines = [f"{f.name}={_field_to_text(getattr(config, f.name))}" for f in fields(config)]
    return "\n".join(lines) + "\n"


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(config_text(config).encode("utf-8")).hexdigest()[:12]


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config_text(config))


def load_config(path) -> ExperimentConfig:
    spec = {f.name: f for f in fields(ExperimentConfig)}
    kwargs = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {line!r}")
            key, _, text = line.partition("=")
            key = key.strip()
            if key not in spec:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _parse_field(spec[key], text.strip())
    return ExperimentConfig(**kwargs)


def _parse_field(f, text: str):
    if text == "":
        return None
    if f.name in ("domain_center", "domain_size"):
        parts = tuple(float(p) for p in text.split(","))
        if len(parts) != 3:
            raise ValueError(f"{f.name} needs 3 comma-separated floats")
        return parts
    if f.name == "segmented":
        if text not in ("true", "false"):
            raise ValueError("segmented must be true or false")
        return text == "true"
    if f.name in ("n_steps", "n_receivers", "resolution", "voxels", "seed", "order"):
        return int(text)
    if f.name in ("scenario", "medium", "method", "forward", "mode"):
        return text
    return float(text)


# experiment pipeline -----------------------------------------------------


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    run_dir: str
    metrics: dict
    runtimes: dict
    files: dict
    notes: tuple[str, ...] = ()

    def payload(self) -> dict:
        """Deterministic part of the report (no timings).

        File entries are relative to run_dir so the payload does not
        change when the archive is moved or the run is repeated elsewhere.
        """
        base = Path(self.run_dir)
        return {
            "config": {f.name: _field_to_text(getattr(self.config, f.name)) for f in fields(self.config)},
            "config_hash": config_hash(self.config),
            "metrics": self.metrics,
            "files": {k: os.path.relpath(v, base) for k, v in sorted(self.files.items())},
            "notes": list(self.notes),
        }


def _synthesize(config: ExperimentConfig) -> WaveRecord:
    traj = config.trajectory()
    receivers = config.receivers()
    grid = config.grid()
    medium = config.medium_spec()
    if config.forward == "reduced" or not medium.homogeneous:
        record = synthesize_record_inhomogeneous(
            traj, receivers, grid, medium, omega0=config.omega0, resolution=config.voxels
        )
    elif config.forward == "approx":
        record = synthesize_approx_record(traj, receivers, grid, medium, omega0=config.omega0)
    else:
        record = synthesize_record(traj, receivers, grid, medium, omega0=config.omega0, mode=config.mode)
    return record


def _reconstruct(config: ExperimentConfig, record: WaveRecord, evaluator: LatticeEvaluator | None = None):
    mesh = config.mesh()
    params = IndicatorParams()
    evaluator = evaluator or LatticeEvaluator(mesh, record.receivers, params.exclusion_radius)
    v_max = config.trajectory().v_max
    if config.method == "global":
        return reconstruct_global(record, mesh, params, evaluator)
    if config.method == "sequential":
        return reconstruct_sequential(record, mesh, v_max, params, evaluator)
    return reconstruct_parallel(record, mesh, v_max, params, evaluator)


def run_experiment(
    config: ExperimentConfig,
    base_dir="runs",
    evaluator: LatticeEvaluator | None = None,
) -> ExperimentReport:
    """Full pipeline with per-phase timing and persistence.

    Passing an evaluator built on the same mesh and receivers skips the
    lattice-distance rebuild across experiments that share acquisition.
    """
    run_dir = Path(base_dir) / config_hash(config)
    run_dir.mkdir(parents=True, exist_ok=True)
    runtimes: dict[str, float] = {}
    files: dict[str, Path] = {}

    def phase(name, fn):
        start = time.perf_counter()
        try:
            out = fn()
        except Exception as exc:
            raise RuntimeError(f"experiment phase {name!r} failed: {exc}") from exc
        runtimes[name] = time.perf_counter() - start
        return out

    save_config(config, run_dir / "config.txt")
    files["config"] = run_dir / "config.txt"

    record = phase("synthesize", lambda: _synthesize(config))
    if config.noise > 0:
        record = phase("noise", lambda: add_noise(record, config.noise, config.seed))
    recordio.save_record(record, run_dir / "record.csv")
    files["record"] = run_dir / "record.csv"
    files["record_meta"] = run_dir / "record.json"

    result = phase("reconstruct", lambda: _reconstruct(config, record, evaluator))
    recordio.save_reconstruction(result, run_dir / "recon.csv")
    files["recon"] = run_dir / "recon.csv"
    if result.schedule is not None:
        recordio.save_schedule(result.schedule, run_dir / "schedule.csv")
        files["schedule"] = run_dir / "schedule.csv"

    gap_factor = config.gap_factor if config.segmented else float("inf")
    min_segment = config.min_segment if config.segmented else 1
    smoothed = phase(
        "postprocess",
        lambda: smooth(result, order=config.order, gap_factor=gap_factor, min_segment=min_segment),
    )
    recordio.save_smoothed(smoothed, run_dir / "smooth.csv")
    recordio.save_curves(smoothed.curves, run_dir / "coeffs.json")
    files["smooth"] = run_dir / "smooth.csv"
    files["coeffs"] = run_dir / "coeffs.json"

    traj = config.trajectory()
    trajectory_to_csv(traj, record.grid, run_dir / "truth.csv")
    files["truth"] = run_dir / "truth.csv"

    def metrics_fn():
        raw_err = trajectory_error(traj, result.times, result.points)
        smooth_err = trajectory_error(traj, smoothed.times, smoothed.points)
        spacing = float(np.max(config.mesh().spacing))
        residuals = [
            float(np.linalg.norm(smoothed.points[lo:hi] - result.points[lo:hi], axis=1).mean())
            for lo, hi in smoothed.segments
        ]
        return {
            "n_points": int(len(result.steps)),
            "n_skipped": len(result.skipped),
            "n_filled": len(result.filled),
            "raw_max_error": float(raw_err.max()) if raw_err.size else None,
            "raw_mean_error": float(raw_err.mean()) if raw_err.size else None,
            "smooth_max_error": float(smooth_err.max()) if smooth_err.size else None,
            "smooth_mean_error": float(smooth_err.mean()) if smooth_err.size else None,
            "within_1_cell": float(np.mean(raw_err <= spacing)) if raw_err.size else None,
            "within_2_cells": float(np.mean(raw_err <= 2 * spacing)) if raw_err.size else None,
            "n_segments": smoothed.n_segments,
            "segment_residuals": residuals,
        }

    metrics = phase("metrics", metrics_fn)

    notes = (
        f"forward data: {record.forward} model (quadrature/closed-form, not FEM)",
        "error thresholds are recorded regression values, not published figures",
    )
    if not smoothed.curves:
        notes = notes + ("smoothing produced no segments",)

    report = ExperimentReport(
        config=config,
        run_dir=str(run_dir),
        metrics=metrics,
        runtimes=runtimes,
        files={k: str(v) for k, v in files.items()},
        notes=notes,
    )
    with open(run_dir / "report.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.payload(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(run_dir / "timings.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump({k: round(v, 6) for k, v in runtimes.items()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    report.files["report"] = str(run_dir / "report.json")

    missing = [p for p in report.files.values() if not Path(p).exists()]
    if missing:
        raise RuntimeError(f"report references missing files: {missing}")
    return report


# media comparison --------------------------------------------------------


@dataclass(frozen=True)
class MediaComparison:
    records: dict
    deviations: dict
    recon_deltas: dict
    files: dict


_ACQUISITION_KEYS = (
    "scenario", "omega0", "c0", "duration", "n_steps", "radius",
    "polar_lo", "polar_hi", "azimuth_lo", "azimuth_hi", "n_receivers",
    "noise", "seed",
)


def compare_media(
    config_i: ExperimentConfig,
    config_ii: ExperimentConfig | None = None,
    config_iii: ExperimentConfig | None = None,
    base_dir="runs",
) -> MediaComparison:
    """Synthesize the same scenario through all three media and compare.

    All records use the volume-integral reduced model so the homogeneous
    case differs from the embedded cases only by the contrast term, never
    by discretization.  Reports per-case records, max deviations from the
    homogeneous field, and per-step distances between reconstructions.
    """
    config_i = replace(config_i, medium="homogeneous", forward="reduced")
    config_ii = config_ii or replace(config_i, medium="case-ii")
    config_iii = config_iii or replace(config_i, medium="case-iii")
    for other in (config_ii, config_iii):
        for key in _ACQUISITION_KEYS:
            if getattr(other, key) != getattr(config_i, key):
                raise ValueError(f"media comparison configs must share acquisition; {key} differs")

    out_dir = Path(base_dir) / f"media-{config_hash(config_i)}"
    out_dir.mkdir(parents=True, exist_ok=True)

    cases = {"case-i": config_i, "case-ii": config_ii, "case-iii": config_iii}
    mesh = config_i.mesh()
    evaluator = LatticeEvaluator(mesh, config_i.receivers(), IndicatorParams().exclusion_radius)

    records: dict[str, WaveRecord] = {}
    results = {}
    files = {}
    for name, cfg in cases.items():
        record = _synthesize(cfg)
        if cfg.noise > 0:
            record = add_noise(record, cfg.noise, cfg.seed)
        records[name] = record
        recordio.save_record(record, out_dir / f"record_{name}.csv")
        files[f"record_{name}"] = str(out_dir / f"record_{name}.csv")
        results[name] = _reconstruct(cfg, record, evaluator)
        recordio.save_reconstruction(results[name], out_dir / f"recon_{name}.csv")
        files[f"recon_{name}"] = str(out_dir / f"recon_{name}.csv")

    u0 = records["case-i"].values
    scale = float(np.abs(u0).max())
    deviations = {}
    for name in ("case-ii", "case-iii"):
        dev = float(np.abs(records[name].values - u0).max())
        deviations[name] = {"max_abs": dev, "relative_to_case_i_max": dev / scale if scale else None}

    base = results["case-i"]
    recon_deltas = {}
    for name in ("case-ii", "case-iii"):
        res = results[name]
        shared = np.intersect1d(base.steps, res.steps)
        d = [
            float(np.linalg.norm(
                base.points[np.searchsorted(base.steps, j)] - res.points[np.searchsorted(res.steps, j)]
            ))
            for j in shared
        ]
        recon_deltas[name] = {
            "max_step_distance": max(d) if d else None,
            "mean_step_distance": float(np.mean(d)) if d else None,
            "n_shared_steps": len(shared),
        }

    payload = {"deviations": deviations, "recon_deltas": recon_deltas, "max_abs_case_i": scale}
    with open(out_dir / "compare.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    files["compare"] = str(out_dir / "compare.json")
    return MediaComparison(records=records, deviations=deviations, recon_deltas=recon_deltas, files=files)


# plot exports ------------------------------------------------------------


def _write_xyz_csv(path, times, points):
    lines = ["t,x1,x2,x3"]
    for t, p in zip(times, points):
        lines.append(",".join([recordio.fmt(t), recordio.fmt(p[0]), recordio.fmt(p[1]), recordio.fmt(p[2])]))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_proj_csv(path, points):
    lines = ["x2,x3"]
    for p in points:
        lines.append(f"{recordio.fmt(p[1])},{recordio.fmt(p[2])}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def export_plot_data(report: ExperimentReport, out_dir=None) -> dict:
    """Truth, raw, and smoothed curves as plot-ready CSV plus their x2-x3
    projections.  Dense curves are resampled at 10 points per step."""
    run_dir = Path(report.run_dir)
    out = Path(out_dir) if out_dir is not None else run_dir / "plots"
    out.mkdir(parents=True, exist_ok=True)
    config = report.config
    grid = config.grid()
    traj = config.trajectory()

    files = {}
    truth_pts = np.vstack([traj.position(t) for t in grid.times])
    _write_xyz_csv(out / "truth.csv", grid.times, truth_pts)
    _write_proj_csv(out / "truth_x2x3.csv", truth_pts)
    files["truth"] = str(out / "truth.csv")
    files["truth_proj"] = str(out / "truth_x2x3.csv")

    recon = recordio.load_reconstruction(run_dir / "recon.csv")
    _write_xyz_csv(out / "raw.csv", recon.times, recon.points)
    _write_proj_csv(out / "raw_x2x3.csv", recon.points)
    files["raw"] = str(out / "raw.csv")
    files["raw_proj"] = str(out / "raw_x2x3.csv")

    curves = recordio.load_curves(run_dir / "coeffs.json")
    if curves:
        dense_t, dense_p = [], []
        for c in curves:
            # segment length in wall-clock time; the curve parameter is scaled
            span = c.duration / c.t_scale
            n = max(2, round(10 * span / grid.dt))
            s = np.linspace(c.duration / n, c.duration, n)
            dense_t.append(s / c.t_scale + c.t_offset)
            dense_p.append(c.evaluate_local(s))
        _write_xyz_csv(out / "smoothed.csv", np.concatenate(dense_t), np.vstack(dense_p))
        _write_proj_csv(out / "smoothed_x2x3.csv", np.vstack(dense_p))
        files["smoothed"] = str(out / "smoothed.csv")
        files["smoothed_proj"] = str(out / "smoothed_x2x3.csv")
    return files
