"""CSV/JSON serialization for records, reconstructions, and smoothing output.

All floats are written with %.17g so values survive a round trip bit for
bit, files use "\\n" line endings regardless of platform, and JSON keys are
sorted.  Identical inputs therefore produce byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .forward import WaveRecord
from .geometry import Cuboid, MediumSpec, ReceiverArray, TimeGrid
from .imaging import ReconResult, TuningSchedule
from .smoothing import FourierCurve, SmoothedPath

__all__ = [
    "fmt",
    "save_record",
    "load_record",
    "save_reconstruction",
    "load_reconstruction",
    "save_schedule",
    "save_smoothed",
    "save_curves",
    "load_curves",
]


def fmt(x: float) -> str:
    """Shortest exact decimal rendering used across all CSV output."""
    return "%.17g" % float(x)


def _write_lines(path, lines) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def _dump_json(path, payload) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_record(record: WaveRecord, csv_path, json_path=None) -> None:
    """Write samples as one CSV row per time step, plus a JSON sidecar with
    everything needed to rebuild the record object.

    The sidecar defaults to the CSV path with a .json suffix.
    """
    json_path = Path(csv_path).with_suffix(".json") if json_path is None else json_path
    n_m = record.n_receivers
    header = "step,time," + ",".join(f"u{m}" for m in range(1, n_m + 1))
    lines = [header]
    times = record.grid.times
    for j in range(record.n_steps):
        cells = [str(j + 1), fmt(times[j])]
        cells.extend(fmt(v) for v in record.values[:, j])
        lines.append(",".join(cells))
    _write_lines(csv_path, lines)

    medium = record.medium
    meta = {
        "omega0": record.omega0,
        "c0": record.c0,
        "trajectory_id": record.trajectory_id,
        "mode": record.mode,
        "forward": record.forward,
        "noise": record.noise,
        "seed": record.seed,
        "grid": {"duration": record.grid.duration, "n_steps": record.grid.n_steps},
        "receivers": {
            "positions": record.receivers.positions.tolist(),
            "weights": record.receivers.weights.tolist(),
            "radius": record.receivers.radius,
            "polar_range": list(record.receivers.polar_range) if record.receivers.polar_range else None,
            "azimuth_range": list(record.receivers.azimuth_range) if record.receivers.azimuth_range else None,
        },
        "medium": None
        if medium is None
        else {
            "c0": medium.c0,
            "c": medium.c,
            "inclusion": None
            if medium.inclusion is None
            else {"center": medium.inclusion.center.tolist(), "size": medium.inclusion.size.tolist()},
        },
    }
    _dump_json(json_path, meta)


def load_record(csv_path, json_path=None) -> WaveRecord:
    json_path = Path(csv_path).with_suffix(".json") if json_path is None else json_path
    with open(json_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    table = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    values = table[:, 2:].T.copy()

    rx = meta["receivers"]
    receivers = ReceiverArray(
        positions=np.asarray(rx["positions"], dtype=np.float64),
        weights=np.asarray(rx["weights"], dtype=np.float64),
        radius=rx.get("radius"),
        polar_range=tuple(rx["polar_range"]) if rx.get("polar_range") else None,
        azimuth_range=tuple(rx["azimuth_range"]) if rx.get("azimuth_range") else None,
    )
    grid = TimeGrid(duration=meta["grid"]["duration"], n_steps=meta["grid"]["n_steps"])
    medium = None
    if meta.get("medium") is not None:
        m = meta["medium"]
        inclusion = None
        if m.get("inclusion") is not None:
            inclusion = Cuboid(center=m["inclusion"]["center"], size=m["inclusion"]["size"])
        medium = MediumSpec(c0=m["c0"], inclusion=inclusion, c=m.get("c"))
    return WaveRecord(
        values=values,
        receivers=receivers,
        grid=grid,
        omega0=meta["omega0"],
        c0=meta["c0"],
        trajectory_id=meta.get("trajectory_id", "custom"),
        mode=meta.get("mode", "unit-direction"),
        forward=meta.get("forward", "retarded"),
        noise=meta.get("noise", 0.0),
        seed=meta.get("seed"),
        medium=medium,
    )


def save_reconstruction(result: ReconResult, path) -> None:
    """step,time,x1,x2,x3,indicator,filled rows; skipped steps are absent."""
    filled = set(result.filled)
    lines = ["step,time,x1,x2,x3,indicator,filled"]
    for i, step in enumerate(result.steps):
        cells = [
            str(int(step)),
            fmt(result.times[i]),
            fmt(result.points[i, 0]),
            fmt(result.points[i, 1]),
            fmt(result.points[i, 2]),
            fmt(result.indicators[i]),
            "1" if int(step) in filled else "0",
        ]
        lines.append(",".join(cells))
    _write_lines(path, lines)


def load_reconstruction(path, method: str = "loaded") -> ReconResult:
    with open(path, encoding="utf-8") as fh:
        body = fh.readlines()[1:]
    if body:
        table = np.loadtxt(body, delimiter=",", ndmin=2)
    else:
        table = np.empty((0, 7))
    steps = table[:, 0].astype(np.int64)
    filled = tuple(int(s) for s, f in zip(steps, table[:, 6]) if f > 0)
    return ReconResult(
        steps=steps,
        times=table[:, 1].copy(),
        points=table[:, 2:5].copy(),
        indicators=table[:, 5].copy(),
        method=method,
        filled=filled,
    )


def save_schedule(schedule: TuningSchedule, path) -> None:
    lines = ["level,slot,step,radius"]
    for e in schedule.entries:
        lines.append(f"{e.level},{e.slot},{e.step},{fmt(e.radius)}")
    _write_lines(path, lines)


def save_smoothed(smoothed: SmoothedPath, path) -> None:
    """step,time,x1,x2,x3,segment rows of the resampled smooth path."""
    seg_of = np.empty(len(smoothed.steps), dtype=np.int64)
    for k, (lo, hi) in enumerate(smoothed.segments):
        seg_of[lo:hi] = k
    lines = ["step,time,x1,x2,x3,segment"]
    for i, step in enumerate(smoothed.steps):
        cells = [
            str(int(step)),
            fmt(smoothed.times[i]),
            fmt(smoothed.points[i, 0]),
            fmt(smoothed.points[i, 1]),
            fmt(smoothed.points[i, 2]),
            str(int(seg_of[i])),
        ]
        lines.append(",".join(cells))
    _write_lines(path, lines)


def save_curves(curves, path) -> None:
    """Fourier coefficients per segment as sorted-key JSON."""
    payload = {
        "segments": [
            {
                "order": c.order,
                "duration": c.duration,
                "t_offset": c.t_offset,
                "t_scale": c.t_scale,
                "a0": c.a0.tolist(),
                "a": c.a.tolist(),
                "b": c.b.tolist(),
            }
            for c in curves
        ]
    }
    _dump_json(path, payload)


def load_curves(path) -> tuple[FourierCurve, ...]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    curves = []
    for seg in payload["segments"]:
        order = seg["order"]
        a = np.asarray(seg["a"], dtype=np.float64).reshape(order, 3)
        b = np.asarray(seg["b"], dtype=np.float64).reshape(order, 3)
        curves.append(
            FourierCurve(
                a0=np.asarray(seg["a0"], dtype=np.float64),
                a=a,
                b=b,
                duration=seg["duration"],
                t_offset=seg["t_offset"],
                t_scale=seg.get("t_scale", 1.0),
            )
        )
    return tuple(curves)
