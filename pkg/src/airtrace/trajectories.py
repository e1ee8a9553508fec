"""Emitter trajectories: piecewise-smooth paths on a time interval (0, T].

A trajectory is a continuous map t -> z0(t) in R^3 on (0, T], piecewise C^1.
Velocity at a joint between pieces is the right-hand limit.  Evaluation with
clamp=True extends the path as constant before t=0 and after t=T, which is
how the field solvers probe it outside the emission window.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import TimeGrid, as_point

__all__ = [
    "Trajectory",
    "builtin_trajectory",
    "eval_trajectory",
    "trajectory_to_csv",
    "SCENARIO_IDS",
]

_VMAX_SAMPLES = 10_000
_VMAX_SAFETY = 1.01


@dataclass(frozen=True)
class _Piece:
    t_lo: float
    t_hi: float
    pos: Callable[[np.ndarray], np.ndarray]  # (n,) -> (n, 3)
    vel: Callable[[np.ndarray], np.ndarray]


class Trajectory:
    """Piecewise-defined emitter path with a known speed bound."""

    def __init__(self, pieces: Sequence[_Piece], name: str = "custom", v_max: float | None = None):
        if not pieces:
            raise ValueError("trajectory needs at least one piece")
        pieces = sorted(pieces, key=lambda p: p.t_lo)
        if abs(pieces[0].t_lo) > 1e-12:
            raise ValueError("trajectory must start at t=0")
        for a, b in zip(pieces, pieces[1:]):
            if abs(a.t_hi - b.t_lo) > 1e-9:
                raise ValueError("trajectory pieces must be contiguous in time")
        self._pieces = list(pieces)
        self._bounds = np.array([p.t_hi for p in pieces])
        self.name = name
        self.duration = float(pieces[-1].t_hi)
        self._v_max = v_max

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_samples(cls, times: np.ndarray, points: np.ndarray, name: str = "sampled") -> "Trajectory":
        """Piecewise-linear path through (t_i, p_i); t_i strictly increasing, > 0.

        The first node is extended back to t=0 at rest so the domain starts
        at 0 like every other trajectory.
        """
        times = np.asarray(times, dtype=np.float64)
        points = np.asarray(points, dtype=np.float64)
        if times.ndim != 1 or points.shape != (times.size, 3):
            raise ValueError("need times (n,) and points (n, 3)")
        if times.size < 1:
            raise ValueError("need at least one sample")
        if np.any(np.diff(times) <= 0) or times[0] <= 0:
            raise ValueError("sample times must be strictly increasing and positive")
        knots_t = np.concatenate([[0.0], times])
        knots_p = np.concatenate([points[:1], points], axis=0)
        pieces = []
        v_max = 0.0
        for i in range(knots_t.size - 1):
            t0, t1 = knots_t[i], knots_t[i + 1]
            p0, p1 = knots_p[i], knots_p[i + 1]
            slope = (p1 - p0) / (t1 - t0)
            v_max = max(v_max, float(np.linalg.norm(slope)))
            pieces.append(_linear_piece(t0, t1, p0, slope))
        traj = cls(pieces, name=name, v_max=v_max)
        return traj

    # -- evaluation -----------------------------------------------------------

    @property
    def v_max(self) -> float:
        """Upper bound on speed: exact for polylines, densely sampled otherwise."""
        if self._v_max is None:
            ts = np.linspace(self.duration / _VMAX_SAMPLES, self.duration, _VMAX_SAMPLES)
            speeds = np.linalg.norm(self.velocity(ts), axis=1)
            self._v_max = float(speeds.max()) * _VMAX_SAFETY
        return self._v_max

    @property
    def start_point(self) -> np.ndarray:
        return self._pieces[0].pos(np.array([0.0]))[0]

    @property
    def end_point(self) -> np.ndarray:
        return self._pieces[-1].pos(np.array([self.duration]))[0]

    def position(self, t, clamp: bool = False) -> np.ndarray:
        """Positions at times t; shape (n, 3) for array input, (3,) for scalar."""
        scalar = np.isscalar(t) or np.ndim(t) == 0
        tt = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if clamp:
            tt = np.clip(tt, 0.0, self.duration)
        elif np.any((tt <= 0) | (tt > self.duration)):
            raise ValueError(f"time outside trajectory domain (0, {self.duration}]")
        idx = np.searchsorted(self._bounds, tt, side="left")
        idx = np.minimum(idx, len(self._pieces) - 1)
        out = np.empty((tt.size, 3))
        for i in np.unique(idx):
            m = idx == i
            out[m] = self._pieces[i].pos(tt[m])
        return out[0] if scalar else out

    def velocity(self, t, clamp: bool = False) -> np.ndarray:
        """Velocities at times t, right-hand limits at joints; zero outside domain."""
        scalar = np.isscalar(t) or np.ndim(t) == 0
        tt = np.atleast_1d(np.asarray(t, dtype=np.float64))
        outside = np.zeros(tt.size, dtype=bool)
        if clamp:
            outside = (tt <= 0) | (tt > self.duration)
            tt = np.clip(tt, 0.0, self.duration)
        elif np.any((tt <= 0) | (tt > self.duration)):
            raise ValueError(f"time outside trajectory domain (0, {self.duration}]")
        # side="right" selects the following piece exactly at a joint
        idx = np.searchsorted(self._bounds, tt, side="right")
        idx = np.minimum(idx, len(self._pieces) - 1)
        out = np.empty((tt.size, 3))
        for i in np.unique(idx):
            m = idx == i
            out[m] = self._pieces[i].vel(tt[m])
        out[outside] = 0.0
        return out[0] if scalar else out


def eval_trajectory(traj: Trajectory, t) -> tuple[np.ndarray, np.ndarray]:
    """Position and velocity at time(s) t within the domain (0, T]."""
    return traj.position(t), traj.velocity(t)


def trajectory_to_csv(traj: Trajectory, grid: TimeGrid, path) -> None:
    """Write sampled rows t,x1,x2,x3 for the grid times."""
    times = grid.times
    pts = traj.position(times)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "x1", "x2", "x3"])
        for t, p in zip(times, pts):
            w.writerow([f"{t:.17g}", f"{p[0]:.17g}", f"{p[1]:.17g}", f"{p[2]:.17g}"])


# -- analytic builders --------------------------------------------------------


def _analytic_piece(t_lo, t_hi, pos, vel) -> _Piece:
    def pos_v(t):
        return np.stack(pos(t), axis=-1)

    def vel_v(t):
        return np.stack(vel(t), axis=-1)

    return _Piece(float(t_lo), float(t_hi), pos_v, vel_v)


def _linear_piece(t0: float, t1: float, p0: np.ndarray, slope: np.ndarray) -> _Piece:
    p0 = np.asarray(p0, dtype=np.float64)
    slope = np.asarray(slope, dtype=np.float64)

    def pos(t):
        return p0 + np.outer(t - t0, slope)

    def vel(t):
        return np.broadcast_to(slope, (t.size, 3)).copy()

    return _Piece(float(t0), float(t1), pos, vel)


def _letter_c() -> Trajectory:
    w = 3 * math.pi / 20

    piece = _analytic_piece(
        0.0,
        10.0,
        lambda t: (np.zeros_like(t), 3 * np.cos(w * t + math.pi / 4), 3 * np.sin(w * t + math.pi / 4)),
        lambda t: (np.zeros_like(t), -3 * w * np.sin(w * t + math.pi / 4), 3 * w * np.cos(w * t + math.pi / 4)),
    )
    return Trajectory([piece], name="letter-C")


def _digit_3() -> Trajectory:
    w = math.pi / 5
    # |sin((t-5)*pi/5)| has a kink at t=5: resolve the sign per branch
    pieces = [
        _analytic_piece(
            0.0,
            5.0,
            lambda t: (np.zeros_like(t), -5 * np.sin(w * (t - 5)) - 2, 5 - t),
            lambda t: (np.zeros_like(t), -5 * w * np.cos(w * (t - 5)), -np.ones_like(t)),
        ),
        _analytic_piece(
            5.0,
            10.0,
            lambda t: (np.zeros_like(t), 5 * np.sin(w * (t - 5)) - 2, 5 - t),
            lambda t: (np.zeros_like(t), 5 * w * np.cos(w * (t - 5)), -np.ones_like(t)),
        ),
    ]
    return Trajectory(pieces, name="digit-3")


def _digit_8() -> Trajectory:
    w = math.pi / 2

    def lower_pos(t):
        return (np.zeros_like(t), -2 * np.cos(w * (t - 2)), 2 * np.sin(w * (t - 2)) - 2)

    def lower_vel(t):
        return (np.zeros_like(t), 2 * w * np.sin(w * (t - 2)), 2 * w * np.cos(w * (t - 2)))

    def upper_pos(t):
        return (np.zeros_like(t), 2 * np.cos(w * t), 2 * np.sin(w * t) + 2)

    def upper_vel(t):
        return (np.zeros_like(t), -2 * w * np.sin(w * t), 2 * w * np.cos(w * t))

    pieces = [
        _analytic_piece(0.0, 3.0, lower_pos, lower_vel),
        _analytic_piece(3.0, 7.0, upper_pos, upper_vel),
        _analytic_piece(7.0, 8.0, lower_pos, lower_vel),
    ]
    return Trajectory(pieces, name="digit-8")


def _cyl_spiral() -> Trajectory:
    piece = _analytic_piece(
        0.0,
        20.0,
        lambda t: (3 * np.cos(t), 3 * np.sin(t), 0.5 * t - 5),
        lambda t: (-3 * np.sin(t), 3 * np.cos(t), np.full_like(t, 0.5)),
    )
    return Trajectory([piece], name="cyl-spiral")


def _cone_spiral() -> Trajectory:
    piece = _analytic_piece(
        0.0,
        20.0,
        lambda t: (0.2 * t * np.cos(t), 0.2 * t * np.sin(t), 0.5 * t - 5),
        lambda t: (
            0.2 * np.cos(t) - 0.2 * t * np.sin(t),
            0.2 * np.sin(t) + 0.2 * t * np.cos(t),
            np.full_like(t, 0.5),
        ),
    )
    return Trajectory([piece], name="cone-spiral")


# hello: five letter strokes drawn at _STROKE_SPEED joined by fast pen moves
# at _CONNECT_SPEED.  Stroke lengths are multiples of _STROKE_SPEED * 0.1 and
# every connector is exactly _CONNECT_SPEED * 0.1 long, so on the reference
# 0.1 s grid samples always land on strokes, never mid-connector, and the
# total duration is exactly 8 s.
_STROKE_SPEED = 8.0
_CONNECT_SPEED = 80.0

# The writing plane sits 4 m in front of the receiver wall side of the scene
# rather than through the origin: correlation peaks sharpen as the source
# nears the array, which keeps per-step scatter at strong noise well below
# the inter-letter hops that gap segmentation has to detect.
_CANVAS_DEPTH = 4.0

_HELLO_STROKES = [
    # H
    [(0.0, 5.2), (0.0, 0.0), (0.0, 2.6), (2.0, 2.6), (2.0, 5.2), (2.0, 0.0)],
    # E
    [(5.2, 5.6), (3.2, 5.6), (3.2, 2.8), (5.2, 2.8), (3.2, 2.8), (3.2, 0.0), (5.2, 0.0)],
    # L
    [(6.4, 5.2), (6.4, 0.0), (8.4, 0.0)],
    # L
    [(9.6, 5.2), (9.6, 0.0), (11.6, 0.0)],
    # O
    [(13.8, 5.6), (12.8, 5.6), (12.8, 0.0), (14.8, 0.0), (14.8, 5.6), (13.8, 5.6)],
]
_HELLO_SHIFT = (-7.4, -2.8)


def _hello() -> Trajectory:
    dt_conn = 0.1
    leg_len = 0.5 * _CONNECT_SPEED * dt_conn  # two equal legs per connector

    def lift(q):  # canvas (a, b) -> world (depth, x2, x3), centered
        return np.array([_CANVAS_DEPTH, q[0] + _HELLO_SHIFT[0], q[1] + _HELLO_SHIFT[1]])

    pieces: list[_Piece] = []
    t = 0.0
    prev_end: np.ndarray | None = None
    for stroke in _HELLO_STROKES:
        pts = [lift(q) for q in stroke]
        if prev_end is not None:
            # connector: two straight legs of equal length through a lateral
            # waypoint, total path exactly _CONNECT_SPEED * dt_conn
            a, b = prev_end, pts[0]
            disp = b - a
            d = float(np.linalg.norm(disp))
            if d >= 2 * leg_len:
                raise ValueError("connector displacement exceeds its path budget")
            # lateral offset in the x2-x3 plane, oriented upward
            perp = np.array([0.0, -disp[2], disp[1]]) / d
            if perp[2] < 0 or (perp[2] == 0 and perp[1] < 0):
                perp = -perp
            mid = 0.5 * (a + b) + math.sqrt(leg_len**2 - 0.25 * d**2) * perp
            for p0, p1 in ((a, mid), (mid, b)):
                seg = float(np.linalg.norm(p1 - p0))
                dur = seg / _CONNECT_SPEED
                pieces.append(_linear_piece(t, t + dur, p0, (p1 - p0) / dur))
                t += dur
        for p0, p1 in zip(pts, pts[1:]):
            seg = float(np.linalg.norm(p1 - p0))
            dur = seg / _STROKE_SPEED
            pieces.append(_linear_piece(t, t + dur, p0, (p1 - p0) / dur))
            t += dur
        prev_end = pts[-1]
    # land exactly on the advertised duration despite float accumulation
    pieces[-1] = _Piece(pieces[-1].t_lo, 8.0, pieces[-1].pos, pieces[-1].vel)
    return Trajectory(pieces, name="hello", v_max=_CONNECT_SPEED)


_BUILDERS = {
    "letter-C": _letter_c,
    "digit-3": _digit_3,
    "digit-8": _digit_8,
    "cyl-spiral": _cyl_spiral,
    "cone-spiral": _cone_spiral,
    "hello": _hello,
}

SCENARIO_IDS = tuple(_BUILDERS)


def builtin_trajectory(name: str) -> Trajectory:
    """Build one of the catalog trajectories by its stable id."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; known: {', '.join(SCENARIO_IDS)}") from None
    return builder()


def hello_segment_count() -> int:
    """Number of separate pen-down strokes in the hello path."""
    return len(_HELLO_STROKES)
