"""Post-processing of reconstructed paths.

Raw per-step estimates live on the search lattice and carry quantization
jitter.  They are segmented at large jumps (pen lifts between letters,
genuinely disjoint strokes) and each segment is replaced by a truncated
Fourier curve

    x(s) = a0 + sum_{n=1}^{P} a_n cos(n s) + b_n sin(n s)

on its own local clock s.  Coefficients are Riemann sums of the sampled
path, so a0 is exactly the sample mean and higher coefficients converge at
O(1/N) in the step count.

`smooth` maps each segment's wall-clock span affinely onto s in (0, 2*pi]
before fitting.  On that interval the integer harmonics are orthogonal, so
the Riemann-sum coefficients are (discretized) least-squares projections
and a handful of harmonics follow the stroke: segments whose own period
does not divide their duration would otherwise pick up O(1) projection
errors that no order can repair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FourierCurve",
    "fourier_fit",
    "segment_gaps",
    "prune_segments",
    "SmoothedPath",
    "smooth",
    "trajectory_error",
    "smoothing_order",
    "SMOOTHING_ORDERS",
]

# curve orders matched to the built-in spirals: one harmonic traces a
# circle, five follow the widening cone
SMOOTHING_ORDERS = {"cyl-spiral": 1, "cone-spiral": 5}
_DEFAULT_ORDER = 3


def smoothing_order(scenario: str, default: int = _DEFAULT_ORDER) -> int:
    return SMOOTHING_ORDERS.get(scenario, default)


@dataclass(frozen=True)
class FourierCurve:
    """Truncated Fourier expansion of one path segment.

    a0 has shape (3,), a and b have shape (order, 3).  The curve is a
    function of the local time s = (t - t_offset) * t_scale, meant for
    s in (0, duration].
    """

    a0: np.ndarray
    a: np.ndarray
    b: np.ndarray
    duration: float
    t_offset: float = 0.0
    t_scale: float = 1.0

    def __post_init__(self):
        if self.a0.shape != (3,) or self.a.shape != self.b.shape or self.a.shape[1:] != (3,):
            raise ValueError("coefficient arrays have inconsistent shapes")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.t_scale <= 0:
            raise ValueError("t_scale must be positive")

    @property
    def order(self) -> int:
        return self.a.shape[0]

    def evaluate_local(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        out = np.tile(self.a0, (s.size, 1))
        for n in range(1, self.order + 1):
            out += np.outer(np.cos(n * s), self.a[n - 1])
            out += np.outer(np.sin(n * s), self.b[n - 1])
        return out

    def evaluate(self, t) -> np.ndarray:
        """Evaluate at global times t."""
        return self.evaluate_local((np.asarray(t, dtype=np.float64) - self.t_offset) * self.t_scale)


def fourier_fit(
    points: np.ndarray,
    duration: float,
    order: int,
    t_offset: float = 0.0,
    t_scale: float = 1.0,
) -> FourierCurve:
    """Fit a truncated Fourier curve to points sampled at s_i = i T/N,
    i = 1..N.

    Coefficients are left Riemann sums with uniform weight T/N:

        a0  = (1/T) sum x_i dt            (exactly the sample mean)
        a_n = (2/T) sum x_i cos(n s_i) dt
        b_n = (2/T) sum x_i sin(n s_i) dt

    The order is clamped to floor((N-1)/2) so the highest harmonic stays
    below the sampling limit.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must have shape (n, 3)")
    if duration <= 0:
        raise ValueError("duration must be positive")
    if order < 0:
        raise ValueError("order must be non-negative")
    n_samples = pts.shape[0]
    if n_samples == 0:
        raise ValueError("cannot fit an empty segment")
    order = min(order, (n_samples - 1) // 2)
    s = np.arange(1, n_samples + 1) * (duration / n_samples)
    a0 = pts.mean(axis=0)
    a = np.zeros((order, 3))
    b = np.zeros((order, 3))
    for n in range(1, order + 1):
        a[n - 1] = (2.0 / n_samples) * (np.cos(n * s) @ pts)
        b[n - 1] = (2.0 / n_samples) * (np.sin(n * s) @ pts)
    return FourierCurve(a0=a0, a=a, b=b, duration=duration, t_offset=t_offset, t_scale=t_scale)


def segment_gaps(points: np.ndarray, factor: float = 3.0) -> tuple[tuple[int, int], ...]:
    """Split a point sequence where a consecutive jump exceeds `factor`
    times the mean consecutive distance.

    Returns half-open index ranges covering the whole sequence.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n == 0:
        return ()
    if n == 1:
        return ((0, 1),)
    jumps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    threshold = factor * jumps.mean()
    cuts = np.nonzero(jumps > threshold)[0] + 1
    bounds = [0, *cuts.tolist(), n]
    return tuple((bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1))


@dataclass(frozen=True)
class SmoothedPath:
    """Segmented Fourier smoothing of a reconstruction.

    steps/times/points cover the points that survived pruning; pruned
    holds the step numbers of discarded stray points.
    """

    steps: np.ndarray
    times: np.ndarray
    points: np.ndarray
    segments: tuple[tuple[int, int], ...]
    curves: tuple[FourierCurve, ...]
    pruned: tuple[int, ...] = ()

    @property
    def n_segments(self) -> int:
        return len(self.segments)


def prune_segments(
    points: np.ndarray, gap_factor: float = 3.0, min_size: int = 4
) -> tuple[np.ndarray, tuple[tuple[int, int], ...]]:
    """Drop stray points and return (keep mask, segments of the kept set).

    A lattice argmax under heavy noise occasionally jumps far off the path
    for a step or two, which the gap rule then brackets as a tiny segment.
    Those segments are discarded and the split recomputed until stable, so
    an isolated stray inside a letter no longer cuts the letter in half.
    min_size 1 disables pruning.
    """
    pts = np.asarray(points, dtype=np.float64)
    keep = np.arange(pts.shape[0])
    while True:
        segments = segment_gaps(pts[keep], gap_factor)
        tiny = [s for s in segments if s[1] - s[0] < min_size]
        if not tiny or len(tiny) == len(segments):
            break
        drop = np.concatenate([np.arange(lo, hi) for lo, hi in tiny])
        keep = np.delete(keep, drop)
    mask = np.zeros(pts.shape[0], dtype=bool)
    mask[keep] = True
    return mask, segments


def _fill_segment(steps: np.ndarray, points: np.ndarray, dt: float) -> np.ndarray:
    """Positions for every step between steps[0] and steps[-1]; holes left
    by skipped steps are linearly interpolated in time."""
    j0, j1 = int(steps[0]), int(steps[-1])
    full = np.arange(j0, j1 + 1)
    if full.size == steps.size:
        return points
    out = np.empty((full.size, 3))
    for axis in range(3):
        out[:, axis] = np.interp(full * dt, steps * dt, points[:, axis])
    return out


def smooth(
    result,
    order: int | None = None,
    gap_factor: float = 3.0,
    scenario: str | None = None,
    min_segment: int = 1,
) -> SmoothedPath:
    """Segment a reconstruction at jumps and fit each piece.

    `result` needs steps/times/points arrays and uniform stepping (the
    reconstruction output).  The segment's local clock starts one step
    before its first sample and is rescaled so samples land on
    s_i = i 2pi/N exactly, one basis period per segment.  min_segment > 1
    discards stray segments via prune_segments first.
    """
    if order is None:
        order = smoothing_order(scenario) if scenario else _DEFAULT_ORDER
    steps = np.asarray(result.steps, dtype=np.int64)
    times = np.asarray(result.times, dtype=np.float64)
    points = np.asarray(result.points, dtype=np.float64)
    if steps.size == 0:
        return SmoothedPath(steps=steps, times=times, points=points.reshape(0, 3), segments=(), curves=())
    if steps.size > 1:
        dt = float(np.diff(times).min() / np.diff(steps).min())
    else:
        dt = float(times[0] / steps[0])
    pruned: tuple[int, ...] = ()
    if min_segment > 1 and steps.size > 1:
        mask, segments = prune_segments(points, gap_factor, min_segment)
        pruned = tuple(int(j) for j in steps[~mask])
        steps, times, points = steps[mask], times[mask], points[mask]
    else:
        segments = segment_gaps(points, gap_factor)
    curves = []
    smoothed = np.empty_like(points)
    for lo, hi in segments:
        seg_steps = steps[lo:hi]
        filled = _fill_segment(seg_steps, points[lo:hi], dt)
        n_filled = filled.shape[0]
        t_offset = (int(seg_steps[0]) - 1) * dt
        t_scale = 2.0 * math.pi / (n_filled * dt)
        curve = fourier_fit(filled, 2.0 * math.pi, order, t_offset=t_offset, t_scale=t_scale)
        curves.append(curve)
        smoothed[lo:hi] = curve.evaluate(times[lo:hi])
    return SmoothedPath(
        steps=steps,
        times=times,
        points=smoothed,
        segments=segments,
        curves=tuple(curves),
        pruned=pruned,
    )


def trajectory_error(trajectory, times, points) -> np.ndarray:
    """Pointwise distance from estimated points to the true path."""
    times = np.asarray(times, dtype=np.float64)
    pts = np.asarray(points, dtype=np.float64)
    truth = np.vstack([trajectory.position(float(t)) for t in times])
    return np.linalg.norm(pts - truth, axis=1)
