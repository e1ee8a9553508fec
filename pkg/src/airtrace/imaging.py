"""Trajectory reconstruction from receiver records by correlation imaging.

For each time step the record column is correlated against the probe field
of a static candidate source z,

    phi(x, t; z) = sin(omega0 t) / (4 pi |x - z|),

normalized by both column norms under the receiver quadrature weights.  The
resulting indicator lies in [0, 1] by Cauchy-Schwarz and peaks at the
emitter position, so the path is recovered by per-step maximization over a
search lattice: exhaustively (global), restricted to a reachable ball around
the previous step (sequential), or along a coarse-to-fine dichotomy of the
time axis that admits parallel execution (parallel).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .forward import WaveRecord
from .geometry import SamplingMesh

__all__ = [
    "IndicatorParams",
    "UndefinedIndicatorError",
    "EmptyBallError",
    "indicator",
    "probe_field",
    "LatticeEvaluator",
    "grid_argmax",
    "valid_steps",
    "ScheduleEntry",
    "TuningSchedule",
    "parallel_schedule",
    "ReconResult",
    "reconstruct_global",
    "reconstruct_sequential",
    "reconstruct_parallel",
]

_SKIP_REL = 1e-12  # column-norm floor relative to the largest column


class UndefinedIndicatorError(RuntimeError):
    """Indicator is 0/0 at this step or candidate point."""


class EmptyBallError(RuntimeError):
    """Reachable ball contains no lattice point: mesh/velocity mismatch."""


@dataclass(frozen=True)
class IndicatorParams:
    """Probe frequency override, receiver guard radius, and the tone floor.

    tone_threshold is the minimum |sin(omega0 t_j)| for a step to count as
    informative.  Near tone zeros the measured column is dominated by the
    retardation remainder (order omega0 r / c0), whose profile across the
    patch carries no position information, so the argmax wanders.  Steps
    below the floor are skipped and later interpolated from neighbors.
    Set it to 0 to keep every step that is not an exact zero.
    """

    omega0: float | None = None
    exclusion_radius: float = 1e-6
    tone_threshold: float = 0.1

    def __post_init__(self):
        if self.omega0 is not None and self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if self.exclusion_radius < 0:
            raise ValueError("exclusion radius must be non-negative")
        if self.tone_threshold < 0:
            raise ValueError("tone threshold must be non-negative")


def probe_field(x, t: float, z, omega0: float) -> np.ndarray:
    """Static-source probe sin(omega0 t) / (4 pi |x - z|) used for matching."""
    xa = np.atleast_2d(np.asarray(x, dtype=np.float64))
    za = np.asarray(z, dtype=np.float64)
    dist = np.linalg.norm(xa - za, axis=1)
    if np.any(dist <= 0):
        raise ValueError("probe evaluated at its own source point")
    out = math.sin(omega0 * t) / (4 * math.pi * dist)
    return float(out[0]) if np.ndim(x) == 1 else out


def _resolve_omega0(record: WaveRecord, params: IndicatorParams | None) -> float:
    if params is not None and params.omega0 is not None:
        return params.omega0
    return record.omega0


def indicator(record: WaveRecord, step: int, z, params: IndicatorParams | None = None) -> float:
    """Normalized correlation of record column `step` (1-based) with the probe
    field of a source at z.  Value in [0, 1]; 0/0 raises."""
    params = params or IndicatorParams()
    omega0 = _resolve_omega0(record, params)
    u = record.column(step)
    t = record.grid.time_at(step)
    w = record.receivers.weights
    dist = np.linalg.norm(record.receivers.positions - np.asarray(z, dtype=np.float64), axis=1)
    if np.any(dist < params.exclusion_radius) or np.any(dist <= 0):
        raise UndefinedIndicatorError("candidate point is inside the receiver guard radius")
    phi = math.sin(omega0 * t) / (4 * math.pi * dist)
    num = abs(float(np.sum(u * phi * w)))
    den = math.sqrt(float(np.sum(u * u * w))) * math.sqrt(float(np.sum(phi * phi * w)))
    if den == 0.0:
        raise UndefinedIndicatorError(f"indicator undefined at step {step} (zero column)")
    return min(num / den, 1.0)


def valid_steps(record: WaveRecord, params: IndicatorParams | None = None) -> np.ndarray:
    """Mask of 1-based steps that carry usable position information.

    A step is dropped when its column norm sits below 1e-12 of the largest
    column (machine zero) or when the probe tone |sin(omega0 t_j)| falls
    below params.tone_threshold; see IndicatorParams for why weak-tone
    columns mislocate the argmax.
    """
    params = params or IndicatorParams()
    omega0 = _resolve_omega0(record, params)
    w = record.receivers.weights
    norms = np.sqrt(np.einsum("mj,m->j", record.values**2, w))
    ceiling = norms.max(initial=0.0)
    mask = norms > _SKIP_REL * ceiling
    tone_floor = max(params.tone_threshold, _SKIP_REL)
    mask &= np.abs(np.sin(omega0 * record.grid.times)) > tone_floor
    return mask


class LatticeEvaluator:
    """Cached per-lattice quantities for fast indicator sweeps.

    The probe tone is a common factor of numerator and denominator, so the
    indicator reduces to |A c| / (|u|_w sqrt(A^2 w)) with A the matrix of
    reciprocal lattice-receiver distances; A and A^2 w depend only on the
    mesh and receivers and are built once.
    """

    def __init__(self, mesh: SamplingMesh, receivers, exclusion_radius: float = 1e-6):
        self.mesh = mesh
        self.receivers = receivers
        self.exclusion_radius = exclusion_radius
        self._A: np.ndarray | None = None
        self._phinorm: np.ndarray | None = None
        self._excluded: np.ndarray | None = None
        self._points: np.ndarray | None = None

    @property
    def points(self) -> np.ndarray:
        if self._points is None:
            self._points = self.mesh.points()
        return self._points

    def prepare(self) -> None:
        """Build the distance tables now instead of on first use; interactive
        callers warm the evaluator so the first query is not the slow one."""
        self._build()

    def _build(self) -> None:
        if self._A is not None:
            return
        pts = self.points
        pos = self.receivers.positions
        w = self.receivers.weights
        n = pts.shape[0]
        A = np.empty((n, pos.shape[0]))
        phinorm2 = np.empty(n)
        excluded = np.zeros(n, dtype=bool)
        chunk = max(1, 4_000_000 // max(pos.shape[0], 1))
        for s in range(0, n, chunk):
            e = min(s + chunk, n)
            d = np.linalg.norm(pts[s:e, None, :] - pos[None, :, :], axis=2)
            excluded[s:e] = np.any(d < max(self.exclusion_radius, 1e-300), axis=1)
            with np.errstate(divide="ignore"):
                A[s:e] = 1.0 / d
            A[s:e][~np.isfinite(A[s:e])] = 0.0
            phinorm2[s:e] = (A[s:e] ** 2) @ w
        self._A = A
        self._phinorm = np.sqrt(phinorm2)
        self._excluded = excluded

    def column_values(self, record: WaveRecord, step: int, idx: np.ndarray | None = None) -> np.ndarray:
        """Indicator over all lattice points (or a flat-index subset).

        Excluded or undefined points get -1 so they never win an argmax.
        """
        self._build()
        u = record.column(step)
        w = record.receivers.weights
        c = u * w
        u_norm = math.sqrt(float(np.sum(u * u * w)))
        if u_norm == 0.0:
            raise UndefinedIndicatorError(f"indicator undefined at step {step} (zero column)")
        if idx is None:
            num = np.abs(self._A @ c)
            den = u_norm * self._phinorm
            out = np.minimum(num / den, 1.0)
            out[self._excluded] = -1.0
        else:
            num = np.abs(self._A[idx] @ c)
            den = u_norm * self._phinorm[idx]
            out = np.minimum(num / den, 1.0)
            out[self._excluded[idx]] = -1.0
        return out


def grid_argmax(
    record: WaveRecord,
    step: int,
    mesh: SamplingMesh,
    params: IndicatorParams | None = None,
    evaluator: LatticeEvaluator | None = None,
    candidates: np.ndarray | None = None,
) -> tuple[np.ndarray, float, int]:
    """Lattice point maximizing the indicator at one step.

    Exact ties resolve to the first point in lexicographic (x1, x2, x3)
    order, which is the lattice storage order.  Returns (point, value,
    flat lattice index).
    """
    params = params or IndicatorParams()
    if evaluator is None:
        evaluator = LatticeEvaluator(mesh, record.receivers, params.exclusion_radius)
    vals = evaluator.column_values(record, step, candidates)
    if vals.size == 0:
        raise EmptyBallError("no candidate lattice points")
    best = int(np.argmax(vals))
    if vals[best] < 0:
        raise UndefinedIndicatorError("all candidate points fall in the receiver guard radius")
    flat = int(best if candidates is None else candidates[best])
    return evaluator.points[flat].copy(), float(vals[best]), flat


@dataclass(frozen=True)
class ScheduleEntry:
    level: int
    slot: int
    step: int
    radius: float


@dataclass(frozen=True)
class TuningSchedule:
    """Visit order for the dichotomy reconstruction."""

    n_steps: int
    duration: float
    v_max: float
    entries: tuple[ScheduleEntry, ...]

    @property
    def levels(self) -> int:
        return max(e.level for e in self.entries) + 1

    @property
    def covered_steps(self) -> tuple[int, ...]:
        return tuple(sorted({e.step for e in self.entries}))

    @property
    def uncovered_steps(self) -> tuple[int, ...]:
        seen = {e.step for e in self.entries}
        return tuple(j for j in range(1, self.n_steps + 1) if j not in seen)

    @property
    def full_coverage(self) -> bool:
        return not self.uncovered_steps


def parallel_schedule(n_steps: int, v_max: float, duration: float) -> TuningSchedule:
    """Dichotomy schedule: level 0 anchors the final step, level i >= 1 visits
    steps floor((2n-1) N / 2^i) with balls shrinking as ceil(N / 2^(i+1)).

    Every step is covered exactly when N is a power of two; otherwise the
    leftover steps are later filled from their nearest visited neighbor.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if v_max <= 0 or duration <= 0:
        raise ValueError("v_max and duration must be positive")
    dt = duration / n_steps

    def radius(level: int) -> float:
        return v_max * math.ceil(n_steps / 2 ** (level + 1)) * dt

    entries = [ScheduleEntry(0, 1, n_steps, radius(0))]
    seen = {n_steps}
    levels = int(math.floor(math.log2(n_steps))) if n_steps > 1 else 0
    for level in range(1, levels + 1):
        for slot in range(1, 2 ** (level - 1) + 1):
            step = (2 * slot - 1) * n_steps // 2**level
            if step == 0 or step in seen:
                continue
            seen.add(step)
            entries.append(ScheduleEntry(level, slot, step, radius(level)))
    return TuningSchedule(n_steps=n_steps, duration=duration, v_max=v_max, entries=tuple(entries))


@dataclass(frozen=True)
class ReconResult:
    """Reconstructed per-step source positions and any derived structure."""

    steps: np.ndarray
    times: np.ndarray
    points: np.ndarray
    indicators: np.ndarray
    method: str
    skipped: tuple[int, ...] = ()
    filled: tuple[int, ...] = ()
    schedule: TuningSchedule | None = None
    segments: tuple[tuple[int, int], ...] | None = None
    curves: tuple | None = None

    def __post_init__(self):
        n = len(self.steps)
        if not (len(self.times) == n and self.points.shape == (n, 3) and len(self.indicators) == n):
            raise ValueError("inconsistent reconstruction arrays")


def _search_radius(mesh: SamplingMesh, v_max: float, dt: float, gap: int) -> float:
    # reachable distance plus one cell diagonal: the previous estimate and
    # the next one are both lattice quantizations of the true path, so the
    # velocity ball alone can be narrower than a single cell
    return v_max * dt * gap + mesh.cell_diagonal


def _result_from(record, mesh, entries, method, skipped, filled=(), schedule=None):
    steps = np.array(sorted(entries), dtype=np.int64)
    times = np.array([record.grid.time_at(int(j)) for j in steps])
    points = np.vstack([entries[int(j)][0] for j in steps]) if len(steps) else np.empty((0, 3))
    indicators = np.array([entries[int(j)][1] for j in steps])
    return ReconResult(
        steps=steps,
        times=times,
        points=points,
        indicators=indicators,
        method=method,
        skipped=tuple(sorted(skipped)),
        filled=tuple(sorted(filled)),
        schedule=schedule,
    )


def reconstruct_global(
    record: WaveRecord,
    mesh: SamplingMesh,
    params: IndicatorParams | None = None,
    evaluator: LatticeEvaluator | None = None,
) -> ReconResult:
    """Independent full-lattice argmax at every usable time step."""
    params = params or IndicatorParams()
    evaluator = evaluator or LatticeEvaluator(mesh, record.receivers, params.exclusion_radius)
    mask = valid_steps(record, params)
    found: dict[int, tuple[np.ndarray, float]] = {}
    skipped = [j + 1 for j in range(record.n_steps) if not mask[j]]
    for j in range(1, record.n_steps + 1):
        if not mask[j - 1]:
            continue
        point, value, _ = grid_argmax(record, j, mesh, params, evaluator)
        found[j] = (point, value)
    return _result_from(record, mesh, found, "global", skipped)


def _ball_argmax(record, step, mesh, params, evaluator, center, radius):
    candidates = mesh.ball_indices(center, radius)
    if candidates.size == 0:
        raise EmptyBallError(
            f"no lattice point within {radius:.3g} m at step {step}; "
            "the search ball is narrower than the mesh"
        )
    return grid_argmax(record, step, mesh, params, evaluator, candidates)


def reconstruct_sequential(
    record: WaveRecord,
    mesh: SamplingMesh,
    v_max: float,
    params: IndicatorParams | None = None,
    evaluator: LatticeEvaluator | None = None,
) -> ReconResult:
    """March through time: global argmax at the first usable step, then a
    reachable-ball argmax around the previous estimate."""
    if v_max <= 0:
        raise ValueError("v_max must be positive")
    params = params or IndicatorParams()
    evaluator = evaluator or LatticeEvaluator(mesh, record.receivers, params.exclusion_radius)
    mask = valid_steps(record, params)
    dt = record.grid.dt
    found: dict[int, tuple[np.ndarray, float]] = {}
    skipped = [j + 1 for j in range(record.n_steps) if not mask[j]]
    prev: tuple[int, np.ndarray] | None = None
    for j in range(1, record.n_steps + 1):
        if not mask[j - 1]:
            continue
        if prev is None:
            point, value, _ = grid_argmax(record, j, mesh, params, evaluator)
        else:
            gap = j - prev[0]
            point, value, _ = _ball_argmax(
                record, j, mesh, params, evaluator, prev[1], _search_radius(mesh, v_max, dt, gap)
            )
        found[j] = (point, value)
        prev = (j, point)
    return _result_from(record, mesh, found, "sequential", skipped)


def reconstruct_parallel(
    record: WaveRecord,
    mesh: SamplingMesh,
    v_max: float,
    params: IndicatorParams | None = None,
    evaluator: LatticeEvaluator | None = None,
) -> ReconResult:
    """Dichotomy reconstruction: anchor the final step globally, then halve
    intervals, searching each level inside its parent's reachable ball.
    Steps the schedule cannot reach (non power-of-two counts) are filled from
    their nearest visited neighbor and flagged."""
    if v_max <= 0:
        raise ValueError("v_max must be positive")
    params = params or IndicatorParams()
    evaluator = evaluator or LatticeEvaluator(mesh, record.receivers, params.exclusion_radius)
    mask = valid_steps(record, params)
    dt = record.grid.dt
    schedule = parallel_schedule(record.n_steps, v_max, record.grid.duration)
    skipped = [j + 1 for j in range(record.n_steps) if not mask[j]]

    found: dict[int, tuple[np.ndarray, float]] = {}
    by_slot: dict[tuple[int, int], tuple[int, np.ndarray]] = {}
    radii = {(e.level, e.slot): e.radius for e in schedule.entries}
    for e in schedule.entries:
        if not mask[e.step - 1]:
            continue
        if e.level == 0:
            point, value, _ = grid_argmax(record, e.step, mesh, params, evaluator)
        else:
            # climb to the nearest available ancestor; its ball limits the search
            lvl, slot = e.level - 1, (e.slot + 1) // 2
            while (lvl, slot) not in by_slot and lvl > 0:
                lvl, slot = lvl - 1, (slot + 1) // 2
            if (lvl, slot) not in by_slot:
                point, value, _ = grid_argmax(record, e.step, mesh, params, evaluator)
            else:
                _, center = by_slot[(lvl, slot)]
                radius = radii[(lvl, slot)] + mesh.cell_diagonal
                point, value, _ = _ball_argmax(
                    record, e.step, mesh, params, evaluator, center, radius
                )
        found[e.step] = (point, value)
        by_slot[(e.level, e.slot)] = (e.step, point)

    filled = []
    targets = [j for j in range(1, record.n_steps + 1) if mask[j - 1] and j not in found]
    for j in targets:
        visited = sorted(found)
        if not visited:
            point, value, _ = grid_argmax(record, j, mesh, params, evaluator)
        else:
            nearest = min(visited, key=lambda v: (abs(v - j), v))
            gap = abs(nearest - j)
            point, value, _ = _ball_argmax(
                record, j, mesh, params, evaluator, found[nearest][0],
                _search_radius(mesh, v_max, dt, gap),
            )
        found[j] = (point, value)
        filled.append(j)
    return _result_from(record, mesh, found, "parallel", skipped, filled, schedule)
