"""Field radiated by a moving point emitter in a homogeneous medium.

The emitter carries the causal tone lam(t) = sin(omega0 * t) for 0 < t <= T
and is silent otherwise.  At a receiver x the field is the retarded-time
closed form (a Lienard-Wiechert style potential for the scalar wave
equation):

    u0(x, t) = lam(tau) / (4 pi |x - z0(tau)| * (1 - <d, v(tau)> / c0))

where tau solves tau = t - |x - z0(tau)| / c0.  The direction factor d is
the unit vector (x - z0) / |x - z0| by default; raw-direction mode keeps the
unnormalized difference x - z0, which is dimensionally inconsistent but
retained as a comparison variant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .geometry import MediumSpec, ReceiverArray, TimeGrid
from .trajectories import Trajectory

__all__ = [
    "SourceSignal",
    "RetardedSolveParams",
    "PotentialMode",
    "ConvergenceError",
    "retarded_time",
    "retarded_potential",
    "approx_field",
    "WaveRecord",
    "synthesize_record",
    "synthesize_approx_record",
    "add_noise",
    "noise_column",
]

_MIN_DISTANCE = 1e-12


class ConvergenceError(RuntimeError):
    """Fixed-point iteration failed to reach tolerance."""


class PotentialMode(str, Enum):
    """Direction handling in the motion factor of the emitter field."""

    UNIT_DIRECTION = "unit-direction"
    RAW_DIRECTION = "raw-direction"


@dataclass(frozen=True)
class SourceSignal:
    """Causal tone: sin(omega0 * t) on (0, terminal_time], zero elsewhere."""

    omega0: float
    terminal_time: float
    causal: bool = True

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if self.terminal_time <= 0:
            raise ValueError(f"terminal_time must be positive, got {self.terminal_time}")

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        out = np.sin(self.omega0 * t)
        mask = t > self.terminal_time
        if self.causal:
            mask = mask | (t <= 0)
        return np.where(mask, 0.0, out)


@dataclass(frozen=True)
class RetardedSolveParams:
    tolerance: float = 1e-10
    max_iterations: int = 200

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def _retarded_time_many(
    x: np.ndarray,
    traj: Trajectory,
    t: float,
    c0: float,
    params: RetardedSolveParams,
    history: list | None = None,
) -> np.ndarray:
    """Solve tau = t - |x - z0(tau)| / c0 for a batch of receivers at one time.

    Starts at tau = t; the map is a contraction with factor v_max / c0 < 1,
    with the path clamped to its endpoints outside (0, T].
    """
    if traj.v_max >= c0:
        raise ValueError(
            f"emitter speed bound {traj.v_max:.3g} must stay below the wave speed {c0:.3g}"
        )
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    tau = np.full(x.shape[0], float(t))
    if history is not None:
        history.append(tau.copy())
    tol = params.tolerance
    for _ in range(params.max_iterations):
        z = traj.position(tau, clamp=True)
        dist = np.linalg.norm(x - z, axis=1)
        tau_new = t - dist / c0
        step = np.max(np.abs(tau_new - tau))
        tau = tau_new
        if history is not None:
            history.append(tau.copy())
        if step < 0.5 * tol:
            break
    else:
        raise ConvergenceError(
            f"retarded time did not converge in {params.max_iterations} iterations"
        )
    z = traj.position(tau, clamp=True)
    residual = np.abs(tau - (t - np.linalg.norm(x - z, axis=1) / c0))
    if np.max(residual) >= tol:
        raise ConvergenceError(f"retarded-time residual {np.max(residual):.3g} above {tol:.3g}")
    return tau


def retarded_time(
    x,
    traj: Trajectory,
    t: float,
    c0: float,
    params: RetardedSolveParams | None = None,
    history: list | None = None,
):
    """Emission time tau for reception at x at time t; scalar in, scalar out."""
    params = params or RetardedSolveParams()
    xa = np.asarray(x, dtype=np.float64)
    single = xa.ndim == 1
    tau = _retarded_time_many(xa, traj, float(t), float(c0), params, history)
    return float(tau[0]) if single else tau


def retarded_potential(
    x,
    t: float,
    traj: Trajectory,
    c0: float,
    signal: SourceSignal,
    mode: PotentialMode = PotentialMode.UNIT_DIRECTION,
    params: RetardedSolveParams | None = None,
):
    """Emitter field at receiver(s) x and time t; zero before first arrival
    and after the emission has passed."""
    params = params or RetardedSolveParams()
    mode = PotentialMode(mode)
    xa = np.asarray(x, dtype=np.float64)
    single = xa.ndim == 1
    xm = np.atleast_2d(xa)
    tau = _retarded_time_many(xm, traj, float(t), float(c0), params)
    lam = signal.value(tau)
    out = np.zeros(xm.shape[0])
    live = lam != 0.0
    if np.any(live):
        z = traj.position(tau[live], clamp=True)
        v = traj.velocity(tau[live], clamp=True)
        diff = xm[live] - z
        dist = np.linalg.norm(diff, axis=1)
        if np.any(dist < _MIN_DISTANCE):
            raise ValueError("field evaluated at the emitter position")
        if mode is PotentialMode.UNIT_DIRECTION:
            inner = np.sum(diff * v, axis=1) / dist
        else:
            inner = np.sum(diff * v, axis=1)
        denom = 1.0 - inner / c0
        if np.any(denom <= 0):
            raise ValueError(
                "non-positive motion factor in raw-direction mode; "
                "the unnormalized inner product exceeded the wave speed"
            )
        out[live] = lam[live] / (4 * math.pi * dist * denom)
    return float(out[0]) if single else out


def approx_field(x, t: float, traj: Trajectory, omega0: float):
    """Slow-motion approximation: the tone applied at the current position,
    sin(omega0 t) / (4 pi |x - z0(t)|)."""
    xa = np.asarray(x, dtype=np.float64)
    single = xa.ndim == 1
    xm = np.atleast_2d(xa)
    z = traj.position(float(t))
    dist = np.linalg.norm(xm - z, axis=1)
    if np.any(dist < _MIN_DISTANCE):
        raise ValueError("field evaluated at the emitter position")
    out = math.sin(omega0 * float(t)) / (4 * math.pi * dist)
    out = np.asarray(out)
    return float(out[0]) if single else out


@dataclass(frozen=True)
class WaveRecord:
    """Receiver samples u(x_m, t_j): rows are receivers, columns time steps."""

    values: np.ndarray
    receivers: ReceiverArray
    grid: TimeGrid
    omega0: float
    c0: float
    trajectory_id: str = "custom"
    mode: str = PotentialMode.UNIT_DIRECTION.value
    forward: str = "retarded"
    noise: float = 0.0
    seed: int | None = None
    medium: MediumSpec | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        expected = (len(self.receivers), self.grid.n_steps)
        if vals.shape != expected:
            raise ValueError(f"record values must have shape {expected}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("record contains non-finite samples")
        if self.omega0 <= 0 or self.c0 <= 0:
            raise ValueError("omega0 and c0 must be positive")
        if self.noise < 0:
            raise ValueError("noise level must be non-negative")
        object.__setattr__(self, "values", vals)

    @property
    def n_receivers(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    def column(self, step: int) -> np.ndarray:
        """Samples of 1-based time step."""
        if not 1 <= step <= self.n_steps:
            raise ValueError(f"step {step} outside 1..{self.n_steps}")
        return self.values[:, step - 1]


def synthesize_record(
    traj: Trajectory,
    receivers: ReceiverArray,
    grid: TimeGrid,
    medium: MediumSpec,
    omega0: float = 1.0,
    mode: PotentialMode = PotentialMode.UNIT_DIRECTION,
    params: RetardedSolveParams | None = None,
) -> WaveRecord:
    """Sample the retarded-time field on the acquisition grid (homogeneous only)."""
    if not medium.homogeneous:
        raise ValueError("retarded synthesis requires a homogeneous medium")
    signal = SourceSignal(omega0=omega0, terminal_time=traj.duration)
    values = np.empty((len(receivers), grid.n_steps))
    for j, t in enumerate(grid.times):
        values[:, j] = retarded_potential(
            receivers.positions, t, traj, medium.c0, signal, mode=mode, params=params
        )
    return WaveRecord(
        values=values,
        receivers=receivers,
        grid=grid,
        omega0=omega0,
        c0=medium.c0,
        trajectory_id=traj.name,
        mode=PotentialMode(mode).value,
        forward="retarded",
    )


def synthesize_approx_record(
    traj: Trajectory,
    receivers: ReceiverArray,
    grid: TimeGrid,
    medium: MediumSpec,
    omega0: float = 1.0,
) -> WaveRecord:
    """Sample the slow-motion approximate field on the acquisition grid."""
    values = np.empty((len(receivers), grid.n_steps))
    for j, t in enumerate(grid.times):
        values[:, j] = approx_field(receivers.positions, t, traj, omega0)
    return WaveRecord(
        values=values,
        receivers=receivers,
        grid=grid,
        omega0=omega0,
        c0=medium.c0,
        trajectory_id=traj.name,
        mode=PotentialMode.UNIT_DIRECTION.value,
        forward="approx",
    )


def noise_column(seed: int, n_receivers: int, step: int) -> np.ndarray:
    """Uniform(-1, 1) draws for one time step (1-based), from a counter-based
    stream keyed by seed.

    Each step owns a disjoint, block-aligned range of the stream, so columns
    can be generated independently, in any order, with identical results.
    """
    blocks_per_column = -(-n_receivers // 4)  # Philox emits 4 doubles per counter block
    bg = np.random.Philox(key=seed)
    bg.advance((step - 1) * blocks_per_column)
    return np.random.Generator(bg).uniform(-1.0, 1.0, n_receivers)


def add_noise(record: WaveRecord, noise: float, seed: int) -> WaveRecord:
    """Multiplicative uniform noise: u -> u * (1 + noise * r), r ~ U(-1, 1)."""
    if noise < 0:
        raise ValueError(f"noise level must be non-negative, got {noise}")
    n_m = record.n_receivers
    r = np.empty_like(record.values)
    for j in range(record.n_steps):
        r[:, j] = noise_column(seed, n_m, j + 1)
    values = record.values * (1.0 + noise * r)
    return replace(record, values=values, noise=noise, seed=seed)
