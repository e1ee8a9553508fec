"""Time-harmonic scattering by a penetrable inclusion via a volume integral.

For a unit point source at z0 the reduced field u(x) satisfies

    u(x) = Phi(x, z0) + integral_Om gamma(y) u(y) Phi(x, y) dy,
    gamma = omega0^2 (1 / c^2 - 1 / c0^2),  Phi(x, y) = exp(i k0 |x-y|) / (4 pi |x-y|),

with k0 = omega0 / c0.  The integral is discretized by midpoint quadrature
on a voxelization of the inclusion; the singular self cell is replaced by
the analytic integral of Phi over the ball of equal volume.  The solution
is the Neumann series sum_k K^k Phi, which converges because the contrast
is small at the operating frequency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .forward import ConvergenceError, PotentialMode, WaveRecord
from .geometry import MediumSpec, ReceiverArray, TimeGrid
from .trajectories import Trajectory

__all__ = [
    "helmholtz_fundamental",
    "contrast_scale",
    "VoxelGrid",
    "make_voxel_grid",
    "operator_norm_bound",
    "HelmholtzSolution",
    "solve_lippmann_schwinger",
    "eval_total_field",
    "synthesize_record_inhomogeneous",
]

_CHUNK = 2_000_000  # pairwise kernel entries evaluated per slab


def helmholtz_fundamental(x, y, k0: float) -> np.ndarray:
    """Outgoing free-space kernel exp(i k0 r) / (4 pi r) between point sets."""
    xa = np.atleast_2d(np.asarray(x, dtype=np.float64))
    ya = np.atleast_2d(np.asarray(y, dtype=np.float64))
    diff = xa[:, None, :] - ya[None, :, :]
    r = np.linalg.norm(diff, axis=2)
    if np.any(r <= 0):
        raise ValueError("kernel evaluated at coincident points")
    out = np.exp(1j * k0 * r) / (4 * math.pi * r)
    if np.ndim(x) == 1 and np.ndim(y) == 1:
        return complex(out[0, 0])
    if np.ndim(x) == 1:
        return out[0]
    if np.ndim(y) == 1:
        return out[:, 0]
    return out


def contrast_scale(medium: MediumSpec, omega0: float) -> float:
    """Smallness scale omega0^2 |c0^-2 - c^-2| controlling the scattering size."""
    if medium.homogeneous:
        return 0.0
    return omega0**2 * abs(1.0 / medium.c0**2 - 1.0 / medium.c**2)


@dataclass(frozen=True)
class VoxelGrid:
    """Midpoint voxelization of the inclusion with per-voxel contrast."""

    centers: np.ndarray
    cell_volume: float
    contrast: np.ndarray
    resolution: tuple[int, int, int]

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64)
        g = np.asarray(self.contrast, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != 3 or g.shape != (c.shape[0],):
            raise ValueError("centers must be (n, 3) with matching contrast (n,)")
        if self.cell_volume <= 0:
            raise ValueError("cell volume must be positive")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "contrast", g)

    @property
    def n_voxels(self) -> int:
        return self.centers.shape[0]

    @property
    def self_radius(self) -> float:
        """Radius of the ball with the same volume as one voxel."""
        return (3.0 * self.cell_volume / (4.0 * math.pi)) ** (1.0 / 3.0)


def make_voxel_grid(medium: MediumSpec, omega0: float, resolution: int | Sequence[int] = 20) -> VoxelGrid:
    """Voxelize the medium's inclusion at the given cells-per-axis resolution."""
    if medium.inclusion is None:
        raise ValueError("medium has no inclusion to voxelize")
    if isinstance(resolution, (int, np.integer)):
        res = (int(resolution),) * 3
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != 3 or any(r < 1 for r in res):
        raise ValueError(f"resolution must be >= 1 per axis, got {resolution}")
    box = medium.inclusion
    axes = []
    for i in range(3):
        h = box.size[i] / res[i]
        axes.append(box.low[i] + h * (np.arange(res[i]) + 0.5))
    g = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([a.ravel() for a in g], axis=1)
    cell_volume = float(np.prod(box.size / np.asarray(res)))
    gamma = omega0**2 * (1.0 / medium.c**2 - 1.0 / medium.c0**2)
    contrast = np.full(centers.shape[0], gamma)
    return VoxelGrid(centers=centers, cell_volume=cell_volume, contrast=contrast, resolution=res)


def operator_norm_bound(grid: VoxelGrid) -> float:
    """Closed-form bound on the integral operator's max-norm.

    Rearrangement: among equal-volume domains the centered ball maximizes
    the integral of 1/(4 pi r), giving value R^2/2 with R the equal-volume
    ball radius of the whole inclusion.
    """
    total_volume = grid.cell_volume * grid.n_voxels
    r_star = (3.0 * total_volume / (4.0 * math.pi)) ** (1.0 / 3.0)
    return float(np.max(np.abs(grid.contrast))) * 0.5 * r_star**2


def _self_cell_integral(k0: float, a: float) -> complex:
    """Integral of Phi over a ball of radius a centered at the singularity.

    Equals (exp(i k a)(1 - i k a) - 1) / k^2; evaluated by series when k a is
    tiny to avoid cancellation.
    """
    ka = k0 * a
    if abs(ka) < 1e-3:
        # sum_{m>=2} (1-m)/m! (i k)^{m-2} a^m
        total = 0.0 + 0.0j
        term_base = 1j * k0
        for m in range(2, 9):
            total += (1 - m) / math.factorial(m) * term_base ** (m - 2) * a**m
        return -total  # (1-m) is negative for m>=2; flip to the positive form
    return (np.exp(1j * ka) * (1 - 1j * ka) - 1) / k0**2


def _apply_operator(grid: VoxelGrid, k0: float, u: np.ndarray, self_term: complex) -> np.ndarray:
    """K u at the voxel centers; u has shape (n_voxels, n_rhs)."""
    centers = grid.centers
    n = grid.n_voxels
    weights = (grid.contrast * grid.cell_volume)[:, None]  # column scaling
    out = np.empty_like(u)
    rows_per_chunk = max(1, _CHUNK // n)
    for start in range(0, n, rows_per_chunk):
        stop = min(start + rows_per_chunk, n)
        diff = centers[start:stop, None, :] - centers[None, :, :]
        r = np.linalg.norm(diff, axis=2)
        block_idx = np.arange(start, stop)
        r[block_idx - start, block_idx] = 1.0  # placeholder, zeroed below
        kernel = np.exp(1j * k0 * r) / (4 * math.pi * r)
        kernel[block_idx - start, block_idx] = 0.0  # diagonal handled analytically
        out[start:stop] = kernel @ (weights * u)
        out[start:stop] += (grid.contrast[block_idx, None] * self_term) * u[block_idx]
    return out


@dataclass(frozen=True)
class HelmholtzSolution:
    """Reduced total field at the voxel centers for one or more sources."""

    field: np.ndarray  # (n_voxels, n_sources) complex
    incident: np.ndarray
    k0: float
    iterations: int
    residuals: tuple[float, ...]
    norm_bound: float


def solve_lippmann_schwinger(
    z0,
    grid: VoxelGrid,
    k0: float,
    tol: float = 1e-8,
    max_terms: int = 60,
) -> HelmholtzSolution:
    """Neumann-series solution of the volume integral equation.

    z0 may be a single source point (3,) or a batch (k, 3); the series is
    accumulated for all sources simultaneously since the operator is shared.
    """
    if k0 <= 0:
        raise ValueError("k0 must be positive")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    sources = np.atleast_2d(np.asarray(z0, dtype=np.float64))
    bound = operator_norm_bound(grid)
    if bound >= 1.0:
        raise ConvergenceError(
            f"contrast-frequency regime outside the convergent range (norm bound {bound:.3g} >= 1)"
        )
    self_term = _self_cell_integral(k0, grid.self_radius)
    incident = helmholtz_fundamental(grid.centers, sources, k0)
    incident = np.atleast_2d(incident.reshape(grid.n_voxels, -1))
    scale = float(np.max(np.abs(incident)))
    u = incident.copy()
    term = incident
    residuals = []
    for it in range(1, max_terms + 1):
        term = _apply_operator(grid, k0, term, self_term)
        u = u + term
        res = float(np.max(np.abs(term))) / scale
        residuals.append(res)
        if res < tol:
            break
        if len(residuals) >= 2 and residuals[-1] > residuals[-2]:
            raise ConvergenceError("Neumann series terms are growing; aborting")
    else:
        raise ConvergenceError(f"Neumann series did not reach {tol:g} in {max_terms} terms")
    return HelmholtzSolution(
        field=u,
        incident=incident,
        k0=k0,
        iterations=it,
        residuals=tuple(residuals),
        norm_bound=bound,
    )


def eval_total_field(solution: HelmholtzSolution, grid: VoxelGrid, z0, x) -> np.ndarray:
    """Total reduced field at exterior points x for each source in the solution."""
    sources = np.atleast_2d(np.asarray(z0, dtype=np.float64))
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    incident = helmholtz_fundamental(pts, sources, solution.k0).reshape(pts.shape[0], -1)
    kernel = helmholtz_fundamental(pts, grid.centers, solution.k0).reshape(pts.shape[0], -1)
    scattered = kernel @ ((grid.contrast * grid.cell_volume)[:, None] * solution.field)
    out = incident + scattered
    if np.ndim(x) == 1 and np.ndim(z0) == 1:
        return complex(out[0, 0])
    return out


def synthesize_record_inhomogeneous(
    traj: Trajectory,
    receivers: ReceiverArray,
    grid: TimeGrid,
    medium: MediumSpec,
    omega0: float = 1.0,
    resolution: int | Sequence[int] = 20,
    tol: float = 1e-8,
) -> WaveRecord:
    """Receiver record under the reduced-field model u = sin(omega0 t) Re u_hat.

    With no inclusion (or zero contrast) this is the reduced background field
    evaluated pointwise; otherwise one volume-integral solve per time step,
    batched over steps.
    """
    k0 = omega0 / medium.c0
    times = grid.times
    sources = traj.position(times)
    if medium.homogeneous:
        kernel = helmholtz_fundamental(receivers.positions, sources, k0)
        u_hat = kernel  # (n_receivers, n_steps)
    else:
        voxels = make_voxel_grid(medium, omega0, resolution)
        solution = solve_lippmann_schwinger(sources, voxels, k0, tol=tol)
        u_hat = eval_total_field(solution, voxels, sources, receivers.positions)
    values = np.sin(omega0 * times)[None, :] * np.real(u_hat)
    return WaveRecord(
        values=values,
        receivers=receivers,
        grid=grid,
        omega0=omega0,
        c0=medium.c0,
        trajectory_id=traj.name,
        mode=PotentialMode.UNIT_DIRECTION.value,
        forward="reduced",
        medium=medium if not medium.homogeneous else None,
    )
