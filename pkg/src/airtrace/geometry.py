"""Geometric primitives: points, time grids, receiver patches, sampling lattices, media."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "as_point",
    "Cuboid",
    "TimeGrid",
    "ReceiverArray",
    "make_receiver_array",
    "SamplingMesh",
    "MediumSpec",
]


def as_point(p: Iterable[float]) -> np.ndarray:
    """Coerce to a float64 array of shape (3,), requiring finite components."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-component point, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"point has non-finite components: {arr}")
    return arr


@dataclass(frozen=True)
class Cuboid:
    """Axis-aligned box given by center and edge lengths."""

    center: np.ndarray
    size: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        object.__setattr__(self, "size", as_point(self.size))
        if np.any(self.size <= 0):
            raise ValueError(f"cuboid edge lengths must be positive, got {self.size}")

    @property
    def low(self) -> np.ndarray:
        return self.center - 0.5 * self.size

    @property
    def high(self) -> np.ndarray:
        return self.center + 0.5 * self.size

    @property
    def volume(self) -> float:
        return float(np.prod(self.size))

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Boolean mask of points inside the box (inclusive, widened by tol)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        inside = np.all((pts >= self.low - tol) & (pts <= self.high + tol), axis=1)
        return inside if points is not pts else inside


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling times t_j = j * duration / n_steps for j = 1..n_steps."""

    duration: float
    n_steps: int

    def __post_init__(self):
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError(f"duration must be positive and finite, got {self.duration}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.duration / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.n_steps + 1, dtype=np.float64) * (self.duration / self.n_steps)

    def time_at(self, step: int) -> float:
        """Time of 1-based step number."""
        if not 1 <= step <= self.n_steps:
            raise ValueError(f"step {step} outside 1..{self.n_steps}")
        return step * (self.duration / self.n_steps)


@dataclass(frozen=True)
class ReceiverArray:
    """Receiver positions with their surface quadrature weights."""

    positions: np.ndarray
    weights: np.ndarray
    radius: float | None = None
    polar_range: tuple[float, float] | None = None
    azimuth_range: tuple[float, float] | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must have shape (n, 3), got {pos.shape}")
        if w.shape != (pos.shape[0],):
            raise ValueError("weights must match the number of receivers")
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(w)):
            raise ValueError("positions and weights must be finite")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def area(self) -> float:
        """Total patch area represented by the quadrature."""
        return float(np.sum(self.weights))


def _patch_grid_shape(n_receivers: int, polar_extent: float, azimuth_extent: float) -> tuple[int, int]:
    """Pick rows x cols so the grid aspect is closest to the patch aspect.

    The last row may hold fewer cells than the others; candidates that would
    leave it empty are excluded.
    """
    aspect = polar_extent / azimuth_extent
    best = None
    for n_theta in range(1, n_receivers + 1):
        n_phi = -(-n_receivers // n_theta)  # ceil
        remainder = n_receivers - (n_theta - 1) * n_phi
        if remainder < 1:
            continue
        score = abs(n_theta / n_phi - aspect)
        if best is None or score < best[0]:
            best = (score, n_theta, n_phi)
    assert best is not None
    return best[1], best[2]


def make_receiver_array(
    radius: float,
    polar_range: tuple[float, float],
    azimuth_range: tuple[float, float],
    n_receivers: int,
) -> ReceiverArray:
    """Lay receivers on a spherical patch as a product grid in (polar, azimuth).

    Receivers sit at cell centers; each weight is the exact area of its cell,
    radius**2 * (cos th_lo - cos th_hi) * dphi, so weights always sum to the
    analytic patch area.  When n_receivers does not factor evenly the last
    polar row holds the remaining cells, widened to span the full azimuth
    range, keeping the tiling exact.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    th_min, th_max = polar_range
    ph_min, ph_max = azimuth_range
    if not (0 <= th_min < th_max <= math.pi):
        raise ValueError(f"polar range must satisfy 0 <= min < max <= pi, got {polar_range}")
    if not (ph_min < ph_max and ph_max - ph_min <= 2 * math.pi):
        raise ValueError(f"invalid azimuth range {azimuth_range}")
    if n_receivers < 1:
        raise ValueError(f"n_receivers must be >= 1, got {n_receivers}")

    n_theta, n_phi = _patch_grid_shape(n_receivers, th_max - th_min, ph_max - ph_min)
    d_theta = (th_max - th_min) / n_theta

    positions = np.empty((n_receivers, 3), dtype=np.float64)
    weights = np.empty(n_receivers, dtype=np.float64)
    k = 0
    for i in range(n_theta):
        th_lo = th_min + i * d_theta
        th_hi = th_lo + d_theta
        row_cells = n_phi if i < n_theta - 1 else n_receivers - (n_theta - 1) * n_phi
        d_phi = (ph_max - ph_min) / row_cells
        th_c = 0.5 * (th_lo + th_hi)
        band = radius**2 * (math.cos(th_lo) - math.cos(th_hi)) * d_phi
        for c in range(row_cells):
            ph_c = ph_min + (c + 0.5) * d_phi
            positions[k] = (
                radius * math.sin(th_c) * math.cos(ph_c),
                radius * math.sin(th_c) * math.sin(ph_c),
                radius * math.cos(th_c),
            )
            weights[k] = band
            k += 1
    assert k == n_receivers

    return ReceiverArray(
        positions=positions,
        weights=weights,
        radius=radius,
        polar_range=(th_min, th_max),
        azimuth_range=(ph_min, ph_max),
    )


@dataclass(frozen=True)
class SamplingMesh:
    """Regular search lattice over a bounding cube.

    ``resolution`` counts cells per axis (int or 3 ints); the lattice holds
    the cell corners, resolution+1 points per axis, covering the cube
    inclusively.  Lattice points are ordered lexicographically by
    (x1, x2, x3), which fixes argmax tie-breaking.
    """

    cube: Cuboid
    resolution: tuple[int, int, int]

    def __init__(self, cube: Cuboid, resolution: int | Sequence[int]):
        if isinstance(resolution, (int, np.integer)):
            res = (int(resolution),) * 3
        else:
            res = tuple(int(r) for r in resolution)
        if len(res) != 3 or any(r < 2 for r in res):
            raise ValueError(f"resolution must be >= 2 per axis, got {resolution}")
        object.__setattr__(self, "cube", cube)
        object.__setattr__(self, "resolution", res)

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        low, high = self.cube.low, self.cube.high
        return tuple(
            np.linspace(low[i], high[i], self.resolution[i] + 1) for i in range(3)
        )

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(r + 1 for r in self.resolution)

    @property
    def n_points(self) -> int:
        return int(np.prod([r + 1 for r in self.resolution]))

    @property
    def spacing(self) -> np.ndarray:
        return self.cube.size / np.asarray(self.resolution, dtype=np.float64)

    @property
    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.spacing))

    def points(self) -> np.ndarray:
        """All lattice points, shape (n_points, 3), lexicographic order."""
        ax = self.axes
        g = np.meshgrid(*ax, indexing="ij")
        return np.stack([a.ravel() for a in g], axis=1)

    def point_at(self, flat_index: int) -> np.ndarray:
        n1, n2, n3 = self.shape
        i, rem = divmod(int(flat_index), n2 * n3)
        j, k = divmod(rem, n3)
        ax = self.axes
        return np.array([ax[0][i], ax[1][j], ax[2][k]])

    def ball_indices(self, center: np.ndarray, radius: float) -> np.ndarray:
        """Flat indices of lattice points within Euclidean radius of center, sorted."""
        center = as_point(center)
        if radius < 0:
            raise ValueError("radius must be non-negative")
        ax = self.axes
        lo_idx = []
        hi_idx = []
        for i in range(3):
            h = self.spacing[i]
            low = self.cube.low[i]
            lo = int(np.ceil((center[i] - radius - low) / h - 1e-12))
            hi = int(np.floor((center[i] + radius - low) / h + 1e-12))
            lo = max(lo, 0)
            hi = min(hi, self.resolution[i])
            if lo > hi:
                return np.empty(0, dtype=np.int64)
            lo_idx.append(lo)
            hi_idx.append(hi)
        i1 = np.arange(lo_idx[0], hi_idx[0] + 1)
        i2 = np.arange(lo_idx[1], hi_idx[1] + 1)
        i3 = np.arange(lo_idx[2], hi_idx[2] + 1)
        g1, g2, g3 = np.meshgrid(i1, i2, i3, indexing="ij")
        pts = np.stack(
            [ax[0][g1.ravel()], ax[1][g2.ravel()], ax[2][g3.ravel()]], axis=1
        )
        d2 = np.sum((pts - center) ** 2, axis=1)
        keep = d2 <= radius**2 + 1e-12
        n2, n3 = self.shape[1], self.shape[2]
        flat = (g1.ravel() * n2 + g2.ravel()) * n3 + g3.ravel()
        return np.sort(flat[keep])

    def contains(self, point: np.ndarray) -> bool:
        return bool(self.cube.contains(np.atleast_2d(point))[0])


@dataclass(frozen=True)
class MediumSpec:
    """Background sound speed plus an optional embedded constant-speed cuboid."""

    c0: float
    inclusion: Cuboid | None = None
    c: float | None = None

    def __post_init__(self):
        if not (self.c0 > 0 and math.isfinite(self.c0)):
            raise ValueError(f"background speed must be positive, got {self.c0}")
        if (self.inclusion is None) != (self.c is None):
            raise ValueError("inclusion geometry and inclusion speed must be given together")
        if self.c is not None and not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"inclusion speed must be positive, got {self.c}")

    @property
    def homogeneous(self) -> bool:
        return self.inclusion is None or self.c == self.c0

    def speed_at(self, points: np.ndarray) -> np.ndarray:
        """Sound speed sampled at points, shape (n,)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        out = np.full(pts.shape[0], self.c0)
        if self.inclusion is not None:
            out[self.inclusion.contains(pts)] = self.c
        return out
