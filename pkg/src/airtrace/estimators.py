"""Estimator front ends around the reconstruction and smoothing routines.

These follow the scikit-learn parameter conventions (constructor stores
hyperparameters untouched, fitted state gets a trailing underscore,
get_params/set_params work for cloning and grid search).  The sample matrix
is a receiver record rather than a feature table, so only the pieces of the
interface that make sense here are provided: fit/predict for the
reconstructor and fit/transform for the smoother.

Fitting a reconstructor caches the lattice-to-receiver geometry, which is
the expensive part; predicting on further records with the same receivers
(fresh noise draws, other trajectories) reuses it.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .forward import WaveRecord
from .geometry import Cuboid, SamplingMesh
from .imaging import (
    IndicatorParams,
    LatticeEvaluator,
    reconstruct_global,
    reconstruct_parallel,
    reconstruct_sequential,
)
from .smoothing import smooth, trajectory_error

__all__ = ["TrajectoryReconstructor", "FourierTrajectorySmoother"]

_METHODS = ("global", "sequential", "parallel")


class TrajectoryReconstructor(BaseEstimator):
    """Per-step correlation imaging over a cubic search lattice.

    Parameters
    ----------
    method : {"sequential", "global", "parallel"}
        Search strategy across time steps.
    v_max : float or None
        Speed bound used to size the reachable balls.  Required for the
        sequential and parallel methods.
    domain_center, domain_size : array-like of 3 floats
        Search cube.
    resolution : int
        Lattice cells per axis; the lattice has resolution + 1 points per
        axis including both faces.
    omega0 : float or None
        Probe frequency override; None takes the record's own.
    exclusion_radius : float
        Guard distance around receivers inside which the indicator is not
        evaluated.
    """

    def __init__(
        self,
        method: str = "sequential",
        v_max: float | None = None,
        domain_center=(0.0, 0.0, 0.0),
        domain_size=(16.0, 16.0, 16.0),
        resolution: int = 50,
        omega0: float | None = None,
        exclusion_radius: float = 1e-6,
    ):
        self.method = method
        self.v_max = v_max
        self.domain_center = domain_center
        self.domain_size = domain_size
        self.resolution = resolution
        self.omega0 = omega0
        self.exclusion_radius = exclusion_radius

    def _reconstruct(self, record: WaveRecord):
        params = IndicatorParams(omega0=self.omega0, exclusion_radius=self.exclusion_radius)
        if self.method == "global":
            return reconstruct_global(record, self.mesh_, params, self.evaluator_)
        if self.v_max is None:
            raise ValueError(f"method {self.method!r} needs v_max")
        if self.method == "sequential":
            return reconstruct_sequential(record, self.mesh_, self.v_max, params, self.evaluator_)
        return reconstruct_parallel(record, self.mesh_, self.v_max, params, self.evaluator_)

    def fit(self, X: WaveRecord, y=None):
        """Build the lattice cache and reconstruct the record X."""
        if not isinstance(X, WaveRecord):
            raise TypeError("X must be a WaveRecord")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        cube = Cuboid(center=self.domain_center, size=self.domain_size)
        self.mesh_ = SamplingMesh(cube, self.resolution)
        self.evaluator_ = LatticeEvaluator(self.mesh_, X.receivers, self.exclusion_radius)
        self.result_ = self._reconstruct(X)
        self.points_ = self.result_.points
        self.steps_ = self.result_.steps
        self.times_ = self.result_.times
        return self

    def predict(self, X: WaveRecord | None = None) -> np.ndarray:
        """Estimated positions, reusing the fitted lattice cache.

        With X=None returns the positions found during fit.  A new record
        must share the fitted receiver layout.
        """
        if not hasattr(self, "result_"):
            raise RuntimeError("reconstructor is not fitted")
        if X is None:
            return self.points_
        if X.receivers is not self.evaluator_.receivers and not (
            X.receivers.positions.shape == self.evaluator_.receivers.positions.shape
            and np.array_equal(X.receivers.positions, self.evaluator_.receivers.positions)
        ):
            raise ValueError("record receivers differ from the fitted layout")
        return self._reconstruct(X).points

    def score(self, X: WaveRecord, y) -> float:
        """Negative mean distance to reference positions at the record's
        reconstructed steps; y is a trajectory-like with .position(t)."""
        result = self._reconstruct(X) if X is not None else self.result_
        errors = trajectory_error(y, result.times, result.points)
        return -float(errors.mean())


class FourierTrajectorySmoother(TransformerMixin, BaseEstimator):
    """Gap segmentation plus truncated Fourier fitting as a transformer.

    Accepts either a reconstruction result or a plain (n, 4) array of
    [time, x1, x2, x3] rows with uniform time stepping.
    """

    def __init__(self, order: int = 3, gap_factor: float = 3.0):
        self.order = order
        self.gap_factor = gap_factor

    @staticmethod
    def _coerce(X):
        if hasattr(X, "steps") and hasattr(X, "points"):
            return X
        arr = np.asarray(X, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ValueError("X must be a reconstruction result or an (n, 4) [t, x, y, z] array")
        times = arr[:, 0]
        if times.size > 1:
            dt = np.diff(times).min()
            if dt <= 0:
                raise ValueError("times must be strictly increasing")
            steps = np.rint(times / dt).astype(np.int64)
        else:
            steps = np.array([1], dtype=np.int64)

        class _Path:
            pass

        p = _Path()
        p.steps, p.times, p.points = steps, times, arr[:, 1:4]
        return p

    def fit(self, X, y=None):
        self.smoothed_ = smooth(self._coerce(X), order=self.order, gap_factor=self.gap_factor)
        self.segments_ = self.smoothed_.segments
        self.curves_ = self.smoothed_.curves
        return self

    def transform(self, X) -> np.ndarray:
        """Smoothed positions for X's sample times, segmenting X afresh."""
        smoothed = smooth(self._coerce(X), order=self.order, gap_factor=self.gap_factor)
        return smoothed.points

    def fit_transform(self, X, y=None, **fit_params):
        self.fit(X)
        return self.smoothed_.points
