"""Estimator wrappers: sklearn parameter conventions and delegation."""
import math
from types import SimpleNamespace

import numpy as np
import pytest
from sklearn.base import clone

from airtrace.estimators import FourierTrajectorySmoother, TrajectoryReconstructor
from airtrace.forward import WaveRecord, synthesize_approx_record
from airtrace.geometry import Cuboid, MediumSpec, SamplingMesh, TimeGrid, make_receiver_array
from airtrace.imaging import LatticeEvaluator, reconstruct_global
from airtrace.smoothing import smooth, trajectory_error
from airtrace.trajectories import builtin_trajectory


@pytest.fixture(scope="module")
def acquisition():
    traj = builtin_trajectory("letter-C")
    receivers = make_receiver_array(
        10.0, (math.pi / 4, 3 * math.pi / 4), (-math.pi / 4, math.pi / 4), 200
    )
    grid = TimeGrid(10.0, 10)
    record = synthesize_approx_record(traj, receivers, grid, MediumSpec(c0=330.0))
    return traj, receivers, grid, record


class TestTrajectoryReconstructor:
    def test_get_set_params_and_clone(self):
        est = TrajectoryReconstructor(method="parallel", v_max=3.0, resolution=16)
        params = est.get_params()
        assert params["method"] == "parallel"
        assert params["v_max"] == 3.0
        assert params["resolution"] == 16
        assert params["domain_size"] == (16.0, 16.0, 16.0)
        est.set_params(resolution=20)
        assert est.resolution == 20
        twin = clone(est)
        assert twin.get_params() == est.get_params()

    def test_fit_matches_direct_reconstruction(self, acquisition):
        traj, receivers, grid, record = acquisition
        est = TrajectoryReconstructor(method="global", resolution=16)
        assert est.fit(record) is est
        mesh = SamplingMesh(Cuboid(center=(0, 0, 0), size=(16, 16, 16)), 16)
        direct = reconstruct_global(record, mesh, evaluator=LatticeEvaluator(mesh, receivers))
        np.testing.assert_array_equal(est.points_, direct.points)
        np.testing.assert_array_equal(est.steps_, direct.steps)
        np.testing.assert_array_equal(est.times_, direct.times)
        assert est.result_.method == "global"

    def test_sequential_needs_vmax(self, acquisition):
        _, _, _, record = acquisition
        with pytest.raises(ValueError, match="v_max"):
            TrajectoryReconstructor(method="sequential", resolution=8).fit(record)

    def test_rejects_bad_inputs(self, acquisition):
        _, _, _, record = acquisition
        with pytest.raises(TypeError):
            TrajectoryReconstructor().fit(np.zeros((4, 4)))
        with pytest.raises(ValueError, match="method"):
            TrajectoryReconstructor(method="annealing").fit(record)

    def test_predict(self, acquisition):
        traj, receivers, grid, record = acquisition
        est = TrajectoryReconstructor(method="sequential", v_max=traj.v_max, resolution=16)
        est.fit(record)
        np.testing.assert_array_equal(est.predict(), est.points_)
        np.testing.assert_array_equal(est.predict(record), est.points_)

    def test_predict_requires_fit(self):
        with pytest.raises(RuntimeError):
            TrajectoryReconstructor().predict()

    def test_predict_rejects_other_receivers(self, acquisition):
        traj, receivers, grid, record = acquisition
        est = TrajectoryReconstructor(method="global", resolution=8).fit(record)
        other_rx = make_receiver_array(10.0, (0.9, 2.2), (-0.7, 0.7), 50)
        other = synthesize_approx_record(traj, other_rx, grid, MediumSpec(c0=330.0))
        with pytest.raises(ValueError, match="receivers"):
            est.predict(other)

    def test_score_is_negative_mean_error(self, acquisition):
        traj, _, _, record = acquisition
        est = TrajectoryReconstructor(method="global", resolution=16).fit(record)
        got = est.score(record, traj)
        want = -trajectory_error(traj, est.times_, est.points_).mean()
        assert got == pytest.approx(want, rel=1e-12)
        assert got <= 0.0


class TestFourierTrajectorySmoother:
    def path_array(self, n=24, dt=0.1, seed=5):
        rng = np.random.default_rng(seed)
        times = np.arange(1, n + 1) * dt
        points = np.cumsum(rng.normal(scale=0.2, size=(n, 3)), axis=0)
        return np.column_stack([times, points]), times, points

    def test_params_and_clone(self):
        est = FourierTrajectorySmoother(order=5, gap_factor=2.0)
        assert est.get_params() == {"order": 5, "gap_factor": 2.0}
        assert clone(est).get_params() == est.get_params()

    def test_transform_matches_smooth(self):
        X, times, points = self.path_array()
        est = FourierTrajectorySmoother(order=3)
        out = est.fit(X).transform(X)
        result = SimpleNamespace(steps=np.arange(1, 25), times=times, points=points)
        # the coerced array path hands BLAS a strided view, so agreement is
        # to rounding, not bitwise
        np.testing.assert_allclose(out, smooth(result, order=3).points, rtol=0, atol=1e-13)
        assert est.segments_ == ((0, 24),)
        assert len(est.curves_) == 1

    def test_fit_transform_shortcut(self):
        X, _, _ = self.path_array()
        est = FourierTrajectorySmoother(order=2)
        np.testing.assert_array_equal(est.fit_transform(X), est.smoothed_.points)

    def test_accepts_reconstruction_objects(self):
        _, times, points = self.path_array()
        result = SimpleNamespace(steps=np.arange(1, 25), times=times, points=points)
        out = FourierTrajectorySmoother(order=3).fit(result).transform(result)
        np.testing.assert_array_equal(out, smooth(result, order=3).points)

    def test_rejects_bad_arrays(self):
        est = FourierTrajectorySmoother()
        with pytest.raises(ValueError):
            est.fit(np.zeros((4, 3)))
        with pytest.raises(ValueError):
            est.fit(np.zeros(7))
        bad_times = np.column_stack([np.array([0.2, 0.2, 0.3]), np.zeros((3, 3))])
        with pytest.raises(ValueError, match="increasing"):
            est.fit(bad_times)

    def test_single_row(self):
        X = np.array([[0.4, 1.0, 2.0, 3.0]])
        out = FourierTrajectorySmoother(order=3).fit_transform(X)
        np.testing.assert_allclose(out, [[1.0, 2.0, 3.0]], rtol=1e-15)
