"""Homogeneous forward model.

Retarded times are cross-checked against an independent bisection solver
and, for constant-velocity motion, against the closed-form quadratic root.
"""
import math

import numpy as np
import pytest

from airtrace.forward import (
    ConvergenceError,
    PotentialMode,
    RetardedSolveParams,
    SourceSignal,
    WaveRecord,
    add_noise,
    approx_field,
    noise_column,
    retarded_potential,
    retarded_time,
    synthesize_approx_record,
    synthesize_record,
)
from airtrace.geometry import MediumSpec, TimeGrid, make_receiver_array
from airtrace.trajectories import SCENARIO_IDS, Trajectory, builtin_trajectory


def bisect_retarded(x, traj, t, c0, iters=100):
    """Independent solver: f(tau) = tau + |x - z(tau)|/c0 - t is strictly
    increasing because the emitter is subsonic, so bisection always works."""
    lo = t - (np.linalg.norm(x) + 30.0) / c0 - 1.0
    hi = t
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        z = traj.position(mid, clamp=True)
        if mid + np.linalg.norm(x - z) / c0 - t > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def line_trajectory(base, velocity, t_knee=1.0, t_end=101.0):
    """At rest until t_knee, then constant velocity."""
    base = np.asarray(base, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    times = np.array([t_knee, t_end])
    pts = np.vstack([base, base + velocity * (t_end - t_knee)])
    return Trajectory.from_samples(times, pts, name="line")


class TestRetardedTime:
    @pytest.mark.parametrize("name", SCENARIO_IDS)
    def test_matches_bisection(self, name):
        traj = builtin_trajectory(name)
        rng = np.random.default_rng(13)
        for _ in range(25):
            x = rng.uniform(-15, 15, size=3)
            t = float(rng.uniform(0.05, traj.duration + 2.0))
            c0 = float(rng.uniform(max(2.0 * traj.v_max, 5.0), 400.0))
            tau = retarded_time(x, traj, t, c0)
            assert tau == pytest.approx(bisect_retarded(x, traj, t, c0), abs=1e-9)

    @pytest.mark.parametrize("name", SCENARIO_IDS)
    def test_fixed_point_residual_under_tolerance(self, name):
        traj = builtin_trajectory(name)
        receivers = make_receiver_array(
            radius=10.0,
            polar_range=(np.pi / 4, 3 * np.pi / 4),
            azimuth_range=(-np.pi / 4, np.pi / 4),
            n_receivers=32,
        )
        c0 = 330.0
        for t in np.linspace(0.3, traj.duration, 7):
            tau = retarded_time(receivers.positions, traj, float(t), c0)
            z = traj.position(tau, clamp=True)
            res = np.abs(tau - (t - np.linalg.norm(receivers.positions - z, axis=1) / c0))
            assert res.max() < 1e-10

    def test_iterates_contract(self):
        traj = builtin_trajectory("hello")  # fastest catalog path
        history = []
        retarded_time(np.array([10.0, 2.0, -3.0]), traj, 5.0, 330.0, history=history)
        steps = [np.max(np.abs(b - a)) for a, b in zip(history, history[1:])]
        # strict contraction: every update at most v_max/c0 times the previous
        ratio = traj.v_max / 330.0
        for s0, s1 in zip(steps, steps[1:]):
            if s0 == 0.0:
                break
            assert s1 <= ratio * s0 + 1e-15

    def test_constant_velocity_closed_form(self):
        w = np.array([40.0, -20.0, 10.0])
        base = np.array([-1.0, 2.0, 0.5])
        traj = line_trajectory(base, w)
        c0, t = 330.0, 50.0
        rng = np.random.default_rng(4)
        for _ in range(20):
            x = rng.uniform(-100, 100, size=3)
            # z(tau) = base + w (tau - 1); solve |x - z| = c0 (t - tau)
            y = x - base + w
            coeffs = [w @ w - c0**2, 2 * (t * c0**2 - y @ w), y @ y - (c0 * t) ** 2]
            roots = [r.real for r in np.roots(coeffs) if abs(r.imag) < 1e-9 and 1.0 < r.real < t]
            assert len(roots) == 1
            assert retarded_time(x, traj, t, c0) == pytest.approx(roots[0], abs=1e-9)

    def test_requires_subsonic_emitter(self):
        traj = line_trajectory([0, 0, 0], [10.0, 0.0, 0.0])
        with pytest.raises(ValueError):
            retarded_time(np.array([5.0, 0.0, 0.0]), traj, 1.0, 9.0)

    def test_convergence_error_when_starved(self):
        traj = builtin_trajectory("hello")
        params = RetardedSolveParams(tolerance=1e-10, max_iterations=1)
        with pytest.raises(ConvergenceError):
            retarded_time(np.array([10.0, 0.0, 0.0]), traj, 4.0, 81.0, params=params)


class TestSourceSignal:
    def test_causal_window(self):
        sig = SourceSignal(omega0=2.0, terminal_time=5.0)
        assert sig.value(0.0) == 0.0
        assert sig.value(-1.0) == 0.0
        assert sig.value(5.0 + 1e-9) == 0.0
        assert sig.value(1.0) == pytest.approx(math.sin(2.0))
        assert sig.value(5.0) == pytest.approx(math.sin(10.0))

    def test_acausal_variant_keeps_negative_times(self):
        sig = SourceSignal(omega0=1.0, terminal_time=5.0, causal=False)
        assert sig.value(-1.0) == pytest.approx(math.sin(-1.0))
        assert sig.value(6.0) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            SourceSignal(omega0=0.0, terminal_time=1.0)
        with pytest.raises(ValueError):
            SourceSignal(omega0=1.0, terminal_time=0.0)


class TestPotential:
    def test_constant_velocity_field_value(self):
        # independent evaluation: closed-form tau, then the advertised formula
        w = np.array([30.0, 10.0, 0.0])
        base = np.array([0.0, -2.0, 1.0])
        traj = line_trajectory(base, w)
        c0, t, omega0 = 330.0, 50.0, 1.3
        signal = SourceSignal(omega0=omega0, terminal_time=traj.duration)
        rng = np.random.default_rng(8)
        for _ in range(10):
            x = rng.uniform(-80, 80, size=3)
            y = x - base + w
            coeffs = [w @ w - c0**2, 2 * (t * c0**2 - y @ w), y @ y - (c0 * t) ** 2]
            tau = next(r.real for r in np.roots(coeffs) if abs(r.imag) < 1e-9 and 1.0 < r.real < t)
            diff = y - w * tau
            dist = c0 * (t - tau)  # retarded identity
            assert np.linalg.norm(diff) == pytest.approx(dist, rel=1e-12)
            want = math.sin(omega0 * tau) / (4 * math.pi * dist * (1 - (diff @ w) / (dist * c0)))
            got = retarded_potential(x, t, traj, c0, signal)
            assert got == pytest.approx(want, rel=1e-9)

    def test_approaching_louder_than_receding(self):
        # Doppler-style asymmetry of the motion factor
        w = np.array([50.0, 0.0, 0.0])
        traj = line_trajectory([0.0, 0.0, 0.0], w)
        signal = SourceSignal(omega0=1.0, terminal_time=traj.duration)
        t = 30.0
        ahead = retarded_potential(np.array([5000.0, 0.0, 0.0]), t, traj, 330.0, signal)
        behind = retarded_potential(np.array([-5000.0, 0.0, 0.0]), t, traj, 330.0, signal)
        # strip the tone to compare envelopes
        tau_a = retarded_time(np.array([5000.0, 0.0, 0.0]), traj, t, 330.0)
        tau_b = retarded_time(np.array([-5000.0, 0.0, 0.0]), traj, t, 330.0)
        env_a = abs(ahead / math.sin(tau_a))
        env_b = abs(behind / math.sin(tau_b))
        beta = 50.0 / 330.0
        # at matched large distances the envelope ratio approaches the
        # textbook (1+beta)/(1-beta); distances differ slightly, so be loose
        da = np.linalg.norm(np.array([5000.0, 0.0, 0.0]) - traj.position(tau_a))
        db = np.linalg.norm(np.array([-5000.0, 0.0, 0.0]) - traj.position(tau_b))
        assert (env_a * da) / (env_b * db) == pytest.approx((1 + beta) / (1 - beta), rel=1e-6)

    def test_raw_direction_differs_and_can_blow_up(self):
        w = np.array([3.0, 0.0, 0.0])
        traj = line_trajectory([0.0, 0.0, 0.0], w)
        signal = SourceSignal(omega0=1.0, terminal_time=traj.duration)
        x = np.array([70.0, 5.0, 0.0])
        a = retarded_potential(x, 20.0, traj, 330.0, signal, mode=PotentialMode.UNIT_DIRECTION)
        b = retarded_potential(x, 20.0, traj, 330.0, signal, mode="raw-direction")
        assert a != 0 and a != b
        # unnormalized inner product grows with distance until the motion
        # factor goes non-positive (here around |diff| v > c0, i.e. 110 m)
        with pytest.raises(ValueError):
            retarded_potential(np.array([3000.0, 0.0, 0.0]), 20.0, traj, 330.0, signal, mode="raw-direction")

    def test_zero_before_arrival_and_at_emitter(self):
        traj = builtin_trajectory("letter-C")
        signal = SourceSignal(omega0=1.0, terminal_time=traj.duration)
        x = np.array([10.0, 0.0, 0.0])
        d0 = np.linalg.norm(x - traj.position(1e-12, clamp=True))
        c0 = 5.0
        assert retarded_potential(x, 0.9 * d0 / c0, traj, c0, signal) == 0.0
        # reception exactly at the emitter's retarded position is undefined
        with pytest.raises(ValueError):
            retarded_potential(traj.position(1.0), 1.0, traj, 330.0, signal)


class TestSynthesis:
    def setup_method(self):
        self.receivers = make_receiver_array(
            radius=10.0,
            polar_range=(np.pi / 4, 3 * np.pi / 4),
            azimuth_range=(-np.pi / 4, np.pi / 4),
            n_receivers=24,
        )

    def test_causality_across_record(self):
        # slow medium so several early steps precede the first arrival
        traj = builtin_trajectory("letter-C")
        grid = TimeGrid(duration=10.0, n_steps=100)
        record = synthesize_record(traj, self.receivers, grid, MediumSpec(c0=5.0))
        start = traj.position(1e-12, clamp=True)
        d0 = np.linalg.norm(self.receivers.positions - start, axis=1)
        for i in range(len(self.receivers)):
            for j, t in enumerate(grid.times):
                if t < d0[i] / 5.0 - 1e-9:
                    assert record.values[i, j] == 0.0
        assert np.any(record.values == 0.0)
        assert np.any(record.values[:, -1] != 0.0)

    def test_matches_pointwise_potential(self):
        traj = builtin_trajectory("digit-8")
        grid = TimeGrid(duration=8.0, n_steps=16)
        record = synthesize_record(traj, self.receivers, grid, MediumSpec(c0=330.0))
        signal = SourceSignal(omega0=1.0, terminal_time=8.0)
        j = 11
        want = retarded_potential(self.receivers.positions, grid.time_at(j), traj, 330.0, signal)
        assert np.array_equal(record.column(j), want)
        assert record.forward == "retarded"
        assert record.trajectory_id == "digit-8"

    def test_rejects_inhomogeneous_medium(self):
        from airtrace.geometry import Cuboid

        medium = MediumSpec(c0=330.0, inclusion=Cuboid(center=(-2, 0, 0), size=(2, 10, 10)), c=1500.0)
        traj = builtin_trajectory("letter-C")
        grid = TimeGrid(duration=10.0, n_steps=10)
        with pytest.raises(ValueError):
            synthesize_record(traj, self.receivers, grid, medium)

    def test_approx_record_formula(self):
        traj = builtin_trajectory("letter-C")
        grid = TimeGrid(duration=10.0, n_steps=20)
        record = synthesize_approx_record(traj, self.receivers, grid, MediumSpec(c0=330.0), omega0=1.0)
        assert record.forward == "approx"
        for j, t in enumerate(grid.times):
            d = np.linalg.norm(self.receivers.positions - traj.position(t), axis=1)
            assert np.allclose(record.values[:, j], math.sin(t) / (4 * math.pi * d))

    def test_approx_close_to_exact_for_slow_motion(self):
        # v/c0 ~ 4e-3 here, so the two fields agree to well under a percent
        traj = builtin_trajectory("letter-C")
        grid = TimeGrid(duration=10.0, n_steps=50)
        medium = MediumSpec(c0=330.0)
        exact = synthesize_record(traj, self.receivers, grid, medium)
        approx = synthesize_approx_record(traj, self.receivers, grid, medium)
        scale = np.abs(exact.values).max()
        assert np.abs(exact.values - approx.values).max() < 0.05 * scale


class TestWaveRecord:
    def make(self, n_m=4, n_t=6):
        receivers = make_receiver_array(
            radius=5.0, polar_range=(1.0, 2.0), azimuth_range=(-0.5, 0.5), n_receivers=n_m
        )
        grid = TimeGrid(duration=0.6, n_steps=n_t)
        values = np.arange(n_m * n_t, dtype=float).reshape(n_m, n_t)
        return WaveRecord(values=values, receivers=receivers, grid=grid, omega0=1.0, c0=330.0)

    def test_column_is_one_based(self):
        record = self.make()
        assert np.array_equal(record.column(1), record.values[:, 0])
        assert np.array_equal(record.column(6), record.values[:, 5])
        for bad in (0, 7):
            with pytest.raises(ValueError):
                record.column(bad)

    def test_shape_and_finiteness_validation(self):
        record = self.make()
        with pytest.raises(ValueError):
            WaveRecord(values=record.values[:, :-1], receivers=record.receivers,
                       grid=record.grid, omega0=1.0, c0=330.0)
        bad = record.values.copy()
        bad[0, 0] = np.inf
        with pytest.raises(ValueError):
            WaveRecord(values=bad, receivers=record.receivers, grid=record.grid, omega0=1.0, c0=330.0)


class TestNoise:
    def test_uniform_bounds_and_determinism(self):
        r1 = noise_column(42, 200, 7)
        r2 = noise_column(42, 200, 7)
        assert np.array_equal(r1, r2)
        assert r1.shape == (200,)
        assert np.all(np.abs(r1) < 1.0)
        assert not np.array_equal(noise_column(42, 200, 8), r1)
        assert not np.array_equal(noise_column(43, 200, 7), r1)

    def test_step_one_prefix_shared_across_widths(self):
        # every stream starts at block 0, so the first column's draws agree
        assert np.array_equal(noise_column(3, 4, 1), noise_column(3, 8, 1)[:4])

    def test_columns_block_disjoint(self):
        # the full two-column stream equals one uninterrupted generator pass
        # over ceil(n/4)*4 doubles per column
        n = 10
        per_block = 4
        blocks = -(-n // per_block)
        bg = np.random.Philox(key=9)
        gen = np.random.Generator(bg)
        flat = gen.uniform(-1.0, 1.0, 2 * blocks * per_block)
        assert np.allclose(noise_column(9, n, 1), flat[:n])
        assert np.allclose(noise_column(9, n, 2), flat[blocks * per_block: blocks * per_block + n])

    def test_add_noise_identity(self):
        receivers = make_receiver_array(
            radius=5.0, polar_range=(1.0, 2.0), azimuth_range=(-0.5, 0.5), n_receivers=9
        )
        grid = TimeGrid(duration=1.0, n_steps=5)
        values = np.random.default_rng(0).normal(size=(9, 5))
        record = WaveRecord(values=values, receivers=receivers, grid=grid, omega0=1.0, c0=330.0)
        noisy = add_noise(record, 0.3, seed=17)
        assert noisy.noise == 0.3 and noisy.seed == 17
        assert np.array_equal(record.values, values)  # original untouched
        for j in range(5):
            r = (noisy.values[:, j] / values[:, j]) - 1.0
            assert np.allclose(r / 0.3, noise_column(17, 9, j + 1))
        # byte-identical determinism
        again = add_noise(record, 0.3, seed=17)
        assert np.array_equal(noisy.values, again.values)

    def test_add_noise_rejects_negative(self):
        record = TestWaveRecord().make()
        with pytest.raises(ValueError):
            add_noise(record, -0.1, seed=1)
