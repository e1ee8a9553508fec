"""Indicator function, lattice sweeps, tuning schedules, reconstruction.

Indicator values are cross-checked against a scalar math.fsum oracle, the
dichotomy schedule against hand-evaluated floor-formula tables, and the
reconstructions against the known source trajectories.  Scale invariance is
bitwise for power-of-two factors (exponent shifts commute exactly through
products, sums, sqrt, and the final division) and tolerance-checked for
arbitrary factors.
"""
import math

import numpy as np
import pytest

from airtrace.forward import WaveRecord, synthesize_approx_record, synthesize_record
from airtrace.geometry import (
    Cuboid,
    MediumSpec,
    ReceiverArray,
    SamplingMesh,
    TimeGrid,
    make_receiver_array,
)
from airtrace.imaging import (
    EmptyBallError,
    IndicatorParams,
    LatticeEvaluator,
    ReconResult,
    TuningSchedule,
    UndefinedIndicatorError,
    grid_argmax,
    indicator,
    parallel_schedule,
    probe_field,
    reconstruct_global,
    reconstruct_parallel,
    reconstruct_sequential,
    valid_steps,
)
from airtrace.trajectories import builtin_trajectory


def small_receivers(n=20, seed=0):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-1, 1, size=(n, 3))
    pos = 10.0 * pos / np.linalg.norm(pos, axis=1, keepdims=True)
    return ReceiverArray(positions=pos, weights=rng.uniform(0.1, 2.0, size=n))


def record_from_values(values, receivers, duration=1.0, omega0=1.0):
    values = np.asarray(values, dtype=np.float64)
    grid = TimeGrid(duration, values.shape[1])
    return WaveRecord(values=values, receivers=receivers, grid=grid, omega0=omega0, c0=330.0)


def indicator_oracle(record, step, z):
    """Scalar re-derivation with fsum accumulation and explicit loops."""
    u = record.column(step)
    t = record.grid.time_at(step)
    w = record.receivers.weights
    pos = record.receivers.positions
    phi = [
        math.sin(record.omega0 * t) / (4 * math.pi * math.dist(pos[m], z))
        for m in range(len(u))
    ]
    num = abs(math.fsum(u[m] * phi[m] * w[m] for m in range(len(u))))
    den = math.sqrt(math.fsum(u[m] ** 2 * w[m] for m in range(len(u)))) * math.sqrt(
        math.fsum(phi[m] ** 2 * w[m] for m in range(len(u)))
    )
    return min(num / den, 1.0)


class TestProbeField:
    def test_scalar_formula(self):
        x = np.array([1.0, 2.0, 3.0])
        z = np.array([0.5, -0.5, 0.0])
        got = probe_field(x, 0.7, z, omega0=1.3)
        want = math.sin(1.3 * 0.7) / (4 * math.pi * math.dist(x, z))
        assert got == pytest.approx(want, rel=1e-15)
        assert isinstance(got, float)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(3)
        xs = rng.normal(size=(7, 3)) * 5
        z = np.array([0.2, 0.4, -1.0])
        batch = probe_field(xs, 2.1, z, omega0=0.9)
        assert batch.shape == (7,)
        for i in range(7):
            assert batch[i] == pytest.approx(probe_field(xs[i], 2.1, z, 0.9), rel=1e-15)

    def test_rejects_source_point(self):
        with pytest.raises(ValueError):
            probe_field(np.array([1.0, 2.0, 3.0]), 1.0, (1.0, 2.0, 3.0), 1.0)


class TestIndicator:
    def test_matches_fsum_oracle(self):
        rng = np.random.default_rng(11)
        receivers = small_receivers()
        for _ in range(50):
            values = rng.normal(size=(20, 3))
            record = record_from_values(values, receivers, omega0=rng.uniform(0.5, 3.0))
            z = rng.uniform(-4, 4, size=3)
            step = int(rng.integers(1, 4))
            got = indicator(record, step, z)
            assert got == pytest.approx(indicator_oracle(record, step, z), rel=1e-12)

    def test_perfect_match_is_one(self):
        receivers = small_receivers()
        z = np.array([0.7, -1.1, 0.3])
        t = 0.5
        column = probe_field(receivers.positions, t, z, omega0=1.0)
        record = record_from_values(0.37 * column[:, None], receivers, duration=t)
        val = indicator(record, 1, z)
        assert val <= 1.0
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_bounds_fuzz(self):
        rng = np.random.default_rng(29)
        receivers = small_receivers()
        for _ in range(500):
            scale = 10.0 ** rng.uniform(-6, 6)
            record = record_from_values(scale * rng.normal(size=(20, 2)), receivers)
            val = indicator(record, int(rng.integers(1, 3)), rng.uniform(-5, 5, size=3))
            assert 0.0 <= val <= 1.0

    def test_power_of_two_scaling_is_bitwise(self):
        rng = np.random.default_rng(5)
        receivers = small_receivers()
        values = rng.normal(size=(20, 2))
        record = record_from_values(values, receivers)
        z = (1.7, -2.3, 0.4)
        base = indicator(record, 2, z)
        for k in (-40, -7, 3, 25):
            scaled = record_from_values(values * 2.0**k, receivers)
            assert indicator(scaled, 2, z) == base

    def test_arbitrary_scaling_near_invariant(self):
        rng = np.random.default_rng(6)
        receivers = small_receivers()
        values = rng.normal(size=(20, 2))
        record = record_from_values(values, receivers)
        z = (1.7, -2.3, 0.4)
        base = indicator(record, 2, z)
        for s in (3.7, 0.013, 811.0):
            scaled = record_from_values(values * s, receivers)
            assert indicator(scaled, 2, z) == pytest.approx(base, abs=5e-15)

    def test_negation_is_bitwise_invariant(self):
        rng = np.random.default_rng(7)
        receivers = small_receivers()
        values = rng.normal(size=(20, 2))
        record = record_from_values(values, receivers)
        neg = record_from_values(-values, receivers)
        z = (0.4, 0.9, -1.6)
        assert indicator(neg, 1, z) == indicator(record, 1, z)

    def test_tone_cancels(self):
        # sin(omega0 t) is a common factor of numerator and denominator, so
        # overriding the probe frequency must not move the value
        rng = np.random.default_rng(8)
        receivers = small_receivers()
        record = record_from_values(rng.normal(size=(20, 2)), receivers)
        z = (2.0, 0.5, -0.5)
        base = indicator(record, 1, z)
        for w0 in (0.3, 2.0, 17.0):
            got = indicator(record, 1, z, IndicatorParams(omega0=w0))
            assert got == pytest.approx(base, rel=1e-12)

    def test_zero_column_raises(self):
        receivers = small_receivers()
        values = np.ones((20, 2))
        values[:, 0] = 0.0
        record = record_from_values(values, receivers)
        with pytest.raises(UndefinedIndicatorError):
            indicator(record, 1, (1.0, 1.0, 1.0))
        assert 0.0 <= indicator(record, 2, (1.0, 1.0, 1.0)) <= 1.0

    def test_candidate_at_receiver_raises(self):
        receivers = small_receivers()
        record = record_from_values(np.ones((20, 1)), receivers)
        with pytest.raises(UndefinedIndicatorError):
            indicator(record, 1, receivers.positions[4])

    def test_guard_radius(self):
        receivers = small_receivers()
        record = record_from_values(np.ones((20, 1)), receivers)
        z = receivers.positions[0] + np.array([0.05, 0.0, 0.0])
        assert 0.0 <= indicator(record, 1, z) <= 1.0
        with pytest.raises(UndefinedIndicatorError):
            indicator(record, 1, z, IndicatorParams(exclusion_radius=0.1))


class TestValidSteps:
    def test_matches_explicit_rules(self):
        receivers = small_receivers()
        rng = np.random.default_rng(13)
        values = rng.normal(size=(20, 10))
        values[:, 2] = 0.0
        values[:, 4] *= 1e-16
        record = record_from_values(values, receivers, duration=1.0)
        mask = valid_steps(record)
        col_norms = [
            math.sqrt(math.fsum(values[m, j] ** 2 * receivers.weights[m] for m in range(20)))
            for j in range(10)
        ]
        ceiling = max(col_norms)
        expected = [
            col_norms[j] > 1e-12 * ceiling and abs(math.sin((j + 1) * 0.1)) > 0.1
            for j in range(10)
        ]
        assert mask.tolist() == expected
        assert not expected[0]  # |sin 0.1| = 0.0998 sits just under the floor
        assert not expected[2] and not expected[4]

    def test_zero_threshold_keeps_weak_tones(self):
        receivers = small_receivers()
        values = np.ones((20, 10))
        record = record_from_values(values, receivers, duration=1.0)
        mask = valid_steps(record, IndicatorParams(tone_threshold=0.0))
        assert mask.all()

    def test_all_zero_record(self):
        receivers = small_receivers()
        record = record_from_values(np.zeros((20, 4)), receivers)
        assert not valid_steps(record).any()


class TestLatticeEvaluator:
    def test_matches_scalar_indicator(self):
        rng = np.random.default_rng(17)
        receivers = small_receivers()
        record = record_from_values(rng.normal(size=(20, 2)), receivers)
        mesh = SamplingMesh(Cuboid(center=(0, 0, 0), size=(6, 6, 6)), 3)
        ev = LatticeEvaluator(mesh, receivers)
        vals = ev.column_values(record, 1)
        pts = mesh.points()
        assert vals.shape == (len(pts),)
        for i in range(len(pts)):
            assert vals[i] == pytest.approx(indicator(record, 1, pts[i]), rel=1e-12)

    def test_subset_matches_full(self):
        rng = np.random.default_rng(18)
        receivers = small_receivers()
        record = record_from_values(rng.normal(size=(20, 1)), receivers)
        mesh = SamplingMesh(Cuboid(center=(0, 0, 0), size=(6, 6, 6)), 4)
        ev = LatticeEvaluator(mesh, receivers)
        full = ev.column_values(record, 1)
        idx = np.array([0, 7, 31, 100, 124])
        np.testing.assert_array_equal(ev.column_values(record, 1, idx), full[idx])

    def test_excluded_points_get_minus_one(self):
        # put one receiver exactly on a lattice point
        mesh = SamplingMesh(Cuboid(center=(0, 0, 0), size=(4, 4, 4)), 4)
        pts = mesh.points()
        target = 31
        pos = np.vstack([pts[target], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0]])
        receivers = ReceiverArray(positions=pos, weights=np.ones(3))
        record = record_from_values(np.ones((3, 1)), receivers)
        ev = LatticeEvaluator(mesh, receivers)
        vals = ev.column_values(record, 1)
        assert vals[target] == -1.0
        others = np.delete(vals, target)
        assert np.all(others >= 0.0) and np.all(others <= 1.0)
        with pytest.raises(UndefinedIndicatorError):
            indicator(record, 1, pts[target])

    def test_zero_column_raises(self):
        receivers = small_receivers()
        record = record_from_values(np.zeros((20, 1)), receivers)
        mesh = SamplingMesh(Cuboid(center=(0, 0, 0), size=(4, 4, 4)), 2)
        with pytest.raises(UndefinedIndicatorError):
            LatticeEvaluator(mesh, receivers).column_values(record, 1)


class TestGridArgmax:
    def test_first_maximum_wins(self):
        rng = np.random.default_rng(23)
        receivers = small_receivers()
        mesh = SamplingMesh(Cuboid(center=(0, 0, 0), size=(6, 6, 6)), 4)
        ev = LatticeEvaluator(mesh, receivers)
        for _ in range(20):
            record = record_from_values(rng.normal(size=(20, 1)), receivers)
            point, value, flat = grid_argmax(record, 1, mesh, evaluator=ev)
            vals = ev.column_values(record, 1)
            assert flat == int(np.argmax(vals))
            assert value == vals[flat]
            np.testing.assert_array_equal(point, mesh.points()[flat])

    def test_clamped_plateau_breaks_lexicographically(self):
        # a single receiver correlates perfectly with every candidate, so the
        # clamp produces a broad exact plateau at 1.0
        one = ReceiverArray(positions=[[10.0, 0.0, 0.0]], weights=[4.0e-4])
        record = record_from_values([[0.37]], one, duration=0.1)
        mesh = SamplingMesh(Cuboid(center=(0, 0, 0), size=(4, 4, 4)), 4)
        ev = LatticeEvaluator(mesh, one)
        vals = ev.column_values(record, 1)
        plateau = np.flatnonzero(vals == 1.0)
        assert plateau.size > 1
        point, value, flat = grid_argmax(record, 1, mesh, evaluator=ev)
        assert value == 1.0 and flat == plateau[0]
        tied = [tuple(mesh.points()[i]) for i in plateau]
        assert tuple(point) == min(tied)

    def test_empty_candidates(self):
        receivers = small_receivers()
        record = record_from_values(np.ones((20, 1)), receivers)
        mesh = SamplingMesh(Cuboid(center=(0, 0, 0), size=(4, 4, 4)), 2)
        with pytest.raises(EmptyBallError):
            grid_argmax(record, 1, mesh, candidates=np.array([], dtype=np.int64))

    def test_all_excluded_raises(self):
        receivers = small_receivers()
        record = record_from_values(np.ones((20, 1)), receivers)
        mesh = SamplingMesh(Cuboid(center=(0, 0, 0), size=(4, 4, 4)), 2)
        with pytest.raises(UndefinedIndicatorError):
            grid_argmax(record, 1, mesh, IndicatorParams(exclusion_radius=1e6))

    def test_candidate_restriction(self):
        rng = np.random.default_rng(31)
        receivers = small_receivers()
        record = record_from_values(rng.normal(size=(20, 1)), receivers)
        mesh = SamplingMesh(Cuboid(center=(0, 0, 0), size=(6, 6, 6)), 4)
        ev = LatticeEvaluator(mesh, receivers)
        _, full_val, full_flat = grid_argmax(record, 1, mesh, evaluator=ev)
        rest = np.array([i for i in range(125) if i != full_flat], dtype=np.int64)
        point, val, flat = grid_argmax(record, 1, mesh, evaluator=ev, candidates=rest)
        assert flat != full_flat and val <= full_val


class TestParallelSchedule:
    def test_eight_steps_visit_order(self):
        sched = parallel_schedule(8, v_max=2.0, duration=0.8)
        visits = [(e.level, e.step) for e in sched.entries]
        assert visits == [(0, 8), (1, 4), (2, 2), (2, 6), (3, 1), (3, 3), (3, 5), (3, 7)]
        assert sched.full_coverage
        assert sched.levels == 4
        # ball radii: v_max * ceil(N / 2^(level+1)) * dt with dt = 0.1
        by_level = {e.level: e.radius for e in sched.entries}
        assert by_level[0] == pytest.approx(2.0 * 4 * 0.1)
        assert by_level[1] == pytest.approx(2.0 * 2 * 0.1)
        assert by_level[2] == pytest.approx(2.0 * 1 * 0.1)
        assert by_level[3] == pytest.approx(2.0 * 1 * 0.1)

    def test_ten_steps_leaves_four_and_nine(self):
        sched = parallel_schedule(10, v_max=2.0, duration=1.0)
        assert [e.step for e in sched.entries] == [10, 5, 2, 7, 1, 3, 6, 8]
        assert sched.uncovered_steps == (4, 9)
        assert sched.covered_steps == (1, 2, 3, 5, 6, 7, 8, 10)
        assert not sched.full_coverage

    def test_full_coverage_iff_power_of_two(self):
        for n in range(1, 65):
            sched = parallel_schedule(n, v_max=1.0, duration=1.0)
            assert sched.full_coverage == (n & (n - 1) == 0)
            steps = [e.step for e in sched.entries]
            assert len(steps) == len(set(steps))
            assert all(1 <= s <= n for s in steps)
            assert sched.entries[0].step == n and sched.entries[0].level == 0
            levels = [e.level for e in sched.entries]
            assert levels == sorted(levels)

    def test_single_step(self):
        sched = parallel_schedule(1, v_max=1.0, duration=0.1)
        assert len(sched.entries) == 1 and sched.entries[0].step == 1
        assert sched.levels == 1 and sched.full_coverage

    def test_validation(self):
        with pytest.raises(ValueError):
            parallel_schedule(0, 1.0, 1.0)
        with pytest.raises(ValueError):
            parallel_schedule(4, 0.0, 1.0)
        with pytest.raises(ValueError):
            parallel_schedule(4, 1.0, -1.0)


class TestReconResult:
    def test_validates_lengths(self):
        with pytest.raises(ValueError):
            ReconResult(
                steps=np.array([1, 2]),
                times=np.array([0.1]),
                points=np.zeros((2, 3)),
                indicators=np.zeros(2),
                method="global",
            )
        with pytest.raises(ValueError):
            ReconResult(
                steps=np.array([1]),
                times=np.array([0.1]),
                points=np.zeros((1, 2)),
                indicators=np.zeros(1),
                method="global",
            )


# shared small acquisition: letter-C sampled at 1 s intervals on a 1 m lattice
@pytest.fixture(scope="module")
def small_setup():
    traj = builtin_trajectory("letter-C")
    receivers = make_receiver_array(
        10.0, (math.pi / 4, 3 * math.pi / 4), (-math.pi / 4, math.pi / 4), 200
    )
    medium = MediumSpec(c0=330.0)
    mesh = SamplingMesh(Cuboid(center=(0, 0, 0), size=(16, 16, 16)), 16)
    evaluator = LatticeEvaluator(mesh, receivers)
    grid = TimeGrid(10.0, 10)
    record = synthesize_approx_record(traj, receivers, grid, medium)
    return traj, receivers, medium, mesh, evaluator, record


def recon_errors(traj, result):
    truth = np.vstack([traj.position(t) for t in result.times])
    return np.linalg.norm(result.points - truth, axis=1)


class TestReconstructGlobal:
    def test_tracks_path(self, small_setup):
        traj, _, _, mesh, ev, record = small_setup
        result = reconstruct_global(record, mesh, evaluator=ev)
        assert result.method == "global"
        assert result.steps.tolist() == list(range(1, 11))
        assert result.skipped == () and result.filled == ()
        np.testing.assert_allclose(result.times, record.grid.times)
        # half the 1 m cell plus peak bias; measured 1.23 max on this setup
        assert recon_errors(traj, result).max() <= 1.5
        assert result.indicators.min() > 0.99

    def test_retarded_record_tracks_path(self, small_setup):
        traj, receivers, medium, mesh, ev, _ = small_setup
        record = synthesize_record(traj, receivers, TimeGrid(10.0, 10), medium)
        result = reconstruct_global(record, mesh, evaluator=ev)
        # travel-time lag shifts the peak; measured 2.48 max at c0 = 330
        assert recon_errors(traj, result).max() <= 2.6

    def test_deterministic(self, small_setup):
        _, _, _, mesh, ev, record = small_setup
        a = reconstruct_global(record, mesh, evaluator=ev)
        b = reconstruct_global(record, mesh, evaluator=ev)
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.indicators, b.indicators)

    def test_weak_tone_steps_skipped(self, small_setup):
        traj, receivers, medium, mesh, ev, _ = small_setup
        grid = TimeGrid(10.0, 100)
        record = synthesize_approx_record(traj, receivers, grid, medium)
        oracle_skip = tuple(
            j for j in range(1, 101) if abs(math.sin(j * grid.dt)) <= 0.1
        )
        result = reconstruct_global(record, mesh, evaluator=ev)
        assert result.skipped == oracle_skip
        assert set(result.steps) == set(range(1, 101)) - set(oracle_skip)
        assert recon_errors(traj, result).max() <= 2.6

    def test_empty_when_all_steps_weak(self, small_setup):
        _, receivers, medium, mesh, ev, _ = small_setup
        traj = builtin_trajectory("letter-C")
        record = synthesize_approx_record(traj, receivers, TimeGrid(0.1, 1), medium)
        result = reconstruct_global(record, mesh, evaluator=ev)
        assert result.skipped == (1,)
        assert len(result.steps) == 0 and result.points.shape == (0, 3)


class TestReconstructSequential:
    def test_matches_global_on_clean_data(self, small_setup):
        traj, _, _, mesh, ev, record = small_setup
        g = reconstruct_global(record, mesh, evaluator=ev)
        s = reconstruct_sequential(record, mesh, traj.v_max, evaluator=ev)
        assert s.method == "sequential"
        np.testing.assert_array_equal(s.points, g.points)

    def test_unbounded_ball_equals_global(self, small_setup):
        _, _, _, mesh, ev, record = small_setup
        g = reconstruct_global(record, mesh, evaluator=ev)
        s = reconstruct_sequential(record, mesh, 1e4, evaluator=ev)
        np.testing.assert_array_equal(s.points, g.points)

    def test_ball_restriction_binds(self, small_setup):
        # a crawling velocity bound pins every later step near the first one
        traj, _, _, mesh, ev, record = small_setup
        s = reconstruct_sequential(record, mesh, 1e-6, evaluator=ev)
        hops = np.linalg.norm(np.diff(s.points, axis=0), axis=1)
        assert hops.max() <= mesh.cell_diagonal + 1e-12

    def test_rejects_bad_vmax(self, small_setup):
        _, _, _, mesh, ev, record = small_setup
        with pytest.raises(ValueError):
            reconstruct_sequential(record, mesh, 0.0, evaluator=ev)


class TestReconstructParallel:
    def test_matches_global_and_fills_leftovers(self, small_setup):
        traj, _, _, mesh, ev, record = small_setup
        g = reconstruct_global(record, mesh, evaluator=ev)
        p = reconstruct_parallel(record, mesh, traj.v_max, evaluator=ev)
        assert p.method == "parallel"
        np.testing.assert_array_equal(p.points, g.points)
        assert p.filled == (4, 9)
        assert p.schedule is not None
        assert p.schedule.uncovered_steps == (4, 9)

    def test_weak_anchor_falls_back_to_global_search(self, small_setup):
        # duration 9.5 puts the level-0 anchor at t = 9.5 where the tone is
        # weak, so level 1 must open its search to the whole lattice
        traj, receivers, medium, mesh, ev, _ = small_setup
        record = synthesize_approx_record(traj, receivers, TimeGrid(9.5, 10), medium)
        p = reconstruct_parallel(record, mesh, traj.v_max, evaluator=ev)
        assert p.skipped == (10,)
        assert p.steps.tolist() == list(range(1, 10))
        assert recon_errors(traj, p).max() <= 1.5

    def test_rejects_bad_vmax(self, small_setup):
        _, _, _, mesh, ev, record = small_setup
        with pytest.raises(ValueError):
            reconstruct_parallel(record, mesh, -1.0, evaluator=ev)
