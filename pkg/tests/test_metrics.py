import numpy as np
import pytest

from optflow import convexsets as cs
from optflow import dynamics as dyn
from optflow import metrics as mx
from optflow import scenario as sc

from test_dynamics import single_agent_ball


def fixed_point_trajectory(t_end=5.0):
    scn = sc.make_reference_ujsc(3, 2, seed=1, t_end=t_end)
    scn.initial = dyn.NetworkState(states=np.zeros((3, 2)))
    return scn, dyn.simulate(scn)


class TestDistanceObservables:
    def test_d_of_inside(self):
        oracle = cs.IntersectionOracle(members=(cs.Ball(center=np.zeros(2), radius=1.0),))
        state = dyn.NetworkState(states=np.array([[0.1, 0.0], [0.0, -0.2]]))
        assert mx.d_of(state, oracle) == pytest.approx(0.0, abs=1e-12)

    def test_d_of_ball(self):
        oracle = cs.IntersectionOracle(members=(cs.Ball(center=np.zeros(2), radius=1.0),))
        state = dyn.NetworkState(states=np.array([[2.0, 0.0], [0.0, 0.0]]))
        assert mx.d_of(state, oracle) == pytest.approx(1.0)

    def test_d_of_orthant(self):
        orthant = cs.IntersectionOracle(
            members=(
                cs.Halfspace(normal=np.array([-1.0, 0.0]), offset=0.0),
                cs.Halfspace(normal=np.array([0.0, -1.0]), offset=0.0),
            )
        )
        state = dyn.NetworkState(states=np.array([[-1.0, -1.0], [1.0, 1.0]]))
        assert mx.d_of(state, orthant) == pytest.approx(2.0)

    def test_spread_identical(self):
        state = dyn.NetworkState(states=np.ones((4, 3)))
        s = mx.spread_of(state)
        assert np.allclose(s.per_coordinate, 0.0)
        assert s.diameter == 0.0

    def test_spread_pythagoras(self):
        state = dyn.NetworkState(states=np.array([[0.0, 0.0], [3.0, 4.0]]))
        s = mx.spread_of(state)
        assert np.allclose(s.per_coordinate, [3.0, 4.0])
        assert s.diameter == pytest.approx(5.0)

    def test_spread_collinear(self):
        state = dyn.NetworkState(states=np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
        s = mx.spread_of(state)
        assert np.allclose(s.per_coordinate, [2.0, 0.0])
        assert s.diameter == pytest.approx(2.0)


class TestMonotoneD:
    def test_fixed_point_clean(self):
        scn, traj = fixed_point_trajectory()
        assert mx.check_monotone_d(traj, scn.intersection_oracle()) == []

    def test_counterexample_clean(self):
        # The nonincreasing property needs no connectivity at all.
        scn = sc.make_counterexample(0, t_end=20.0)
        traj = dyn.simulate(scn)
        assert mx.check_monotone_d(traj, scn.intersection_oracle()) == []

    def test_corrupted_sample_flagged(self):
        scn = sc.make_counterexample(0, t_end=5.0)
        traj = dyn.simulate(scn)
        traj.states[300] *= 5.0  # inflate one sample; the detector must fire
        viol = mx.check_monotone_d(traj, scn.intersection_oracle())
        assert any(abs(t - traj.times[300]) < 1e-9 for t, _ in viol)

    def test_sublevel_invariance(self):
        scn = sc.make_random_feasible(4, 2, seed=9, t_end=20.0)
        traj = dyn.simulate(scn)
        dist = mx.x0_distances(traj, scn.intersection_oracle())
        d = (dist**2).max(axis=1)
        assert d.max() <= d[0] + mx.monotone_tolerance(traj, float(d[0]))


class TestBarbalat:
    def test_fixed_point_zero(self):
        scn, traj = fixed_point_trajectory()
        assert mx.barbalat_integral(traj, scn.sets) == pytest.approx(0.0, abs=1e-15)

    def test_single_agent_analytic(self):
        scn = single_agent_ball(t_end=20.0)
        traj = dyn.simulate(scn)
        value = mx.barbalat_integral(traj, scn.sets)
        expected = 0.5 * (1.0 - np.exp(-40.0))
        assert value == pytest.approx(expected, abs=1e-4)
        report = mx.barbalat_report(traj, scn.intersection_oracle())
        assert report.bound_guaranteed
        assert report.within_bound  # bound N d(0)/2 = 0.5, met with equality in the limit

    def test_symmetric_two_agent_bound(self):
        scn = sc.make_random_feasible(2, 2, seed=4, t_end=40.0, bidirectional=True)
        traj = dyn.simulate(scn)
        report = mx.barbalat_report(traj, scn.intersection_oracle())
        assert report.bound_guaranteed
        assert report.value <= report.bound * 1.05 + 1e-9

    def test_directed_flagged_unguaranteed(self):
        scn = sc.make_reference_ujsc(3, 2, seed=2, t_end=10.0)
        traj = dyn.simulate(scn)
        report = mx.barbalat_report(traj, scn.intersection_oracle())
        assert not report.bound_guaranteed
        assert report.to_json_dict()["note"] == "bound not guaranteed"


class TestDeltaContainment:
    def test_same_time_in_own_hull(self):
        scn, traj = fixed_point_trajectory()
        states = traj.states[0]
        gens = [states[i] for i in range(states.shape[0])]
        for i in range(states.shape[0]):
            assert cs.hull_distance(gens, states[i]) <= 1e-12

    def test_fixed_point_no_excess(self):
        scn, traj = fixed_point_trajectory()
        out = mx.check_delta_containment(
            traj, scn.intersection_oracle(), [0.0, 1.0, 2.0]
        )
        assert all(e.excess <= 1e-9 for e in out)
        assert len(out) == 3  # ordered pairs of three times

    def test_reference_trajectory_contained(self):
        scn = sc.make_reference_ujsc(4, 2, seed=7, t_end=30.0)
        traj = dyn.simulate(scn)
        out = mx.check_delta_containment(
            traj, scn.intersection_oracle(), list(np.arange(0.0, 30.1, 5.0))
        )
        assert all(e.excess <= 1e-4 for e in out)

    def test_out_of_span_rejected(self):
        scn, traj = fixed_point_trajectory()
        with pytest.raises(ValueError):
            mx.check_delta_containment(traj, scn.intersection_oracle(), [0.0, 99.0])


class TestConvergence:
    def test_fixed_point_time_zero(self):
        scn, traj = fixed_point_trajectory()
        t = mx.detect_convergence(traj, scn.intersection_oracle(), tol=1e-3)
        assert t == 0.0

    def test_counterexample_absent(self):
        scn = sc.make_counterexample(0, t_end=30.0)
        traj = dyn.simulate(scn)
        assert mx.detect_convergence(traj, scn.intersection_oracle(), tol=0.1) is None

    def test_reference_converges_and_is_stable(self):
        scn = sc.make_reference_ujsc(4, 2, seed=7, t_end=60.0)
        t1 = mx.detect_convergence(
            dyn.simulate(scn), scn.intersection_oracle(), tol=1e-3
        )
        scn2 = sc.make_reference_ujsc(4, 2, seed=7, t_end=60.0)
        t2 = mx.detect_convergence(
            dyn.simulate(scn2), scn2.intersection_oracle(), tol=1e-3
        )
        assert t1 is not None
        assert t1 == t2

    def test_bad_tol(self):
        scn, traj = fixed_point_trajectory()
        with pytest.raises(ValueError):
            mx.detect_convergence(traj, scn.intersection_oracle(), tol=0.0)


class TestTailStatistics:
    def test_fixed_point_zeros(self):
        scn, traj = fixed_point_trajectory()
        stats = mx.tail_statistics(
            traj, scn.sets, scn.intersection_oracle(), tail_fraction=0.25
        )
        assert stats.max_set_distance == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(stats.per_agent_d_range, 0.0, atol=1e-12)

    def test_single_agent_analytic_tail(self):
        scn = single_agent_ball(t_end=20.0)
        traj = dyn.simulate(scn)
        stats = mx.tail_statistics(
            traj, scn.sets, scn.intersection_oracle(), tail_fraction=0.5
        )
        assert stats.window[0] == pytest.approx(10.0, abs=0.02)
        # The maximum sits at the window's first sample: dist(t) = e^{-t}.
        assert stats.max_set_distance == pytest.approx(
            np.exp(-stats.window[0]), rel=1e-6
        )


class TestReport:
    def test_report_roundtrip(self):
        scn = sc.make_reference_ujsc(3, 2, seed=5, t_end=20.0)
        traj = dyn.simulate(scn)
        report = mx.build_metrics_report(
            traj, scn.intersection_oracle(), containment_spacing=5.0
        )
        blob = report.to_json_dict()
        assert blob["monotonicity_violations"] == []
        assert blob["converged_at"] is not None
        csv = report.summary_csv()
        assert csv.splitlines()[0] == "t,d,H_max,diam,max_dist_Xi"
        assert len(csv.splitlines()) == 1 + traj.n_samples
