import numpy as np
import pytest

from optflow import convexsets as cs
from optflow import dynamics as dyn
from optflow import scenario as sc
from optflow import topology as tp


def single_agent_ball(t_end=1.0, x0=(2.0, 0.0), method="rk4", step=0.01):
    """One agent, unit ball at the origin: along the ray the flow solves
    r(t) = 1 + (r0 - 1) e^{-t} in closed form."""
    return sc.Scenario(
        dimension=2,
        agent_count=1,
        sets=(cs.Ball(center=np.zeros(2), radius=1.0),),
        topology=tp.StaticTopology(graph=tp.DigraphSnapshot(n=1)),
        weights=dyn.ConstantWeights(matrix=np.zeros((1, 1)), a_lo=0.1, a_hi=1.0),
        gains=dyn.ConstantGains(values=np.ones(1)),
        initial=dyn.NetworkState(states=np.array([list(x0)])),
        integrator=dyn.IntegratorConfig(method=method, step=step, t_end=t_end),
        seed=0,
    )


def two_agent_chain(arc=(1, 0), t_end=5.0):
    ball = cs.Ball(center=np.zeros(2), radius=10.0)
    return sc.Scenario(
        dimension=2,
        agent_count=2,
        sets=(ball, ball),
        topology=tp.StaticTopology(
            graph=tp.DigraphSnapshot(n=2, arcs=frozenset({arc}))
        ),
        weights=dyn.ConstantWeights(matrix=np.ones((2, 2)), a_lo=0.1, a_hi=1.0),
        gains=dyn.ConstantGains(values=np.ones(2)),
        initial=dyn.NetworkState(states=np.array([[0.0, 0.0], [1.0, 0.0]])),
        integrator=dyn.IntegratorConfig(step=0.01, t_end=t_end),
        seed=0,
    )


class TestVectorField:
    def test_fixed_point_zero_field(self):
        scn = sc.make_reference_ujsc(3, 2, seed=1)
        inside = np.zeros((3, 2))  # origin lies in every reference set
        dx = dyn.vector_field(scn, 0.0, inside)
        assert np.allclose(dx, 0.0)

    def test_single_agent_projection_term(self):
        scn = single_agent_ball()
        dx = dyn.vector_field(scn, 0.0, np.array([[2.0, 0.0]]))
        assert np.allclose(dx, [[-1.0, 0.0]])

    def test_pure_consensus_term(self):
        scn = two_agent_chain(arc=(1, 0))  # agent 1 visible to agent 0
        dx = dyn.vector_field(scn, 0.0, scn.initial.states)
        assert np.allclose(dx[0], [1.0, 0.0])
        assert np.allclose(dx[1], [0.0, 0.0])


class TestWeights:
    def make_tv(self):
        ones = np.ones((2, 2))
        return dyn.TimeVaryingWeights(
            offset=0.6 * ones,
            amplitude=0.3 * ones,
            omega=2.0 * ones,
            phase=np.array([[0.0, 1.0], [2.0, 3.0]]),
            a_lo=0.2,
            a_hi=1.0,
        )

    def test_time_varying_within_bounds(self):
        spec = self.make_tv()
        x = np.zeros((2, 2))
        for t in np.linspace(0.0, 10.0, 101):
            w = dyn.evaluate_weights(spec, x, t)
            assert np.all(w >= spec.a_lo) and np.all(w <= spec.a_hi)

    def test_time_varying_range_validated(self):
        ones = np.ones((2, 2))
        with pytest.raises(ValueError):
            dyn.TimeVaryingWeights(
                offset=0.5 * ones, amplitude=0.6 * ones,  # dips below a_lo
                omega=ones, phase=0.0 * ones, a_lo=0.2, a_hi=1.2,
            )

    def test_symmetry_detection(self):
        assert dyn.weights_are_symmetric(dyn.StateDependentWeights())
        asym = dyn.ConstantWeights(
            matrix=np.array([[0.0, 0.3], [0.7, 0.0]]), a_lo=0.1, a_hi=1.0
        )
        assert not dyn.weights_are_symmetric(asym)
        sym_tv = dyn.TimeVaryingWeights(
            offset=0.6 * np.ones((2, 2)), amplitude=0.2 * np.ones((2, 2)),
            omega=np.ones((2, 2)), phase=np.ones((2, 2)), a_lo=0.2, a_hi=1.0,
        )
        assert dyn.weights_are_symmetric(sym_tv)
        assert not dyn.weights_are_symmetric(self.make_tv())

    def test_state_dependent_clamps(self):
        spec = dyn.StateDependentWeights(a_lo=0.1, a_hi=0.4)
        x = np.array([[0.0, 0.0], [0.01, 0.0], [50.0, 0.0]])
        w = dyn.evaluate_weights(spec, x, 0.0)
        assert np.all(w >= 0.1) and np.all(w <= 0.4)

    def test_simulation_with_time_varying_weights(self):
        scn = two_agent_chain(t_end=3.0)
        scn.weights = self.make_tv()
        traj = dyn.simulate(scn)
        lo, hi = traj.weight_range
        assert lo >= 0.2 - 1e-12 and hi <= 1.0 + 1e-12


class TestLipschitzBound:
    def test_single_agent(self):
        assert dyn.lipschitz_bound(single_agent_ball()) == pytest.approx(2.0)

    def test_four_agents(self):
        scn = sc.make_reference_ujsc(4, 2, seed=0)  # a_hi = 1, gains 1
        assert dyn.lipschitz_bound(scn) == pytest.approx(8.0)

    def test_formula(self):
        # 2 (N-1) a_hi + 2 max b_i with N=2, a_hi=0.5, b=2.
        ball = cs.Ball(center=np.zeros(2), radius=10.0)
        scn = sc.Scenario(
            dimension=2,
            agent_count=2,
            sets=(ball, ball),
            topology=tp.StaticTopology(graph=tp.DigraphSnapshot(n=2)),
            weights=dyn.ConstantWeights(matrix=np.full((2, 2), 0.5), a_lo=0.1, a_hi=0.5),
            gains=dyn.ConstantGains(values=np.array([2.0, 2.0])),
            initial=dyn.NetworkState(states=np.zeros((2, 2))),
            integrator=dyn.IntegratorConfig(step=0.01, t_end=1.0),
            seed=0,
        )
        assert dyn.lipschitz_bound(scn) == pytest.approx(5.0)


class TestSimulate:
    def test_step_guard_refuses(self):
        scn = single_agent_ball(step=0.06)  # h * L = 0.12 > 0.1
        with pytest.raises(dyn.ConfigurationError):
            dyn.simulate(scn)

    def test_fixed_point_preserved_exactly(self):
        scn = sc.make_reference_ujsc(3, 2, seed=1, t_end=5.0)
        scn.initial = dyn.NetworkState(states=np.zeros((3, 2)))
        traj = dyn.simulate(scn)
        assert np.max(np.abs(traj.states - 0.0)) <= 1e-12

    def test_switch_alignment(self):
        scn = sc.make_reference_ujsc(3, 2, seed=2, piece_length=0.7, t_end=10.0)
        traj = dyn.simulate(scn)
        for s in scn.realized_topology().switch_times:
            assert np.any(traj.times == s), f"no sample exactly at switch {s}"

    def test_determinism_bitwise(self):
        scn_a = sc.make_random_feasible(4, 2, seed=5, t_end=10.0)
        scn_b = sc.make_random_feasible(4, 2, seed=5, t_end=10.0)
        ta, tb = dyn.simulate(scn_a), dyn.simulate(scn_b)
        assert np.array_equal(ta.times, tb.times)
        assert np.array_equal(ta.states, tb.states)

    def test_weight_range_clamped(self):
        scn = sc.make_random_feasible(4, 2, seed=3, t_end=10.0)
        traj = dyn.simulate(scn)
        lo, hi = traj.weight_range
        assert lo >= scn.weights.a_lo - 1e-12
        assert hi <= scn.weights.a_hi + 1e-12

    def test_analytic_ball_flow(self):
        traj = dyn.simulate(single_agent_ball(t_end=1.0))
        expected = np.array([1.0 + np.exp(-1.0), 0.0])
        assert np.linalg.norm(traj.states[-1, 0] - expected) <= 1e-6

    def test_counterexample_limits(self):
        scn = sc.make_counterexample(0, t_end=30.0)
        traj = dyn.simulate(scn)
        assert np.allclose(traj.states[-1, 0], [1.0, 0.0], atol=1e-9)
        assert np.allclose(traj.states[-1, 1], [-1.0, 0.0], atol=1e-9)

    def test_euler_rk4_consistency(self):
        # Euler at h/16 and RK4 at h stay within O(h) of each other.
        scn_rk4 = sc.make_reference_ujsc(4, 2, seed=7, t_end=50.0)
        traj_rk4 = dyn.simulate(scn_rk4)
        scn_euler = sc.make_reference_ujsc(4, 2, seed=7, t_end=50.0)
        scn_euler.integrator = dyn.IntegratorConfig(
            method="euler", step=0.01 / 16.0, t_end=50.0
        )
        traj_euler = dyn.simulate(scn_euler)
        check = np.arange(0.0, 50.0 + 1e-9, 5.0)
        dev = max(
            float(np.linalg.norm(traj_rk4.state_at(t) - traj_euler.state_at(t)))
            for t in check
        )
        assert dev <= 10.0 * 0.01

    def test_nonfinite_state_aborts(self):
        class PoisonBall(cs.Ball):
            def project(self, x):
                return np.full_like(np.asarray(x, float), np.nan)

        scn = single_agent_ball()
        scn.sets = (PoisonBall(center=np.zeros(2), radius=1.0),)
        with pytest.raises(dyn.InvariantViolationError, match="non-finite"):
            dyn.simulate(scn)


class TestTrajectoryCsv:
    def test_format_and_determinism(self):
        scn = single_agent_ball(t_end=0.05)
        traj = dyn.simulate(scn)
        xi = cs.SetFamily(scn.sets).distance(traj.states)
        x0 = xi.copy()
        csv_a = dyn.render_trajectory_csv(traj, xi, x0)
        csv_b = dyn.render_trajectory_csv(traj, xi, x0)
        assert csv_a == csv_b
        lines = csv_a.strip().split("\n")
        assert lines[0] == "t,agent,c0,c1,dist_Xi,dist_X0"
        assert lines[1].startswith("0.000000000,0,")
        assert len(lines) == 1 + traj.n_samples * scn.agent_count
