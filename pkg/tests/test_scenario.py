import numpy as np
import pytest

from optflow import convexsets as cs
from optflow import dynamics as dyn
from optflow import scenario as sc
from optflow import topology as tp


class TestValidation:
    def test_two_ball_singleton_passes_a3(self):
        scn = sc.make_counterexample(0)
        scn.sets = (
            cs.Ball(center=np.array([0.0, 0.0]), radius=1.0),
            cs.Ball(center=np.array([2.0, 0.0]), radius=1.0),
        )
        report = sc.validate_scenario(scn)
        assert report.checks["A3_feasibility"][0]

    def test_disjoint_balls_fail_a3_with_half_gap_residual(self):
        scn = sc.make_counterexample(0)
        scn.sets = (
            cs.Ball(center=np.array([0.0, 0.0]), radius=1.0),
            cs.Ball(center=np.array([3.0, 0.0]), radius=1.0),
        )
        report = sc.validate_scenario(scn)
        assert not report.checks["A3_feasibility"][0]
        # Dykstra's candidates straddle the unit-wide gap between the balls,
        # so the best residual is about half the gap.
        assert report.a3_residual >= 0.45
        assert report.a3_residual == pytest.approx(0.5, abs=0.05)

    def test_zero_a_lo_fails_a4(self):
        scn = sc.make_counterexample(0)
        scn.weights = dyn.StateDependentWeights(a_lo=0.0, a_hi=1.0)
        report = sc.validate_scenario(scn)
        assert not report.checks["A4_weights"][0]
        assert not report.all_passed

    def test_unbounded_family_flagged_not_rejected(self):
        scn = sc.make_counterexample(0)
        scn.sets = (
            cs.Halfspace(normal=np.array([1.0, 0.0]), offset=1.0),
            cs.Halfspace(normal=np.array([-1.0, 0.0]), offset=1.0),
        )
        report = sc.validate_scenario(scn)
        assert report.boundedness.startswith("unverified")
        assert report.checks["A3_feasibility"][0]  # still feasible

    def test_report_serializes(self):
        report = sc.validate_scenario(sc.make_counterexample(0))
        blob = report.to_json_dict()
        assert blob["pass"] is True
        assert set(blob["checks"]) == {
            "A1_dwell", "A2_sets", "A3_feasibility", "A4_weights", "step_guard",
        }


class TestGenerators:
    def test_ujsc_reference_properties(self):
        scn = sc.make_reference_ujsc(3, 2, seed=4)
        # Origin belongs to every set (centers on the unit circle, radius 2).
        for s in scn.sets:
            assert cs.distance(s, np.zeros(2)) == 0.0
        topo = scn.realized_topology()
        window = scn.metadata["suggested_ujsc_window"]
        assert tp.certify_ujsc(topo, window).passed
        joint = tp.joint_graph(topo, 0.0, window)
        assert tp.is_strongly_connected(joint)
        assert sc.validate_scenario(scn).all_passed

    def test_ijc_reference_certifications(self):
        scn = sc.make_reference_ijc(4, 2, seed=4, growth=2.0)
        topo = scn.realized_topology()
        assert tp.certify_ijc(topo).passed
        assert not tp.certify_ujsc(topo, scn.metadata["base_interval"]).passed
        starts = [t for t, _ in topo.pieces]
        assert min(np.diff(starts)) >= topo.dwell
        # Scheduled edges form a spanning tree: the joint graph is connected.
        assert tp.is_connected_bidirectional(tp.joint_graph(topo, 0.0, topo.horizon))
        assert sc.validate_scenario(scn).all_passed

    def test_counterexample_certifications_fail(self):
        scn = sc.make_counterexample(0)
        topo = scn.realized_topology()
        report = tp.certify_ujsc(topo, 5.0)
        assert not report.passed
        assert report.first_failure == 0.0
        assert not tp.certify_ijc(topo).passed
        assert sc.validate_scenario(scn).all_passed  # A1-A4 hold regardless

    def test_random_feasible_always_validates(self):
        for seed in range(10):
            scn = sc.make_random_feasible(5, 2, seed=seed, t_end=5.0)
            assert sc.validate_scenario(scn).all_passed

    def test_random_feasible_anchor_in_intersection(self):
        scn = sc.make_random_feasible(4, 3, seed=2, t_end=5.0)
        oracle = scn.intersection_oracle()
        anchor = np.array(scn.metadata["anchor"])
        assert max(cs.distance(s, anchor) for s in scn.sets) <= 1e-12
        # Agreement at the anchor is a zero-distance network state.
        from optflow import metrics as mx

        state = dyn.NetworkState(states=np.tile(anchor, (scn.agent_count, 1)))
        assert mx.d_of(state, oracle) == pytest.approx(0.0, abs=1e-12)

    def test_generation_deterministic(self):
        a = sc.make_random_feasible(4, 2, seed=11)
        b = sc.make_random_feasible(4, 2, seed=11)
        assert sc.scenario_to_toml(a) == sc.scenario_to_toml(b)
        assert sc.scenario_hash(a) == sc.scenario_hash(b)

    def test_seed_sweep_distinct(self):
        hashes = {sc.scenario_hash(sc.make_random_feasible(4, 2, seed=s)) for s in range(10)}
        assert len(hashes) == 10

    def test_desk_scale_enforced(self):
        with pytest.raises(ValueError):
            sc.make_random_feasible(11, 2, seed=0)


class TestSerialization:
    @pytest.mark.parametrize(
        "maker",
        [
            lambda: sc.make_reference_ujsc(4, 2, seed=7),
            lambda: sc.make_reference_ijc(4, 2, seed=7),
            lambda: sc.make_counterexample(7),
            lambda: sc.make_random_feasible(5, 3, seed=7),
        ],
    )
    def test_roundtrip_bit_exact(self, maker, tmp_path):
        scn = maker()
        text = sc.scenario_to_toml(scn)
        again = sc.scenario_from_toml(text)
        assert sc.scenario_to_toml(again) == text
        path = tmp_path / "scn.toml"
        sc.dump_scenario(scn, path)
        assert sc.scenario_to_toml(sc.load_scenario(path)) == text

    def test_time_varying_weights_roundtrip(self):
        scn = sc.make_counterexample(0)
        ones = np.ones((2, 2))
        scn.weights = dyn.TimeVaryingWeights(
            offset=0.6 * ones, amplitude=0.25 * ones,
            omega=1.5 * ones, phase=0.5 * ones, a_lo=0.2, a_hi=1.0,
        )
        text = sc.scenario_to_toml(scn)
        again = sc.scenario_from_toml(text)
        assert isinstance(again.weights, dyn.TimeVaryingWeights)
        assert sc.scenario_to_toml(again) == text

    def test_roundtrip_preserves_behavior(self):
        scn = sc.make_random_feasible(3, 2, seed=13, t_end=5.0)
        clone = sc.scenario_from_toml(sc.scenario_to_toml(scn))
        ta, tb = dyn.simulate(scn), dyn.simulate(clone)
        assert np.array_equal(ta.states, tb.states)

    def test_unknown_top_key_rejected(self):
        text = sc.scenario_to_toml(sc.make_counterexample(0))
        with pytest.raises(sc.ScenarioFormatError, match="unknown"):
            sc.scenario_from_toml(text + "\n[bogus]\nx = 1\n")

    def test_unknown_section_key_rejected(self):
        text = sc.scenario_to_toml(sc.make_counterexample(0))
        text = text.replace("[integrator]", "[integrator]\nwrong_field = 3")
        with pytest.raises(sc.ScenarioFormatError, match="wrong_field"):
            sc.scenario_from_toml(text)

    def test_unknown_set_key_rejected(self):
        text = sc.scenario_to_toml(sc.make_counterexample(0))
        text = text.replace('"radius": 1.0', '"radius": 1.0, "fuzz": 2.0')
        text = text.replace("radius = 1.0", "radius = 1.0, fuzz = 2.0")
        with pytest.raises(sc.ScenarioFormatError):
            sc.scenario_from_toml(text)

    def test_missing_section_rejected(self):
        text = sc.scenario_to_toml(sc.make_counterexample(0))
        text = text.replace("[seed]\nvalue = 0\n", "")
        with pytest.raises(sc.ScenarioFormatError, match="seed"):
            sc.scenario_from_toml(text)

    def test_malformed_toml_rejected(self):
        with pytest.raises(sc.ScenarioFormatError):
            sc.scenario_from_toml("this is not toml [[[")

    def test_all_set_kinds_roundtrip(self):
        sets = (
            cs.Ball(center=np.zeros(2), radius=1.0),
            cs.Halfspace(normal=np.array([1.0, 0.5]), offset=0.25),
            cs.Box(lo=-np.ones(2), hi=np.ones(2)),
            cs.Affine(anchor=np.zeros(2), basis=np.array([[1.0, 0.0]])),
            cs.Polyhedron(
                halfspaces=(
                    cs.Halfspace(normal=np.array([1.0, 0.0]), offset=1.0),
                    cs.Halfspace(normal=np.array([0.0, 1.0]), offset=1.0),
                )
            ),
            cs.Intersection(
                members=(
                    cs.Ball(center=np.zeros(2), radius=2.0),
                    cs.Box(lo=-np.ones(2), hi=np.ones(2)),
                )
            ),
        )
        scn = sc.Scenario(
            dimension=2,
            agent_count=6,
            sets=sets,
            topology=tp.StaticTopology(graph=tp.DigraphSnapshot(n=6)),
            weights=dyn.StateDependentWeights(a_lo=0.1, a_hi=0.4),
            gains=dyn.ConstantGains(values=np.ones(6)),
            initial=dyn.NetworkState(states=np.zeros((6, 2))),
            integrator=dyn.IntegratorConfig(step=0.01, t_end=1.0),
            seed=3,
        )
        text = sc.scenario_to_toml(scn)
        again = sc.scenario_from_toml(text)
        assert sc.scenario_to_toml(again) == text
        for orig, back in zip(scn.sets, again.sets):
            assert type(orig) is type(back)
