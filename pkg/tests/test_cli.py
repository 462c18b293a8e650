import json

import numpy as np
import pytest

from optflow import cli
from optflow import scenario as sc


def run_cli(argv):
    return cli.main(argv)


@pytest.fixture
def ujsc_file(tmp_path):
    scn = sc.make_reference_ujsc(3, 2, seed=5, t_end=20.0)
    path = tmp_path / "ujsc.toml"
    sc.dump_scenario(scn, path)
    return path


@pytest.fixture
def counterexample_file(tmp_path):
    scn = sc.make_counterexample(0, t_end=20.0)
    path = tmp_path / "ce.toml"
    sc.dump_scenario(scn, path)
    return path


class TestRun:
    def test_reference_run_succeeds(self, ujsc_file, tmp_path, capsys):
        out = tmp_path / "out"
        code = run_cli(["run", str(ujsc_file), "-o", str(out)])
        assert code == 0
        for name in ("trajectory.csv", "metrics.json", "metrics_summary.csv", "manifest.json"):
            assert (out / name).exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["pass"] is True
        assert manifest["converged_at"] is not None
        assert manifest["scenario_hash"] == sc.scenario_hash(sc.load_scenario(ujsc_file))
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["pass"] is True

    def test_validation_failure_exits_2(self, tmp_path):
        scn = sc.make_counterexample(0, t_end=20.0)
        scn.sets = (
            scn.sets[0],
            type(scn.sets[0])(center=np.array([3.0, 0.0]), radius=1.0),
        )
        path = tmp_path / "disjoint.toml"
        sc.dump_scenario(scn, path)
        assert run_cli(["run", str(path), "-o", str(tmp_path / "o")]) == 2

    def test_disconnected_requires_flag(self, counterexample_file, tmp_path):
        out = tmp_path / "out"
        assert run_cli(["run", str(counterexample_file), "-o", str(out)]) == 2
        code = run_cli(
            ["run", str(counterexample_file), "-o", str(out), "--allow-disconnected"]
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["converged_at"] is None

    def test_missing_file_exits_2(self, tmp_path):
        assert run_cli(["run", str(tmp_path / "nope.toml")]) == 2

    def test_rerun_reproduces_outputs(self, ujsc_file, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run_cli(["run", str(ujsc_file), "-o", str(out_a)]) == 0
        assert run_cli(["run", str(ujsc_file), "-o", str(out_b)]) == 0
        for name in ("trajectory.csv", "metrics_summary.csv", "metrics.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_output_dir_env(self, ujsc_file, tmp_path, monkeypatch):
        target = tmp_path / "from_env"
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(target))
        assert run_cli(["run", str(ujsc_file)]) == 0
        assert (target / "manifest.json").exists()

    def test_run_with_containment_check(self, ujsc_file, tmp_path):
        out = tmp_path / "out"
        code = run_cli(
            ["run", str(ujsc_file), "-o", str(out), "--containment-spacing", "5.0"]
        )
        assert code == 0
        metrics = json.loads((out / "metrics.json").read_text())
        excess = metrics["metrics"]["delta_containment_max_excess"]
        assert excess is not None and excess <= 1e-4

    def test_run_ijc_reference(self, tmp_path):
        # Full reference shape: shorter interval counts leave the last-merged
        # leaf short of the tolerance (pair merges decay like e^{-t/2}).
        scn = sc.make_reference_ijc(4, 2, seed=4)
        path = tmp_path / "ijc.toml"
        sc.dump_scenario(scn, path)
        out = tmp_path / "out"
        code = run_cli(["run", str(path), "-o", str(out), "--convergence-tol", "0.01"])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["converged_at"] is not None


class TestCertify:
    def test_static_ring_passes(self, ujsc_file):
        assert run_cli(["certify", str(ujsc_file), "--window", "3.0"]) == 0

    def test_counterexample_fails_with_first_window(self, counterexample_file, capsys):
        code = run_cli(["certify", str(counterexample_file), "--window", "5.0"])
        assert code == 1
        report = json.loads(capsys.readouterr().out)
        assert report["ujsc"]["pass"] is False
        assert report["ujsc"]["first_failure"] == 0.0

    def test_ijc_reference_mixed_report(self, tmp_path, capsys):
        scn = sc.make_reference_ijc(3, 2, seed=2, n_intervals=4)
        path = tmp_path / "ijc.toml"
        sc.dump_scenario(scn, path)
        base = scn.metadata["base_interval"]
        code = run_cli(["certify", str(path), "--window", str(base)])
        report = json.loads(capsys.readouterr().out)
        assert report["ujsc"]["pass"] is False
        assert report["ijc"]["pass"] is True
        assert code == 0  # condition "either"

    def test_requested_condition_controls_exit(self, tmp_path):
        scn = sc.make_reference_ijc(3, 2, seed=2, n_intervals=4)
        path = tmp_path / "ijc.toml"
        sc.dump_scenario(scn, path)
        base = str(scn.metadata["base_interval"])
        assert run_cli(["certify", str(path), "--window", base, "--condition", "ujsc"]) == 1
        assert run_cli(["certify", str(path), "--window", base, "--condition", "ijc"]) == 0

    def test_malformed_input_exits_2(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[problem]\nnope = 1\n")
        assert run_cli(["certify", str(bad)]) == 2


class TestSuite:
    def test_unknown_suite_exits_2(self, tmp_path):
        assert run_cli(["suite", "no-such-suite", "-o", str(tmp_path)]) == 2

    def test_counterexample_suite_scorecard(self, tmp_path, capsys):
        code = run_cli(["suite", "counterexample", "-o", str(tmp_path)])
        assert code == 0
        card = json.loads((tmp_path / "scorecard_counterexample.json").read_text())
        assert card["schema_version"] == 1
        assert card["pass"] is True
        names = [c["name"] for c in card["checks"]]
        assert "counterexample" in names
        assert "PASS" in capsys.readouterr().out


class TestGen:
    def test_gen_then_certify(self, tmp_path):
        path = tmp_path / "gen.toml"
        assert run_cli(["gen", "ujsc", str(path), "-N", "4", "-m", "2", "--seed", "7"]) == 0
        assert run_cli(["certify", str(path)]) == 0

    def test_gen_deterministic(self, tmp_path):
        a, b = tmp_path / "a.toml", tmp_path / "b.toml"
        run_cli(["gen", "random", str(a), "-N", "4", "--seed", "3"])
        run_cli(["gen", "random", str(b), "-N", "4", "--seed", "3"])
        assert a.read_bytes() == b.read_bytes()

    def test_gen_counterexample_runs_to_split(self, tmp_path):
        path = tmp_path / "ce.toml"
        run_cli(["gen", "counterexample", str(path)])
        scn = sc.load_scenario(path)
        from optflow import dynamics as dyn
        from optflow import metrics as mx

        scn.integrator = dyn.IntegratorConfig(step=0.01, t_end=30.0)
        traj = dyn.simulate(scn)
        final = mx.spread_of(dyn.NetworkState(states=traj.states[-1])).diameter
        assert final >= 1.9

    def test_gen_bad_parameters_exit_2(self, tmp_path):
        assert run_cli(["gen", "random", str(tmp_path / "x.toml"), "-N", "40"]) == 2
