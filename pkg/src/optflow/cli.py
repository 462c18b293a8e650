"""Command-line driver: `optflow run|certify|suite|gen`.

Exit codes are a stable contract: 0 success, 1 requested condition failed,
2 validation/input failure, 3 oracle failure, 4 invariant violation.  Every
run emits a manifest with the scenario hash, tool version, seed, wall times,
and per-check summary; re-running a command with identical inputs reproduces
identical output files (manifest wall-time fields aside).
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import convexsets as cs
from . import dynamics as dyn
from . import metrics as mx
from . import scenario as sc
from . import suites as su
from . import topology as tp

EXIT_OK = 0
EXIT_CONDITION_FAILED = 1
EXIT_VALIDATION = 2
EXIT_ORACLE = 3
EXIT_INVARIANT = 4

OUTPUT_DIR_ENV = "OPTFLOW_OUTPUT_DIR"


def _err(msg: str) -> None:
    print(f"optflow: {msg}", file=sys.stderr)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n")


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _output_dir(arg: str | None) -> Path:
    out = Path(arg or os.environ.get(OUTPUT_DIR_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(path: str) -> sc.Scenario:
    return sc.load_scenario(path)


def _default_window(scn: sc.Scenario) -> float:
    window = scn.metadata.get("suggested_ujsc_window")
    if window is not None:
        return float(window)
    return scn.integrator.t_end / 2.0


def cmd_run(args) -> int:
    out = _output_dir(args.output)
    started = _now()
    try:
        scn = _load(args.scenario)
    except (sc.ScenarioFormatError, OSError, ValueError) as exc:
        _err(f"cannot load scenario: {exc}")
        return EXIT_VALIDATION

    report = sc.validate_scenario(scn)
    if not report.all_passed:
        _err("validation failed: " + "; ".join(report.failures()))
        _write_json(out / "validation.json", report.to_json_dict())
        return EXIT_VALIDATION

    topo = scn.realized_topology()
    window = args.window if args.window is not None else _default_window(scn)
    certs = {"ujsc": tp.certify_ujsc(topo, window).to_json_dict()}
    if topo.is_bidirectional():
        certs["ijc"] = tp.certify_ijc(topo).to_json_dict()
    any_connectivity = any(c["pass"] for c in certs.values())
    if not any_connectivity and not args.allow_disconnected:
        _err(
            "no connectivity condition certified; rerun with "
            "--allow-disconnected to simulate anyway"
        )
        _write_json(out / "certification.json", certs)
        return EXIT_VALIDATION

    try:
        traj = dyn.simulate(scn)
    except dyn.InvariantViolationError as exc:
        _err(str(exc))
        return EXIT_INVARIANT
    except dyn.ConfigurationError as exc:
        _err(str(exc))
        return EXIT_VALIDATION

    oracle = scn.intersection_oracle()
    try:
        metrics = mx.build_metrics_report(
            traj, oracle,
            convergence_tol=args.convergence_tol,
            containment_spacing=args.containment_spacing,
        )
    except cs.OracleFailureError as exc:
        _err(f"intersection oracle failed (residual {exc.residual:.3g}): {exc}")
        return EXIT_ORACLE

    lo, hi = traj.weight_range
    invariant_summary = {
        "monotone_d": not metrics.monotonicity_violations,
        "sublevel_invariance": bool(
            metrics.d.max()
            <= metrics.d[0] + mx.monotone_tolerance(traj, float(metrics.d[0]))
        ),
        "weights_in_bounds": bool(
            np.isnan(lo)
            or (lo >= scn.weights.a_lo - 1e-12 and hi <= scn.weights.a_hi + 1e-12)
        ),
    }

    traj_path = out / "trajectory.csv"
    traj_path.write_text(
        dyn.render_trajectory_csv(traj, metrics.dist_xi, metrics.dist_x0)
    )
    metrics_path = out / "metrics.json"
    _write_json(
        metrics_path,
        {"metrics": metrics.to_json_dict(), "certification": certs,
         "validation": report.to_json_dict()},
    )
    summary_path = out / "metrics_summary.csv"
    summary_path.write_text(metrics.summary_csv())

    ok = all(invariant_summary.values())
    manifest = {
        "tool_version": __version__,
        "scenario_hash": sc.scenario_hash(scn),
        "seed": scn.seed,
        "started": started,
        "finished": _now(),
        "outputs": [p.name for p in (traj_path, metrics_path, summary_path)],
        "checks": invariant_summary,
        "converged_at": metrics.converged_at,
        "pass": ok,
    }
    _write_json(out / "manifest.json", manifest)
    print(json.dumps({"pass": ok, "converged_at": metrics.converged_at,
                      "outputs": manifest["outputs"]}, default=float))
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_certify(args) -> int:
    try:
        scn = _load(args.scenario)
        topo = scn.realized_topology()
    except (sc.ScenarioFormatError, OSError, ValueError) as exc:
        _err(f"cannot load scenario: {exc}")
        return EXIT_VALIDATION
    window = args.window if args.window is not None else _default_window(scn)
    reports = {}
    try:
        reports["ujsc"] = tp.certify_ujsc(topo, window).to_json_dict()
    except ValueError as exc:
        _err(f"ujsc certification: {exc}")
        return EXIT_VALIDATION
    if topo.is_bidirectional():
        reports["ijc"] = tp.certify_ijc(topo).to_json_dict()
    print(json.dumps(reports, indent=2, default=float))
    requested = args.condition
    if requested == "either":
        ok = any(r["pass"] for r in reports.values())
    elif requested in reports:
        ok = reports[requested]["pass"]
    else:
        _err(f"condition {requested!r} not applicable (signal not bidirectional?)")
        return EXIT_VALIDATION
    return EXIT_OK if ok else EXIT_CONDITION_FAILED


def cmd_suite(args) -> int:
    if args.name not in su.SUITES:
        _err(f"unknown suite {args.name!r}; choose from {', '.join(sorted(su.SUITES))}")
        return EXIT_VALIDATION
    out = _output_dir(args.output)
    card = su.run_suite(args.name)
    path = out / f"scorecard_{args.name}.json"
    _write_json(path, card)
    for check in card["checks"]:
        status = "PASS" if check["pass"] else "FAIL"
        print(f"{status} {check['name']} ({check['runtime_s']}s)")
    print(f"scorecard written to {path}")
    return EXIT_OK if card["pass"] else EXIT_CONDITION_FAILED


def cmd_gen(args) -> int:
    try:
        if args.kind == "ujsc":
            scn = sc.make_reference_ujsc(args.agents, args.dimension, seed=args.seed)
        elif args.kind == "ijc":
            scn = sc.make_reference_ijc(
                args.agents, args.dimension, seed=args.seed, growth=args.growth
            )
        elif args.kind == "counterexample":
            scn = sc.make_counterexample(args.seed)
        elif args.kind == "random":
            scn = sc.make_random_feasible(args.agents, args.dimension, seed=args.seed)
        else:  # pragma: no cover - argparse restricts choices
            _err(f"unknown kind {args.kind!r}")
            return EXIT_VALIDATION
    except (ValueError, sc.GenerationError) as exc:
        _err(f"generation failed: {exc}")
        return EXIT_VALIDATION
    sc.dump_scenario(scn, args.path)
    print(f"wrote {args.kind} scenario to {args.path} (hash {sc.scenario_hash(scn)[:12]})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optflow",
        description=(
            "Simulate and verify projection-based optimal-consensus flows "
            "under switching communication graphs."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="validate, certify, simulate, and report")
    run.add_argument("scenario", help="scenario TOML file")
    run.add_argument("-o", "--output", help=f"output dir (default ${OUTPUT_DIR_ENV} or .)")
    run.add_argument("--window", type=float, help="UJSC certification window")
    run.add_argument("--convergence-tol", type=float, default=1e-3)
    run.add_argument(
        "--containment-spacing", type=float, default=None,
        help="also run the hull-containment check at this time spacing",
    )
    run.add_argument(
        "--allow-disconnected", action="store_true",
        help="simulate even when no connectivity condition certifies",
    )
    run.set_defaults(fn=cmd_run)

    cert = sub.add_parser("certify", help="run connectivity certifications")
    cert.add_argument("scenario")
    cert.add_argument(
        "--window", type=float,
        help="UJSC window (defaults to the scenario's metadata hint)",
    )
    cert.add_argument(
        "--condition", choices=["ujsc", "ijc", "either"], default="either",
        help="which certificate controls the exit code",
    )
    cert.set_defaults(fn=cmd_certify)

    suite = sub.add_parser("suite", help="run a named verification suite")
    suite.add_argument("name", help=", ".join(sorted(su.SUITES)))
    suite.add_argument("-o", "--output")
    suite.set_defaults(fn=cmd_suite)

    gen = sub.add_parser("gen", help="generate a scenario file")
    gen.add_argument("kind", choices=["ujsc", "ijc", "counterexample", "random"])
    gen.add_argument("path")
    gen.add_argument("-N", "--agents", type=int, default=4)
    gen.add_argument("-m", "--dimension", type=int, default=2)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--growth", type=float, default=2.0)
    gen.set_defaults(fn=cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
