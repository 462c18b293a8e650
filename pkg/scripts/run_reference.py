#!/usr/bin/env python3
"""Run the three reference experiments end to end and print a summary table.

Usage:
    python scripts/run_reference.py [--out OUTDIR]

Writes per-scenario trajectory/metrics files under OUTDIR (default
./reference_out) and prints convergence times and check outcomes.
"""

import argparse
import json
from pathlib import Path

from optflow import dynamics as dyn
from optflow import metrics as mx
from optflow import scenario as sc
from optflow import topology as tp


def run_one(name, scn, convergence_tol):
    report = sc.validate_scenario(scn)
    topo = scn.realized_topology()
    window = scn.metadata.get("suggested_ujsc_window", scn.integrator.t_end / 2)
    ujsc = tp.certify_ujsc(topo, float(window)).passed
    ijc = tp.certify_ijc(topo).passed if topo.is_bidirectional() else None
    traj = dyn.simulate(scn)
    metrics = mx.build_metrics_report(
        traj, scn.intersection_oracle(), convergence_tol=convergence_tol
    )
    return {
        "scenario": name,
        "validated": report.all_passed,
        "ujsc": ujsc,
        "ijc": ijc,
        "converged_at": metrics.converged_at,
        "final_diameter": float(metrics.diameter[-1]),
        "final_max_dist_x0": float(metrics.dist_x0[-1].max()),
        "monotone_violations": len(metrics.monotonicity_violations),
    }, traj, metrics


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="reference_out")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    experiments = [
        ("ujsc-directed", sc.make_reference_ujsc(4, 2, seed=7), 1e-3),
        ("ijc-bidirectional", sc.make_reference_ijc(4, 2, seed=4), 1e-2),
        ("counterexample", sc.make_counterexample(0), 1e-1),
    ]
    rows = []
    for name, scn, tol in experiments:
        summary, traj, metrics = run_one(name, scn, tol)
        rows.append(summary)
        (out / f"{name}_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        (out / f"{name}_metrics.csv").write_text(metrics.summary_csv())
        (out / f"{name}_trajectory.csv").write_text(
            dyn.render_trajectory_csv(traj, metrics.dist_xi, metrics.dist_x0)
        )
        print(f"[{name}] " + ", ".join(f"{k}={v}" for k, v in summary.items() if k != "scenario"))
    print(f"\noutputs in {out}/")


if __name__ == "__main__":
    main()
