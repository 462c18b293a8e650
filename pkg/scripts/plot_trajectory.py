#!/usr/bin/env python3
"""Plot a trajectory CSV produced by `optflow run` or the reference script.

Optional post-processing: matplotlib is not a core dependency.

Usage:
    python scripts/plot_trajectory.py trajectory.csv [--out plot.png]
"""

import argparse
import csv
from collections import defaultdict

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError as exc:  # pragma: no cover
    raise SystemExit("plotting needs matplotlib: pip install optflow[plot]") from exc


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("csv_path")
    parser.add_argument("--out", default="trajectory.png")
    args = parser.parse_args()

    times = defaultdict(list)
    coords = defaultdict(list)
    dist_x0 = defaultdict(list)
    with open(args.csv_path) as fh:
        reader = csv.DictReader(fh)
        coord_cols = [c for c in reader.fieldnames if c.startswith("c")]
        for row in reader:
            agent = int(row["agent"])
            times[agent].append(float(row["t"]))
            coords[agent].append([float(row[c]) for c in coord_cols])
            dist_x0[agent].append(float(row["dist_X0"]))

    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
    for agent in sorted(times):
        xy = list(zip(*coords[agent]))
        if len(xy) >= 2:
            axes[0].plot(xy[0], xy[1], label=f"agent {agent}", lw=0.8)
            axes[0].plot(xy[0][-1], xy[1][-1], "o", ms=4)
        else:
            axes[0].plot(times[agent], xy[0], label=f"agent {agent}", lw=0.8)
        axes[1].semilogy(
            times[agent],
            [max(d, 1e-17) for d in dist_x0[agent]],
            label=f"agent {agent}",
            lw=0.8,
        )
    axes[0].set_title("state trajectories")
    axes[0].set_xlabel("c0")
    axes[0].set_ylabel("c1" if len(coord_cols) >= 2 else "c0")
    axes[1].set_title("distance to the intersection")
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("dist_X0")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=140)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
