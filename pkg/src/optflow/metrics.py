"""Trajectory observables: the max squared distance to the intersection
d(t), per-coordinate spreads H(t), set distances, the monotonicity and
sublevel-invariance checks, the integral bound for symmetric communication,
multi-projection-hull containment, convergence detection, and tail
statistics.

Distance arrays are computed once per trajectory (batched through the
projectors) and shared across checks via the optional precomputed-array
arguments.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import convexsets as cs
from .dynamics import (
    NetworkState,
    Trajectory,
    lipschitz_bound,
    weights_are_symmetric,
)

__all__ = [
    "BarbalatReport",
    "MetricsReport",
    "Spread",
    "TailStats",
    "barbalat_integral",
    "barbalat_report",
    "build_metrics_report",
    "check_delta_containment",
    "check_monotone_d",
    "d_of",
    "detect_convergence",
    "diameters",
    "is_symmetric_communication",
    "monotone_tolerance",
    "set_distances",
    "spread_of",
    "tail_statistics",
    "x0_distances",
]


def x0_distances(traj: Trajectory, oracle: cs.IntersectionOracle) -> np.ndarray:
    """|x_i(t)|_{X0} for every sample and agent, shape (S, N)."""
    proj = cs.dykstra_project(oracle, traj.states)
    return np.linalg.norm(traj.states - proj, axis=-1)


def set_distances(traj: Trajectory, sets: Sequence[cs.ConvexSet]) -> np.ndarray:
    """|x_i(t)|_{X_i} for every sample and agent, shape (S, N)."""
    return cs.SetFamily(sets).distance(traj.states)


def d_of(state: NetworkState, oracle: cs.IntersectionOracle) -> float:
    """Max over agents of squared distance to the intersection."""
    proj = cs.dykstra_project(oracle, state.states)
    return float(np.max(np.linalg.norm(state.states - proj, axis=-1) ** 2))


@dataclass(frozen=True)
class Spread:
    per_coordinate: np.ndarray  # max_i x_i^l - min_i x_i^l, length m
    diameter: float  # max pairwise |x_i - x_j|


def spread_of(state: NetworkState) -> Spread:
    x = state.states
    per_coord = x.max(axis=0) - x.min(axis=0)
    diff = x[:, None, :] - x[None, :, :]
    return Spread(
        per_coordinate=per_coord,
        diameter=float(np.linalg.norm(diff, axis=-1).max()),
    )


def diameters(traj: Trajectory) -> np.ndarray:
    diff = traj.states[:, :, None, :] - traj.states[:, None, :, :]
    return np.linalg.norm(diff, axis=-1).max(axis=(1, 2))


def monotone_tolerance(traj: Trajectory, d0: float) -> float:
    """Forward-difference slack for the nonincreasing-d check: 1e-6 plus an
    h^2-proportional term absorbing discretization error."""
    h = traj.scenario.integrator.step
    c = 10.0 * lipschitz_bound(traj.scenario) ** 2 * d0
    return 1e-6 + c * h * h


def check_monotone_d(
    traj: Trajectory,
    oracle: cs.IntersectionOracle,
    *,
    dist_x0: np.ndarray | None = None,
) -> list[tuple[float, float]]:
    """Samples where d(t) increased beyond the discretization slack.

    d(t) is nonincreasing along every solution regardless of connectivity,
    so this list is expected empty on any valid scenario.
    """
    if dist_x0 is None:
        dist_x0 = x0_distances(traj, oracle)
    d = (dist_x0**2).max(axis=1)
    tol = monotone_tolerance(traj, float(d[0]))
    jumps = np.diff(d)
    bad = np.flatnonzero(jumps > tol)
    return [(float(traj.times[k + 1]), float(jumps[k])) for k in bad]


def is_symmetric_communication(scenario) -> bool:
    """Bidirectional graph on every piece with a symmetric weight rule."""
    topo = scenario.realized_topology()
    return topo.is_bidirectional() and weights_are_symmetric(scenario.weights)


def barbalat_integral(
    traj: Trajectory,
    sets: Sequence[cs.ConvexSet],
    *,
    dist_xi: np.ndarray | None = None,
) -> float:
    """Trapezoid quadrature of sum_i |x_i(t)|^2_{X_i} over the trajectory."""
    if dist_xi is None:
        dist_xi = set_distances(traj, sets)
    integrand = (dist_xi**2).sum(axis=1)
    return float(np.trapezoid(integrand, traj.times))


@dataclass(frozen=True)
class BarbalatReport:
    value: float
    bound: float  # N * d(0) / 2
    bound_guaranteed: bool  # symmetric undirected communication only
    within_bound: bool

    def to_json_dict(self) -> dict:
        return {
            "integral": self.value,
            "bound": self.bound,
            "bound_guaranteed": self.bound_guaranteed,
            "note": None if self.bound_guaranteed else "bound not guaranteed",
            "within_bound": self.within_bound,
        }


def barbalat_report(
    traj: Trajectory,
    oracle: cs.IntersectionOracle,
    *,
    dist_xi: np.ndarray | None = None,
    dist_x0: np.ndarray | None = None,
) -> BarbalatReport:
    value = barbalat_integral(traj, traj.scenario.sets, dist_xi=dist_xi)
    if dist_x0 is None:
        d0 = d_of(NetworkState(states=traj.states[0], time=0.0), oracle)
    else:
        d0 = float((dist_x0[0] ** 2).max())
    bound = traj.scenario.agent_count * d0 / 2.0
    guaranteed = is_symmetric_communication(traj.scenario)
    return BarbalatReport(
        value=value,
        bound=bound,
        bound_guaranteed=guaranteed,
        within_bound=value <= bound * 1.05 + 1e-12,
    )


@dataclass(frozen=True)
class ContainmentExcess:
    t: float
    t_hat: float
    excess: float  # max_i hull_distance(states(t), x_i(t_hat)) - 2 max_j |x_j(t)|_X0


def check_delta_containment(
    traj: Trajectory,
    oracle: cs.IntersectionOracle,
    check_times: Sequence[float],
    *,
    dist_x0: np.ndarray | None = None,
) -> list[ContainmentExcess]:
    """Hull containment along the flow, for every ordered pair of check
    times t < t_hat.

    Later states stay inside the multi-projection hull of any earlier state
    family, and that hull extends at most twice the worst distance-to-
    intersection beyond the state hull itself; the excess is therefore
    expected nonpositive (up to integration slack).
    """
    times = sorted(set(float(t) for t in check_times))
    span = (traj.times[0] - 1e-9, traj.times[-1] + 1e-9)
    for t in times:
        if not span[0] <= t <= span[1]:
            raise ValueError(f"check time {t} outside trajectory span")
    if dist_x0 is None:
        dist_x0 = x0_distances(traj, oracle)
    out: list[ContainmentExcess] = []
    idx = [traj.index_at(t) for t in times]
    for a, (t, k) in enumerate(zip(times, idx)):
        gens = [traj.states[k, i] for i in range(traj.states.shape[1])]
        allowance = 2.0 * float(dist_x0[k].max())
        for t_hat, k_hat in zip(times[a + 1 :], idx[a + 1 :]):
            worst = max(
                cs.hull_distance(gens, traj.states[k_hat, i])
                for i in range(traj.states.shape[1])
            )
            out.append(
                ContainmentExcess(t=t, t_hat=t_hat, excess=worst - allowance)
            )
    return out


def detect_convergence(
    traj: Trajectory,
    oracle: cs.IntersectionOracle,
    tol: float,
    *,
    dist_x0: np.ndarray | None = None,
) -> float | None:
    """Earliest sample time after which the states stay within `tol` of the
    intersection and of each other through the end of the run."""
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if dist_x0 is None:
        dist_x0 = x0_distances(traj, oracle)
    ok = (dist_x0.max(axis=1) <= tol) & (diameters(traj) <= tol)
    if not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    first = 0 if bad.size == 0 else int(bad[-1]) + 1
    return float(traj.times[first])


@dataclass(frozen=True)
class TailStats:
    window: tuple[float, float]
    per_agent_max_set_distance: np.ndarray  # max_t |x_i|_{X_i} over the tail
    per_agent_d_range: np.ndarray  # max-min of d_i(t) over the tail
    max_set_distance: float


def tail_statistics(
    traj: Trajectory,
    sets: Sequence[cs.ConvexSet],
    oracle: cs.IntersectionOracle,
    tail_fraction: float,
    *,
    dist_xi: np.ndarray | None = None,
    dist_x0: np.ndarray | None = None,
) -> TailStats:
    """Tail-window extremes standing in for the limit quantities: the limits
    themselves are not observable in a finite run, so they are estimated by
    the trailing window and never asserted exactly."""
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    if dist_xi is None:
        dist_xi = set_distances(traj, sets)
    if dist_x0 is None:
        dist_x0 = x0_distances(traj, oracle)
    start = traj.n_samples - max(1, int(round(traj.n_samples * tail_fraction)))
    di = dist_x0[start:] ** 2
    return TailStats(
        window=(float(traj.times[start]), float(traj.times[-1])),
        per_agent_max_set_distance=dist_xi[start:].max(axis=0),
        per_agent_d_range=di.max(axis=0) - di.min(axis=0),
        max_set_distance=float(dist_xi[start:].max()),
    )


# ---------------------------------------------------------------------------
# Aggregate report
# ---------------------------------------------------------------------------


@dataclass
class MetricsReport:
    times: np.ndarray
    d: np.ndarray  # (S,)
    spread: np.ndarray  # (S, m)
    diameter: np.ndarray  # (S,)
    dist_xi: np.ndarray  # (S, N)
    dist_x0: np.ndarray  # (S, N)
    monotonicity_violations: list[tuple[float, float]]
    barbalat: BarbalatReport
    delta_containment: list[ContainmentExcess]
    converged_at: float | None

    def to_json_dict(self) -> dict:
        return {
            "d0": float(self.d[0]),
            "d_final": float(self.d[-1]),
            "max_d": float(self.d.max()),
            "final_diameter": float(self.diameter[-1]),
            "final_max_dist_xi": float(self.dist_xi[-1].max()),
            "final_max_dist_x0": float(self.dist_x0[-1].max()),
            "monotonicity_violations": [
                {"t": t, "jump": j} for t, j in self.monotonicity_violations
            ],
            "barbalat": self.barbalat.to_json_dict(),
            "delta_containment_max_excess": (
                max(e.excess for e in self.delta_containment)
                if self.delta_containment
                else None
            ),
            "converged_at": self.converged_at,
        }

    def summary_csv(self) -> str:
        """Per-sample summary: t,d,H_max,diam,max_dist_Xi."""
        buf = io.StringIO()
        buf.write("t,d,H_max,diam,max_dist_Xi\n")
        h_max = self.spread.max(axis=1)
        xi_max = self.dist_xi.max(axis=1)
        for k in range(len(self.times)):
            buf.write(
                f"{self.times[k]:.9f},{self.d[k]!r},{h_max[k]!r},"
                f"{self.diameter[k]!r},{xi_max[k]!r}\n"
            )
        return buf.getvalue()


def build_metrics_report(
    traj: Trajectory,
    oracle: cs.IntersectionOracle,
    *,
    convergence_tol: float = 1e-3,
    containment_spacing: float | None = None,
) -> MetricsReport:
    """Compute every observable once over a trajectory."""
    dist_x0 = x0_distances(traj, oracle)
    dist_xi = set_distances(traj, traj.scenario.sets)
    d = (dist_x0**2).max(axis=1)
    spread = traj.states.max(axis=1) - traj.states.min(axis=1)
    diam = diameters(traj)
    if containment_spacing is not None:
        t_end = float(traj.times[-1])
        checks = list(np.arange(0.0, t_end + 1e-9, containment_spacing))
        containment = check_delta_containment(traj, oracle, checks, dist_x0=dist_x0)
    else:
        containment = []
    return MetricsReport(
        times=traj.times,
        d=d,
        spread=spread,
        diameter=diam,
        dist_xi=dist_xi,
        dist_x0=dist_x0,
        monotonicity_violations=check_monotone_d(traj, oracle, dist_x0=dist_x0),
        barbalat=barbalat_report(traj, oracle, dist_xi=dist_xi, dist_x0=dist_x0),
        delta_containment=containment,
        converged_at=detect_convergence(
            traj, oracle, convergence_tol, dist_x0=dist_x0
        ),
    )
