"""Named verification suites: property-based and oracle-based checks at desk
scale, shared between the command-line driver and the acceptance tests.

Each check returns a CheckOutcome with the measured values alongside the
pinned tolerance, so scorecards stay auditable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import convexsets as cs
from . import dynamics as dyn
from . import metrics as mx
from . import scenario as sc
from . import topology as tp

__all__ = [
    "CheckOutcome",
    "SUITES",
    "analytic_trajectory_check",
    "counterexample_check",
    "delta_containment_check",
    "determinism_check",
    "eq39_analytic_check",
    "eq39_family_check",
    "lemma41_sweep",
    "oracle_equivalence_check",
    "projector_axiom_checks",
    "run_suite",
    "theorem31_check",
    "theorem32_check",
]

SCORECARD_SCHEMA_VERSION = 1


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    details: dict
    runtime_s: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "pass": self.passed,
            "details": self.details,
            "runtime_s": round(self.runtime_s, 3),
        }


def _timed(name: str, fn: Callable[[], tuple[bool, dict]]) -> CheckOutcome:
    start = time.perf_counter()
    passed, details = fn()
    return CheckOutcome(
        name=name, passed=passed, details=details,
        runtime_s=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# Projector axioms (criterion: zero violations beyond 1e-9 over 1000 samples
# per axiom per set variant)
# ---------------------------------------------------------------------------


def _axiom_variants(dim: int = 2) -> dict[str, cs.ConvexSet]:
    e1 = np.zeros(dim)
    e1[0] = 1.0
    basis = np.zeros((1, dim))
    basis[0, -1] = 1.0
    diag = np.ones(dim) / np.sqrt(dim)
    return {
        "halfspace": cs.Halfspace(normal=e1, offset=1.0),
        "ball": cs.Ball(center=0.3 * e1, radius=1.5),
        "box": cs.Box(lo=-np.ones(dim), hi=0.5 * np.ones(dim)),
        "affine": cs.Affine(anchor=0.2 * e1, basis=basis),
        "polyhedron": cs.Polyhedron(
            halfspaces=(
                cs.Halfspace(normal=e1, offset=1.0),
                cs.Halfspace(normal=-e1, offset=1.0),
                cs.Halfspace(normal=diag, offset=0.8),
            )
        ),
        "intersection": cs.Intersection(
            members=(
                cs.Ball(center=np.zeros(dim), radius=2.0),
                cs.Box(lo=-1.5 * np.ones(dim), hi=1.5 * np.ones(dim)),
            )
        ),
    }


def projector_axiom_checks(samples: int = 1000, seed: int = 2024) -> list[CheckOutcome]:
    out = []
    for variant, set_ in _axiom_variants().items():
        out.append(
            _timed(
                f"projector-axioms[{variant}]",
                lambda s=set_: _axiom_check_one(s, samples, seed),
            )
        )
    return out


def _axiom_check_one(set_: cs.ConvexSet, samples: int, seed: int) -> tuple[bool, dict]:
    rng = np.random.default_rng(seed)
    m = set_.dim
    slack = 1e-9
    xs = rng.normal(size=(samples, m)) * 4.0
    ys = rng.normal(size=(samples, m)) * 4.0
    px, py = cs.project(set_, xs), cs.project(set_, ys)

    nonexp = np.linalg.norm(px - py, axis=-1) - np.linalg.norm(xs - ys, axis=-1)
    violations = {"nonexpansive": int(np.sum(nonexp > slack))}

    inside = cs.project(set_, rng.normal(size=(samples, m)) * 4.0)
    vi = np.einsum("ij,ij->i", px - xs, px - inside)
    violations["variational"] = int(np.sum(vi > slack))

    da = np.linalg.norm(xs - px, axis=-1)
    db = np.linalg.norm(ys - py, axis=-1)
    lhs = np.einsum("ij,ij->i", xs - px, ys - xs)
    violations["distance_inequality"] = int(np.sum(lhs > da * np.abs(da - db) + slack))
    strict = da > db
    violations["distance_inequality_strict"] = int(
        np.sum(lhs[strict] > -(da * (da - db))[strict] + slack)
    )

    # Gradient vs central differences, at points safely outside the set.
    far = xs[da >= 0.1]
    grad = cs.sqdist_gradient(set_, far)
    fd = np.empty_like(grad)
    h = 3e-7 * np.maximum(1.0, np.linalg.norm(far, axis=-1, keepdims=True))
    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        step = h * e
        fd[:, j] = (
            cs.distance(set_, far + step) ** 2 - cs.distance(set_, far - step) ** 2
        ) / (2.0 * h[:, 0])
    rel = np.linalg.norm(fd - grad, axis=-1) / np.linalg.norm(grad, axis=-1)
    violations["gradient_identity"] = int(np.sum(rel > 1e-5))

    total = sum(violations.values())
    return total == 0, {"samples": samples, "violations": violations}


def oracle_equivalence_check(points: int = 200, seed: int = 99) -> CheckOutcome:
    """Iterative intersection projection vs closed forms on the orthant and
    the tangent two-ball singleton; max error must stay within 1e-6."""

    def run() -> tuple[bool, dict]:
        rng = np.random.default_rng(seed)
        orthant = cs.IntersectionOracle(
            members=(
                cs.Halfspace(normal=np.array([-1.0, 0.0]), offset=0.0),
                cs.Halfspace(normal=np.array([0.0, -1.0]), offset=0.0),
            )
        )
        xs = rng.normal(size=(points, 2)) * 3.0
        err_orthant = float(
            np.max(
                np.linalg.norm(
                    cs.dykstra_project(orthant, xs) - np.maximum(xs, 0.0), axis=-1
                )
            )
        )
        tangent = cs.IntersectionOracle(
            members=(
                cs.Ball(center=np.array([0.0, 0.0]), radius=1.0),
                cs.Ball(center=np.array([2.0, 0.0]), radius=1.0),
            )
        )
        xs2 = rng.normal(size=(points, 2)) * 3.0
        err_balls = float(
            np.max(
                np.linalg.norm(
                    cs.dykstra_project(tangent, xs2) - np.array([1.0, 0.0]), axis=-1
                )
            )
        )
        ok = err_orthant <= 1e-6 and err_balls <= 1e-6
        return ok, {
            "points": points,
            "max_error_orthant": err_orthant,
            "max_error_two_ball": err_balls,
            "tolerance": 1e-6,
        }

    return _timed("oracle-equivalence", run)


# ---------------------------------------------------------------------------
# Trajectory-level checks
# ---------------------------------------------------------------------------


def lemma41_sweep(
    n_scenarios: int = 50, t_end: float = 50.0, seed0: int = 0
) -> CheckOutcome:
    """Nonincreasing d(t) and sublevel invariance over randomized feasible
    scenarios; connectivity is irrelevant for both properties."""

    def run() -> tuple[bool, dict]:
        total_viol = 0
        worst_overshoot = -np.inf
        hashes = set()
        for k in range(n_scenarios):
            seed = seed0 + k
            scn = sc.make_random_feasible(
                2 + seed % 5, 1 + seed % 3, seed=seed, t_end=t_end
            )
            hashes.add(sc.scenario_hash(scn))
            traj = dyn.simulate(scn)
            oracle = scn.intersection_oracle()
            dist = mx.x0_distances(traj, oracle)
            d = (dist**2).max(axis=1)
            viol = mx.check_monotone_d(traj, oracle, dist_x0=dist)
            total_viol += len(viol)
            tol = mx.monotone_tolerance(traj, float(d[0]))
            worst_overshoot = max(worst_overshoot, float(d.max() - d[0] - tol))
        distinct = len(hashes) == n_scenarios
        return total_viol == 0 and worst_overshoot <= 0.0 and distinct, {
            "scenarios": n_scenarios,
            "distinct_scenarios": len(hashes),
            "monotonicity_violations": total_viol,
            "worst_sublevel_overshoot": worst_overshoot,
        }

    return _timed("lemma41-sweep", run)


def theorem31_artifacts(seed: int = 7, t_end: float = 200.0):
    """Reference directed run shared by the convergence and containment
    checks: trajectory plus its intersection-distance array."""
    scn = sc.make_reference_ujsc(4, 2, seed=seed, t_end=t_end)
    traj = dyn.simulate(scn)
    oracle = scn.intersection_oracle()
    dist_x0 = mx.x0_distances(traj, oracle)
    return scn, traj, oracle, dist_x0


def theorem31_check(artifacts=None) -> CheckOutcome:
    def run() -> tuple[bool, dict]:
        scn, traj, oracle, dist_x0 = artifacts or theorem31_artifacts()
        converged_at = mx.detect_convergence(traj, oracle, tol=1e-3, dist_x0=dist_x0)
        tail = mx.tail_statistics(
            traj, scn.sets, oracle, tail_fraction=0.1, dist_x0=dist_x0
        )
        ok = converged_at is not None and tail.max_set_distance <= 1e-3
        return ok, {
            "converged_at": converged_at,
            "convergence_tol": 1e-3,
            "tail_max_set_distance": tail.max_set_distance,
            "tail_tolerance": 1e-3,
        }

    return _timed("theorem31-ujsc", run)


def theorem32_check(seed: int = 4) -> CheckOutcome:
    def run() -> tuple[bool, dict]:
        scn = sc.make_reference_ijc(4, 2, seed=seed, growth=2.0)
        topo = scn.realized_topology()
        base = scn.metadata["base_interval"]
        ujsc_fails = not tp.certify_ujsc(topo, base).passed
        ijc_holds = tp.certify_ijc(topo).passed
        traj = dyn.simulate(scn)
        oracle = scn.intersection_oracle()
        converged_at = mx.detect_convergence(traj, oracle, tol=1e-2)
        ok = ujsc_fails and ijc_holds and converged_at is not None
        return ok, {
            "converged_at": converged_at,
            "convergence_tol": 1e-2,
            "horizon": scn.integrator.t_end,
            "ujsc_fails_at_base_window": ujsc_fails,
            "ijc_passes": ijc_holds,
        }

    return _timed("theorem32-ijc", run)


def counterexample_check(seed: int = 0, t_end: float = 100.0) -> CheckOutcome:
    def run() -> tuple[bool, dict]:
        scn = sc.make_counterexample(seed, t_end=t_end)
        traj = dyn.simulate(scn)
        oracle = scn.intersection_oracle()
        converged = mx.detect_convergence(traj, oracle, tol=0.1)
        diam = mx.spread_of(
            dyn.NetworkState(states=traj.states[-1], time=traj.times[-1])
        ).diameter
        limits = np.array([[1.0, 0.0], [-1.0, 0.0]])
        limit_err = float(np.max(np.linalg.norm(traj.states[-1] - limits, axis=-1)))
        # The analytic diameter 2 + 4 e^{-t} approaches 2 from above, so the
        # upper end of the band carries float slack.
        ok = (
            converged is None
            and 1.9 <= diam <= 2.0 + 1e-9
            and limit_err <= 1e-3
        )
        return ok, {
            "converged_at": converged,
            "terminal_diameter": diam,
            "diameter_band": [1.9, 2.0],
            "terminal_limit_error": limit_err,
            "limit_tolerance": 1e-3,
        }

    return _timed("counterexample", run)


def _analytic_single_agent(t_end: float) -> sc.Scenario:
    return sc.Scenario(
        dimension=2,
        agent_count=1,
        sets=(cs.Ball(center=np.zeros(2), radius=1.0),),
        topology=tp.StaticTopology(graph=tp.DigraphSnapshot(n=1)),
        weights=dyn.ConstantWeights(matrix=np.zeros((1, 1)), a_lo=0.1, a_hi=1.0),
        gains=dyn.ConstantGains(values=np.ones(1)),
        initial=dyn.NetworkState(states=np.array([[2.0, 0.0]])),
        integrator=dyn.IntegratorConfig(method="rk4", step=0.01, t_end=t_end),
        seed=0,
    )


def eq39_analytic_check(t_end: float = 20.0) -> CheckOutcome:
    """Single agent outside the unit ball: the squared set distance is
    e^{-2t}, so the integral is (1 - e^{-2 t_end}) / 2."""

    def run() -> tuple[bool, dict]:
        scn = _analytic_single_agent(t_end)
        traj = dyn.simulate(scn)
        value = mx.barbalat_integral(traj, scn.sets)
        expected = float(0.5 * (1.0 - np.exp(-2.0 * t_end)))
        err = abs(value - expected)
        return err <= 1e-4, {
            "integral": value,
            "expected": expected,
            "abs_error": err,
            "tolerance": 1e-4,
        }

    return _timed("eq39-analytic", run)


def eq39_family_check(n_seeds: int = 10, t_end: float = 40.0) -> CheckOutcome:
    """Symmetric-weight bidirectional scenarios: the accumulated squared set
    distances stay within N d(0)/2 (plus 5% quadrature slack)."""

    def run() -> tuple[bool, dict]:
        worst_ratio = 0.0
        for k in range(n_seeds):
            scn = sc.make_random_feasible(
                2 + k % 4, 2, seed=1000 + k, t_end=t_end, bidirectional=True
            )
            traj = dyn.simulate(scn)
            report = mx.barbalat_report(traj, scn.intersection_oracle())
            assert report.bound_guaranteed
            if report.bound > 0.0:
                worst_ratio = max(worst_ratio, report.value / report.bound)
        return worst_ratio <= 1.05, {
            "seeds": n_seeds,
            "worst_integral_to_bound_ratio": worst_ratio,
            "allowed_ratio": 1.05,
        }

    return _timed("eq39-family", run)


def delta_containment_check(artifacts=None, spacing: float = 5.0) -> CheckOutcome:
    """Hull containment along the reference directed run: later states stay
    within the earlier-state hulls, inflated by twice the distance to the
    intersection."""

    def run() -> tuple[bool, dict]:
        scn, traj, oracle, dist_x0 = artifacts or theorem31_artifacts()
        checks = list(np.arange(0.0, traj.times[-1] + 1e-9, spacing))
        excesses = mx.check_delta_containment(traj, oracle, checks, dist_x0=dist_x0)
        worst = max(e.excess for e in excesses)
        return worst <= 1e-4, {
            "pairs": len(excesses),
            "spacing": spacing,
            "worst_excess": worst,
            "tolerance": 1e-4,
        }

    return _timed("delta-containment", run)


def analytic_trajectory_check() -> CheckOutcome:
    def run() -> tuple[bool, dict]:
        traj = dyn.simulate(_analytic_single_agent(t_end=1.0))
        expected = np.array([1.0 + np.exp(-1.0), 0.0])
        err = float(np.linalg.norm(traj.states[-1, 0] - expected))
        return err <= 1e-6, {"state_error_at_t1": err, "tolerance": 1e-6}

    return _timed("analytic-trajectory", run)


def determinism_check() -> CheckOutcome:
    """Byte-identical trajectory CSVs across two runs of each suite scenario."""

    def run() -> tuple[bool, dict]:
        makers = {
            "ujsc": lambda: sc.make_reference_ujsc(4, 2, seed=7, t_end=20.0),
            "ijc": lambda: sc.make_reference_ijc(3, 2, seed=4, n_intervals=4),
            "counterexample": lambda: sc.make_counterexample(0, t_end=20.0),
            "random": lambda: sc.make_random_feasible(4, 2, seed=5, t_end=20.0),
        }
        mismatches = []
        for name, make in makers.items():
            blobs = []
            for _ in range(2):
                scn = make()
                traj = dyn.simulate(scn)
                oracle = scn.intersection_oracle()
                xi = mx.set_distances(traj, scn.sets)
                x0 = mx.x0_distances(traj, oracle)
                blobs.append(dyn.render_trajectory_csv(traj, xi, x0).encode())
            if blobs[0] != blobs[1]:
                mismatches.append(name)
        return not mismatches, {"scenarios": list(makers), "mismatches": mismatches}

    return _timed("determinism", run)


# ---------------------------------------------------------------------------
# Suite registry for the command-line driver
# ---------------------------------------------------------------------------


def _suite_projector_axioms() -> list[CheckOutcome]:
    return projector_axiom_checks() + [oracle_equivalence_check()]


def _suite_lemma41() -> list[CheckOutcome]:
    return [lemma41_sweep()]


def _suite_eq39() -> list[CheckOutcome]:
    return [eq39_analytic_check(), eq39_family_check()]


def _suite_delta_containment() -> list[CheckOutcome]:
    return [delta_containment_check()]


def _suite_theorem31() -> list[CheckOutcome]:
    return [theorem31_check()]


def _suite_theorem32() -> list[CheckOutcome]:
    return [theorem32_check()]


def _suite_counterexample() -> list[CheckOutcome]:
    return [counterexample_check(), analytic_trajectory_check()]


SUITES: dict[str, Callable[[], list[CheckOutcome]]] = {
    "projector-axioms": _suite_projector_axioms,
    "lemma41": _suite_lemma41,
    "eq39": _suite_eq39,
    "delta-containment": _suite_delta_containment,
    "theorem31": _suite_theorem31,
    "theorem32": _suite_theorem32,
    "counterexample": _suite_counterexample,
}


def run_suite(name: str) -> dict:
    """Run a named suite and return its scorecard dictionary."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    checks = SUITES[name]()
    return {
        "schema_version": SCORECARD_SCHEMA_VERSION,
        "suite": name,
        "pass": all(c.passed for c in checks),
        "checks": [c.to_json_dict() for c in checks],
    }
