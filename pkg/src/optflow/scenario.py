"""Experiment schema: scenario construction, validation of the standing
assumptions (dwell time, set validity, nonempty bounded intersection, weight
bounds, step-size guard), reference/counterexample/randomized generators,
and the TOML-based scenario file format.

Scenario files use sections [problem], [topology], [weights], [gains],
[initial], [integrator], [seed], [metadata]; unknown keys are rejected.
Serialization is canonical (fixed key order, shortest round-trip floats), so
equal scenarios produce byte-identical files and a stable hash.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import convexsets as cs
from . import dynamics as dyn
from . import topology as tp

__all__ = [
    "GenerationError",
    "Scenario",
    "ScenarioFormatError",
    "ValidationReport",
    "dump_scenario",
    "load_scenario",
    "make_counterexample",
    "make_random_feasible",
    "make_reference_ijc",
    "make_reference_ujsc",
    "scenario_hash",
    "scenario_to_toml",
    "validate_scenario",
]


class ScenarioFormatError(ValueError):
    """Scenario file is structurally malformed (bad or unknown field)."""


class GenerationError(RuntimeError):
    """Random scenario generation exhausted its retries."""


@dataclass(eq=False)
class Scenario:
    dimension: int
    agent_count: int
    sets: tuple[cs.ConvexSet, ...]
    topology: tp.TopologySpec
    weights: dyn.WeightSpec
    gains: dyn.ConstantGains
    initial: dyn.NetworkState
    integrator: dyn.IntegratorConfig
    seed: int = 0
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.sets) != self.agent_count:
            raise ScenarioFormatError("need exactly one set per agent")
        for s in self.sets:
            if s.dim != self.dimension:
                raise ScenarioFormatError("set dimension disagrees with problem")
        if self.initial.states.shape != (self.agent_count, self.dimension):
            raise ScenarioFormatError("initial states have the wrong shape")
        if len(self.gains.values) != self.agent_count:
            raise ScenarioFormatError("need one gain per agent")
        self._topo_cache: tp.SwitchingTopology | None = None

    def realized_topology(self) -> tp.SwitchingTopology:
        t_end = self.integrator.t_end
        if self._topo_cache is None or self._topo_cache.horizon != t_end:
            self._topo_cache = tp.realize(self.topology, horizon=t_end)
        return self._topo_cache

    def intersection_oracle(self) -> cs.IntersectionOracle:
        return cs.IntersectionOracle(members=self.sets)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    checks: dict[str, tuple[bool, str]]  # name -> (passed, detail)
    boundedness: str  # "verified" | "unverified -- user-asserted"
    a3_residual: float

    @property
    def all_passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    def failures(self) -> list[str]:
        return [f"{k}: {msg}" for k, (ok, msg) in self.checks.items() if not ok]

    def to_json_dict(self) -> dict:
        return {
            "pass": self.all_passed,
            "checks": {
                k: {"pass": ok, "detail": msg} for k, (ok, msg) in self.checks.items()
            },
            "boundedness": self.boundedness,
            "a3_residual": self.a3_residual,
        }


def _structurally_bounded(s: cs.ConvexSet) -> bool:
    if isinstance(s, (cs.Ball, cs.Box)):
        return True
    if isinstance(s, cs.Intersection):
        return any(_structurally_bounded(m) for m in s.members)
    return False


def validate_scenario(scn: Scenario) -> ValidationReport:
    """Check the standing assumptions; simulation requires all-pass.

    Feasibility of the intersection is probed numerically: Dykstra runs from
    five seeded start points and every candidate must sit within 1e-6 of all
    member sets.  Boundedness is checked structurally (some member must be a
    ball or a box, which forces a bounded intersection); other families are
    flagged unverified, not rejected.
    """
    checks: dict[str, tuple[bool, str]] = {}

    # A1: dwell time (realization enforces it; re-check and report).
    try:
        topo = scn.realized_topology()
        gaps = np.diff([t for t, _ in topo.pieces]) if len(topo.pieces) > 1 else []
        ok = all(g >= topo.dwell - 1e-12 for g in gaps)
        checks["A1_dwell"] = (ok, f"{len(topo.pieces)} pieces, dwell {topo.dwell}")
    except ValueError as exc:
        checks["A1_dwell"] = (False, str(exc))
        topo = None

    # A2: closed convex sets of the right dimension (constructors enforce
    # convexity/closedness; re-check dimensions).
    bad = [i for i, s in enumerate(scn.sets) if s.dim != scn.dimension]
    checks["A2_sets"] = (
        not bad,
        "all sets valid" if not bad else f"sets with wrong dimension: {bad}",
    )

    # A3: nonempty bounded intersection.
    oracle = scn.intersection_oracle()
    rng = np.random.default_rng(np.uint64(scn.seed) ^ np.uint64(0xA3A3A3A3))
    center = scn.initial.states.mean(axis=0)
    spread = 1.0 + float(np.max(np.linalg.norm(scn.initial.states - center, axis=1)))
    worst = 0.0
    for _ in range(5):
        start = center + rng.normal(size=scn.dimension) * spread
        try:
            _, residual = cs.feasibility_probe(oracle, start)
        except cs.OracleFailureError as exc:
            residual = exc.residual
        worst = max(worst, residual)
    feasible = worst < 1e-6
    if any(_structurally_bounded(s) for s in scn.sets):
        boundedness = "verified"
    else:
        boundedness = "unverified -- user-asserted"
    checks["A3_feasibility"] = (
        feasible,
        f"worst probe residual {worst:.3g}; boundedness {boundedness}",
    )

    # A4: uniform weight bounds.
    w = scn.weights
    if w.a_lo <= 0.0:
        checks["A4_weights"] = (False, f"a_lo must be > 0, got {w.a_lo}")
    elif w.a_hi < w.a_lo:
        checks["A4_weights"] = (False, "a_hi below a_lo")
    else:
        checks["A4_weights"] = (True, f"bounds [{w.a_lo}, {w.a_hi}]")

    # Step-size guard.
    lip = dyn.lipschitz_bound(scn)
    hL = scn.integrator.step * lip
    checks["step_guard"] = (
        hL <= dyn.STEP_GUARD + 1e-12,
        f"h*L = {hL:.4g} (L = {lip:.4g})",
    )

    return ValidationReport(checks=checks, boundedness=boundedness, a3_residual=worst)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def _circle_directions(n: int, m: int, phase: float) -> np.ndarray:
    """n unit vectors spread over the first two coordinates."""
    out = np.zeros((n, m))
    if m == 1:
        out[:, 0] = [1.0 if k % 2 == 0 else -1.0 for k in range(n)]
        return out
    angles = phase + 2.0 * np.pi * np.arange(n) / n
    out[:, 0] = np.cos(angles)
    out[:, 1] = np.sin(angles)
    return out


def make_reference_ujsc(
    n_agents: int,
    dim: int,
    seed: int,
    *,
    piece_length: float = 0.5,
    t_end: float = 200.0,
) -> Scenario:
    """Directed positive case: radius-2 balls centered on a unit circle (all
    containing the origin), a periodic cycle of single arcs tracing a ring
    (uniformly jointly strongly connected with window N * piece_length),
    constant unit weights, initial states on a radius-5 circle."""
    if n_agents < 2:
        raise ValueError("need at least two agents")
    rng = np.random.default_rng(seed)
    centers = _circle_directions(n_agents, dim, phase=float(rng.uniform(0, 2 * np.pi)))
    sets = tuple(cs.Ball(center=c, radius=2.0) for c in centers)
    graphs = tuple(
        tp.DigraphSnapshot(n=n_agents, arcs=frozenset({(k, (k + 1) % n_agents)}))
        for k in range(n_agents)
    )
    topo = tp.PeriodicCycle(graphs=graphs, piece_length=piece_length, dwell=0.5)
    ones = np.ones((n_agents, n_agents))
    weights = dyn.ConstantWeights(matrix=ones, a_lo=0.1, a_hi=1.0)
    initial = dyn.NetworkState(
        states=5.0 * _circle_directions(n_agents, dim, phase=float(rng.uniform(0, 2 * np.pi))),
        time=0.0,
    )
    return Scenario(
        dimension=dim,
        agent_count=n_agents,
        sets=sets,
        topology=topo,
        weights=weights,
        gains=dyn.ConstantGains(values=np.ones(n_agents)),
        initial=initial,
        integrator=dyn.IntegratorConfig(method="rk4", step=0.01, t_end=t_end),
        seed=seed,
        metadata={
            "label": "reference-ujsc",
            "suggested_ujsc_window": n_agents * piece_length,
        },
    )


def make_reference_ijc(
    n_agents: int,
    dim: int,
    seed: int,
    growth: float = 2.0,
    *,
    base: float = 2.0,
    n_intervals: int = 6,
) -> Scenario:
    """Bidirectional positive case with unbounded interval lengths.

    Star-tree edges are scheduled one per interval over lengths
    base * growth^k: jointly connected over every sweep of N-1 intervals but
    not uniformly jointly strongly connected for any window shorter than the
    last interval.  The hub agent watches a small ball and the leaves watch
    narrow strips through its center, so every pairwise merge lands next to
    the global intersection and consensus is reachable within few sweeps.
    """
    if n_agents < 2:
        raise ValueError("need at least two agents")
    if growth <= 1.0:
        raise ValueError("growth must exceed 1")
    rng = np.random.default_rng(seed)
    hub_radius = 1.5e-3
    strip_halfwidth = 1e-3
    dirs = _circle_directions(n_agents - 1, dim, phase=float(rng.uniform(0, np.pi)))
    sets: list[cs.ConvexSet] = [cs.Ball(center=np.zeros(dim), radius=hub_radius)]
    for k in range(n_agents - 1):
        n_vec = dirs[k]
        sets.append(
            cs.Polyhedron(
                halfspaces=(
                    cs.Halfspace(normal=n_vec, offset=strip_halfwidth),
                    cs.Halfspace(normal=-n_vec, offset=strip_halfwidth),
                )
            )
        )
    graphs = tuple(
        tp.DigraphSnapshot(
            n=n_agents, arcs=frozenset({(0, leaf), (leaf, 0)})
        )
        for leaf in range(1, n_agents)
    )
    topo = tp.GrowingIntervals(graphs=graphs, base=base, growth=growth, dwell=0.5)
    horizon = base * (growth**n_intervals - 1.0) / (growth - 1.0)
    ones = np.ones((n_agents, n_agents))
    initial = dyn.NetworkState(
        states=5.0 * _circle_directions(n_agents, dim, phase=float(rng.uniform(0, 2 * np.pi))),
        time=0.0,
    )
    return Scenario(
        dimension=dim,
        agent_count=n_agents,
        sets=tuple(sets),
        topology=topo,
        weights=dyn.ConstantWeights(matrix=ones, a_lo=0.1, a_hi=1.0),
        gains=dyn.ConstantGains(values=np.ones(n_agents)),
        initial=initial,
        integrator=dyn.IntegratorConfig(method="rk4", step=0.01, t_end=horizon),
        seed=seed,
        metadata={
            "label": "reference-ijc",
            "base_interval": base,
            "n_intervals": n_intervals,
        },
    )


def make_counterexample(seed: int = 0, *, t_end: float = 100.0) -> Scenario:
    """Sharpness instance: two agents sharing the unit ball (intersection not
    a singleton), no communication ever.  Decoupled flows settle at (1,0) and
    (-1,0); the diameter tends to 2 and consensus fails."""
    ball = cs.Ball(center=np.zeros(2), radius=1.0)
    empty = tp.DigraphSnapshot(n=2, arcs=frozenset())
    initial = dyn.NetworkState(states=np.array([[3.0, 0.0], [-3.0, 0.0]]), time=0.0)
    return Scenario(
        dimension=2,
        agent_count=2,
        sets=(ball, ball),
        topology=tp.StaticTopology(graph=empty, dwell=0.5),
        weights=dyn.ConstantWeights(matrix=np.ones((2, 2)), a_lo=0.1, a_hi=1.0),
        gains=dyn.ConstantGains(values=np.ones(2)),
        initial=initial,
        integrator=dyn.IntegratorConfig(method="rk4", step=0.01, t_end=t_end),
        seed=seed,
        metadata={"label": "counterexample-disconnected"},
    )


def make_random_feasible(
    n_agents: int,
    dim: int,
    seed: int,
    *,
    t_end: float = 50.0,
    bidirectional: bool = False,
) -> Scenario:
    """Randomized desk-scale scenario guaranteed feasible by construction:
    every set contains a common ball of radius 0.5 around a random anchor.
    State-dependent weights; random-dwell topology over a palette of four
    graphs.  Validated before return."""
    if n_agents > 10 or dim > 4:
        raise ValueError("desk scale only: N <= 10, m <= 4")
    last_failure = ""
    for attempt in range(5):
        rng = np.random.default_rng(np.uint64(seed) + np.uint64(attempt) * np.uint64(0x9E37))
        anchor = rng.uniform(-2.0, 2.0, size=dim)
        sets: list[cs.ConvexSet] = []
        for i in range(n_agents):
            kind = "ball" if i == 0 else rng.choice(["ball", "box", "halfspace"])
            if kind == "ball":
                off = rng.normal(size=dim)
                off *= rng.uniform(0.0, 2.0) / max(np.linalg.norm(off), 1e-12)
                sets.append(
                    cs.Ball(
                        center=anchor + off,
                        radius=float(np.linalg.norm(off)) + 0.5 + float(rng.uniform(0.0, 1.0)),
                    )
                )
            elif kind == "box":
                sets.append(
                    cs.Box(
                        lo=anchor - 0.5 - rng.uniform(0.0, 2.0, size=dim),
                        hi=anchor + 0.5 + rng.uniform(0.0, 2.0, size=dim),
                    )
                )
            else:
                n_vec = rng.normal(size=dim)
                n_vec /= max(np.linalg.norm(n_vec), 1e-12)
                sets.append(
                    cs.Halfspace(
                        normal=n_vec,
                        offset=float(n_vec @ anchor) + 0.5 + float(rng.uniform(0.0, 1.5)),
                    )
                )
        topo = tp.RandomDwell(
            n=n_agents,
            seed=int(rng.integers(0, 2**31)),
            arc_probability=0.5,
            palette_size=4,
            bidirectional=bidirectional,
            dwell=0.5,
        )
        initial = dyn.NetworkState(
            states=anchor + rng.normal(size=(n_agents, dim)) * 2.5, time=0.0
        )
        scn = Scenario(
            dimension=dim,
            agent_count=n_agents,
            sets=tuple(sets),
            topology=topo,
            weights=dyn.StateDependentWeights(a_lo=0.1, a_hi=0.4),
            gains=dyn.ConstantGains(values=np.ones(n_agents)),
            initial=initial,
            integrator=dyn.IntegratorConfig(method="rk4", step=0.01, t_end=t_end),
            seed=seed,
            metadata={
                "label": f"random-feasible-{seed}",
                "anchor": [float(v) for v in anchor],
            },
        )
        report = validate_scenario(scn)
        if report.all_passed:
            return scn
        last_failure = "; ".join(report.failures())
    raise GenerationError(
        f"could not generate a valid scenario from seed {seed}: {last_failure}"
    )


# ---------------------------------------------------------------------------
# TOML serialization
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    if isinstance(value, dict):
        inner = ", ".join(f"{k} = {_fmt(v)}" for k, v in value.items())
        return "{ " + inner + " }"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _set_to_dict(s: cs.ConvexSet) -> dict:
    if isinstance(s, cs.Ball):
        return {"kind": "ball", "center": list(s.center), "radius": s.radius}
    if isinstance(s, cs.Halfspace):
        return {"kind": "halfspace", "normal": list(s.normal), "offset": s.offset}
    if isinstance(s, cs.Box):
        return {"kind": "box", "lo": list(s.lo), "hi": list(s.hi)}
    if isinstance(s, cs.Affine):
        return {
            "kind": "affine",
            "anchor": list(s.anchor),
            "basis": [list(row) for row in s.basis],
        }
    if isinstance(s, cs.Polyhedron):
        return {
            "kind": "polyhedron",
            "members": [_set_to_dict(h) for h in s.halfspaces],
        }
    if isinstance(s, cs.Intersection):
        return {
            "kind": "intersection",
            "members": [_set_to_dict(m) for m in s.members],
        }
    raise TypeError(f"cannot serialize set {type(s).__name__}")


_SET_KEYS = {
    "ball": {"kind", "center", "radius"},
    "halfspace": {"kind", "normal", "offset"},
    "box": {"kind", "lo", "hi"},
    "affine": {"kind", "anchor", "basis"},
    "polyhedron": {"kind", "members"},
    "intersection": {"kind", "members"},
}


def _set_from_dict(d: dict, path: str) -> cs.ConvexSet:
    kind = d.get("kind")
    if kind not in _SET_KEYS:
        raise ScenarioFormatError(f"{path}: unknown set kind {kind!r}")
    _reject_unknown(d, _SET_KEYS[kind], path)
    if kind == "ball":
        return cs.Ball(center=np.array(d["center"], float), radius=float(d["radius"]))
    if kind == "halfspace":
        return cs.Halfspace(normal=np.array(d["normal"], float), offset=float(d["offset"]))
    if kind == "box":
        return cs.Box(lo=np.array(d["lo"], float), hi=np.array(d["hi"], float))
    if kind == "affine":
        return cs.Affine(anchor=np.array(d["anchor"], float), basis=np.array(d["basis"], float))
    members = tuple(
        _set_from_dict(m, f"{path}.members[{i}]") for i, m in enumerate(d["members"])
    )
    if kind == "polyhedron":
        return cs.Polyhedron(halfspaces=members)
    return cs.Intersection(members=members)


def _graph_to_arcs(g: tp.DigraphSnapshot) -> list[list[int]]:
    return [[j, i] for j, i in sorted(g.arcs)]


def _topology_to_dict(spec: tp.TopologySpec) -> dict:
    if isinstance(spec, tp.StaticTopology):
        return {"kind": "static", "dwell": spec.dwell, "arcs": _graph_to_arcs(spec.graph)}
    if isinstance(spec, tp.PeriodicCycle):
        return {
            "kind": "periodic_cycle",
            "dwell": spec.dwell,
            "piece_length": spec.piece_length,
            "graphs": [_graph_to_arcs(g) for g in spec.graphs],
        }
    if isinstance(spec, tp.GrowingIntervals):
        return {
            "kind": "growing_intervals",
            "dwell": spec.dwell,
            "base": spec.base,
            "growth": spec.growth,
            "graphs": [_graph_to_arcs(g) for g in spec.graphs],
        }
    if isinstance(spec, tp.Scripted):
        return {
            "kind": "scripted",
            "dwell": spec.dwell,
            "starts": list(spec.starts),
            "graphs": [_graph_to_arcs(g) for g in spec.graphs],
        }
    if isinstance(spec, tp.RandomDwell):
        return {
            "kind": "random_dwell",
            "dwell": spec.dwell,
            "seed": spec.seed,
            "arc_probability": spec.arc_probability,
            "palette_size": spec.palette_size,
            "min_length": spec.min_length,
            "max_length": spec.max_length,
            "bidirectional": spec.bidirectional,
        }
    raise TypeError(f"cannot serialize topology {type(spec).__name__}")


_TOPOLOGY_KEYS = {
    "static": {"kind", "dwell", "arcs"},
    "periodic_cycle": {"kind", "dwell", "piece_length", "graphs"},
    "growing_intervals": {"kind", "dwell", "base", "growth", "graphs"},
    "scripted": {"kind", "dwell", "starts", "graphs"},
    "random_dwell": {
        "kind", "dwell", "seed", "arc_probability", "palette_size",
        "min_length", "max_length", "bidirectional",
    },
}


def _arcs_to_graph(arcs, n: int) -> tp.DigraphSnapshot:
    return tp.DigraphSnapshot(n=n, arcs=frozenset((int(j), int(i)) for j, i in arcs))


def _topology_from_dict(d: dict, n: int, path: str) -> tp.TopologySpec:
    kind = d.get("kind")
    if kind not in _TOPOLOGY_KEYS:
        raise ScenarioFormatError(f"{path}: unknown topology kind {kind!r}")
    _reject_unknown(d, _TOPOLOGY_KEYS[kind], path)
    dwell = float(d.get("dwell", 0.5))
    if kind == "static":
        return tp.StaticTopology(graph=_arcs_to_graph(d["arcs"], n), dwell=dwell)
    if kind == "periodic_cycle":
        return tp.PeriodicCycle(
            graphs=tuple(_arcs_to_graph(a, n) for a in d["graphs"]),
            piece_length=float(d["piece_length"]),
            dwell=dwell,
        )
    if kind == "growing_intervals":
        return tp.GrowingIntervals(
            graphs=tuple(_arcs_to_graph(a, n) for a in d["graphs"]),
            base=float(d["base"]),
            growth=float(d["growth"]),
            dwell=dwell,
        )
    if kind == "scripted":
        return tp.Scripted(
            starts=tuple(float(t) for t in d["starts"]),
            graphs=tuple(_arcs_to_graph(a, n) for a in d["graphs"]),
            dwell=dwell,
        )
    return tp.RandomDwell(
        n=n,
        seed=int(d["seed"]),
        arc_probability=float(d["arc_probability"]),
        palette_size=int(d["palette_size"]),
        min_length=float(d["min_length"]),
        max_length=float(d["max_length"]),
        bidirectional=bool(d["bidirectional"]),
        dwell=dwell,
    )


def _weights_to_dict(spec: dyn.WeightSpec) -> dict:
    if isinstance(spec, dyn.ConstantWeights):
        return {
            "kind": "constant",
            "a_lo": spec.a_lo,
            "a_hi": spec.a_hi,
            "matrix": [list(row) for row in spec.matrix],
        }
    if isinstance(spec, dyn.TimeVaryingWeights):
        return {
            "kind": "time_varying",
            "a_lo": spec.a_lo,
            "a_hi": spec.a_hi,
            "offset": [list(r) for r in spec.offset],
            "amplitude": [list(r) for r in spec.amplitude],
            "omega": [list(r) for r in spec.omega],
            "phase": [list(r) for r in spec.phase],
        }
    if isinstance(spec, dyn.StateDependentWeights):
        return {"kind": "state_dependent", "a_lo": spec.a_lo, "a_hi": spec.a_hi}
    raise TypeError(f"cannot serialize weights {type(spec).__name__}")


_WEIGHT_KEYS = {
    "constant": {"kind", "a_lo", "a_hi", "matrix"},
    "time_varying": {"kind", "a_lo", "a_hi", "offset", "amplitude", "omega", "phase"},
    "state_dependent": {"kind", "a_lo", "a_hi"},
}


def _weights_from_dict(d: dict, path: str) -> dyn.WeightSpec:
    kind = d.get("kind")
    if kind not in _WEIGHT_KEYS:
        raise ScenarioFormatError(f"{path}: unknown weights kind {kind!r}")
    _reject_unknown(d, _WEIGHT_KEYS[kind], path)
    a_lo, a_hi = float(d["a_lo"]), float(d["a_hi"])
    if kind == "constant":
        return dyn.ConstantWeights(matrix=np.array(d["matrix"], float), a_lo=a_lo, a_hi=a_hi)
    if kind == "time_varying":
        return dyn.TimeVaryingWeights(
            offset=np.array(d["offset"], float),
            amplitude=np.array(d["amplitude"], float),
            omega=np.array(d["omega"], float),
            phase=np.array(d["phase"], float),
            a_lo=a_lo,
            a_hi=a_hi,
        )
    return dyn.StateDependentWeights(a_lo=a_lo, a_hi=a_hi)


def _reject_unknown(d: dict, allowed: set[str], path: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ScenarioFormatError(f"{path}: unknown key(s) {sorted(unknown)}")


def scenario_to_toml(scn: Scenario) -> str:
    lines = ["[problem]"]
    lines.append(f"dimension = {scn.dimension}")
    lines.append(f"agents = {scn.agent_count}")
    lines.append("sets = [")
    for s in scn.sets:
        lines.append(f"    {_fmt(_set_to_dict(s))},")
    lines.append("]")
    lines.append("")
    lines.append("[topology]")
    for k, v in _topology_to_dict(scn.topology).items():
        lines.append(f"{k} = {_fmt(v)}")
    lines.append("")
    lines.append("[weights]")
    for k, v in _weights_to_dict(scn.weights).items():
        lines.append(f"{k} = {_fmt(v)}")
    lines.append("")
    lines.append("[gains]")
    lines.append(f"values = {_fmt(list(scn.gains.values))}")
    lines.append("")
    lines.append("[initial]")
    lines.append(f"states = {_fmt([list(row) for row in scn.initial.states])}")
    lines.append("")
    lines.append("[integrator]")
    lines.append(f'method = "{scn.integrator.method}"')
    lines.append(f"step = {_fmt(scn.integrator.step)}")
    lines.append(f"t_end = {_fmt(scn.integrator.t_end)}")
    lines.append("")
    lines.append("[seed]")
    lines.append(f"value = {scn.seed}")
    if scn.metadata:
        lines.append("")
        lines.append("[metadata]")
        for k in sorted(scn.metadata):
            lines.append(f"{k} = {_fmt(scn.metadata[k])}")
    return "\n".join(lines) + "\n"


_TOP_KEYS = {
    "problem", "topology", "weights", "gains", "initial", "integrator",
    "seed", "metadata",
}


def scenario_from_toml(text: str) -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioFormatError(f"not valid TOML: {exc}") from exc
    _reject_unknown(data, _TOP_KEYS, "top level")
    for section in ("problem", "topology", "weights", "gains", "initial", "integrator", "seed"):
        if section not in data:
            raise ScenarioFormatError(f"missing section [{section}]")

    prob = data["problem"]
    _reject_unknown(prob, {"dimension", "agents", "sets"}, "problem")
    dim = int(prob["dimension"])
    n = int(prob["agents"])
    sets = tuple(
        _set_from_dict(s, f"problem.sets[{i}]") for i, s in enumerate(prob["sets"])
    )

    topo = _topology_from_dict(data["topology"], n, "topology")
    weights = _weights_from_dict(data["weights"], "weights")

    _reject_unknown(data["gains"], {"values"}, "gains")
    gains = dyn.ConstantGains(values=np.array(data["gains"]["values"], float))

    _reject_unknown(data["initial"], {"states"}, "initial")
    initial = dyn.NetworkState(states=np.array(data["initial"]["states"], float), time=0.0)

    integ = data["integrator"]
    _reject_unknown(integ, {"method", "step", "t_end"}, "integrator")
    integrator = dyn.IntegratorConfig(
        method=str(integ["method"]), step=float(integ["step"]), t_end=float(integ["t_end"])
    )

    _reject_unknown(data["seed"], {"value"}, "seed")
    metadata = dict(data.get("metadata", {}))

    try:
        return Scenario(
            dimension=dim,
            agent_count=n,
            sets=sets,
            topology=topo,
            weights=weights,
            gains=gains,
            initial=initial,
            integrator=integrator,
            seed=int(data["seed"]["value"]),
            metadata=metadata,
        )
    except (ValueError, TypeError) as exc:
        raise ScenarioFormatError(str(exc)) from exc


def dump_scenario(scn: Scenario, path) -> None:
    with open(path, "w") as fh:
        fh.write(scenario_to_toml(scn))


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_toml(fh.read())


def scenario_hash(scn: Scenario) -> str:
    """Platform-stable content hash of the canonical serialization."""
    return hashlib.sha256(scenario_to_toml(scn).encode()).hexdigest()
