"""The closed-loop consensus+projection flow and its fixed-step integrator.

Each agent follows

    dx_i/dt = sum_{j in N_i(t)} a_ij(x, t) (x_j - x_i) + b_i (P_i(x_i) - x_i)

with arc weights clamped into [a_lo, a_hi] and per-agent projection gains
b_i >= b_* > 0.  Integration is fixed-step (RK4 by default) and never steps
across a topology switch: the field is discontinuous in t there, so steps
shorten to land exactly on switch instants, then resume at the nominal step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .convexsets import SetFamily
from .topology import snapshot_at

if TYPE_CHECKING:  # pragma: no cover
    from .scenario import Scenario

__all__ = [
    "ConfigurationError",
    "ConstantGains",
    "ConstantWeights",
    "IntegratorConfig",
    "InvariantViolationError",
    "NetworkState",
    "StateDependentWeights",
    "TimeVaryingWeights",
    "Trajectory",
    "evaluate_weights",
    "lipschitz_bound",
    "render_trajectory_csv",
    "simulate",
    "vector_field",
    "weights_are_symmetric",
]

STEP_GUARD = 0.1  # refuse h * lipschitz_bound above this


class ConfigurationError(ValueError):
    """Scenario configuration violates an integrator guard."""


class InvariantViolationError(RuntimeError):
    """A runtime invariant monitor fired during simulation."""


@dataclass(eq=False)
class NetworkState:
    """Stacked agent states (N, m) at a time instant."""

    states: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.states, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"states must be (N, m), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("states contain non-finite entries")
        self.states = arr
        self.time = float(self.time)

    @property
    def n_agents(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]


# ---------------------------------------------------------------------------
# Weights and gains
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConstantWeights:
    matrix: np.ndarray
    a_lo: float = 0.1
    a_hi: float = 2.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("weight matrix must be square")
        off = ~np.eye(m.shape[0], dtype=bool)
        if np.any(m[off] < self.a_lo - 1e-12) or np.any(m[off] > self.a_hi + 1e-12):
            raise ValueError("constant weights must lie within [a_lo, a_hi]")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True, eq=False)
class TimeVaryingWeights:
    """Per-arc bounded oscillation a_ij(t) = offset + amplitude*sin(omega t + phase)."""

    offset: np.ndarray
    amplitude: np.ndarray
    omega: np.ndarray
    phase: np.ndarray
    a_lo: float = 0.1
    a_hi: float = 2.0

    def __post_init__(self):
        arrs = {}
        for name in ("offset", "amplitude", "omega", "phase"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ValueError(f"{name} must be a square matrix")
            a.flags.writeable = False
            arrs[name] = a
        off = ~np.eye(arrs["offset"].shape[0], dtype=bool)
        lo = arrs["offset"] - np.abs(arrs["amplitude"])
        hi = arrs["offset"] + np.abs(arrs["amplitude"])
        if np.any(lo[off] < self.a_lo - 1e-12) or np.any(hi[off] > self.a_hi + 1e-12):
            raise ValueError("oscillation range must stay within [a_lo, a_hi]")
        for name, a in arrs.items():
            object.__setattr__(self, name, a)


@dataclass(frozen=True)
class StateDependentWeights:
    """a_ij = clamp(1 / (1 + |x_i - x_j|), a_lo, a_hi); clamping enforces the
    uniform weight bounds by construction."""

    a_lo: float = 0.1
    a_hi: float = 2.0


WeightSpec = ConstantWeights | TimeVaryingWeights | StateDependentWeights


def evaluate_weights(spec: WeightSpec, x: np.ndarray, t: float) -> np.ndarray:
    """Full (N, N) weight matrix at (x, t), clamped into [a_lo, a_hi]."""
    if isinstance(spec, ConstantWeights):
        w = spec.matrix
    elif isinstance(spec, TimeVaryingWeights):
        w = spec.offset + spec.amplitude * np.sin(spec.omega * t + spec.phase)
    elif isinstance(spec, StateDependentWeights):
        diff = x[:, None, :] - x[None, :, :]
        w = 1.0 / (1.0 + np.linalg.norm(diff, axis=-1))
    else:
        raise TypeError(f"unknown weight spec {type(spec).__name__}")
    return np.clip(w, spec.a_lo, spec.a_hi)


def weights_are_symmetric(spec: WeightSpec) -> bool:
    if isinstance(spec, ConstantWeights):
        return bool(np.allclose(spec.matrix, spec.matrix.T))
    if isinstance(spec, TimeVaryingWeights):
        return all(
            np.allclose(a, a.T)
            for a in (spec.offset, spec.amplitude, spec.omega, spec.phase)
        )
    return True  # state-dependent weights depend on |x_i - x_j| only


@dataclass(frozen=True, eq=False)
class ConstantGains:
    """Per-agent projection gains, bounded below by a positive floor."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("gains must be a vector")
        if np.any(v <= 0.0):
            raise ValueError("projection gains must be strictly positive")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def floor(self) -> float:
        return float(self.values.min())


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"
    step: float = 0.01
    t_end: float = 50.0

    def __post_init__(self):
        if self.method not in ("rk4", "euler"):
            raise ValueError("method must be 'rk4' or 'euler'")
        if not self.step > 0.0:
            raise ValueError("step must be positive")
        if not self.t_end > 0.0:
            raise ValueError("t_end must be positive")


def lipschitz_bound(scenario: "Scenario") -> float:
    """Upper bound on the field's global Lipschitz constant:
    2 (N-1) a_hi for the consensus part plus 2 max b_i for the projection
    part (the residual x - P(x) is 2-Lipschitz by non-expansiveness)."""
    n = scenario.agent_count
    a_hi = scenario.weights.a_hi if n > 1 else 0.0
    return 2.0 * (n - 1) * a_hi + 2.0 * float(scenario.gains.values.max())


# ---------------------------------------------------------------------------
# Vector field and trajectory
# ---------------------------------------------------------------------------


def _adjacency(graph, n: int) -> np.ndarray:
    # M[i, j] = 1 iff (j, i) is an arc: j's state is visible to i.
    M = np.zeros((n, n))
    for j, i in graph.arcs:
        M[i, j] = 1.0
    return M


def vector_field(
    scenario: "Scenario",
    t: float,
    states: np.ndarray,
    *,
    adjacency: np.ndarray | None = None,
    family: SetFamily | None = None,
) -> np.ndarray:
    """Right-hand side of the flow at (t, states); states is (N, m)."""
    x = np.asarray(states, dtype=float)
    n = scenario.agent_count
    if x.shape != (n, scenario.dimension):
        raise ValueError(f"states must be ({n}, {scenario.dimension})")
    if adjacency is None:
        topo = scenario.realized_topology()
        adjacency = _adjacency(snapshot_at(topo, t), n)
    if family is None:
        family = SetFamily(scenario.sets)
    w = evaluate_weights(scenario.weights, x, t) * adjacency
    consensus = w @ x - w.sum(axis=1, keepdims=True) * x
    gains = scenario.gains.values[:, None]
    return consensus + gains * (family.project(x) - x)


@dataclass(eq=False)
class Trajectory:
    """Sampled solution: one row per accepted integration step."""

    times: np.ndarray
    states: np.ndarray  # (S, N, m)
    piece_index: np.ndarray  # active topology piece per sample
    scenario: "Scenario"
    weight_range: tuple[float, float]  # min/max arc weight actually evaluated

    @property
    def n_samples(self) -> int:
        return self.times.shape[0]

    def state_at(self, t: float) -> np.ndarray:
        """State at the sample closest to t."""
        idx = int(np.argmin(np.abs(self.times - t)))
        return self.states[idx]

    def index_at(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))


def simulate(scenario: "Scenario") -> Trajectory:
    """Integrate the flow over [0, t_end].

    The caller is expected to have validated the scenario; this function
    re-checks only the integrator guards (step size, dimensions) and aborts
    with a diagnostic if the state leaves the finite range.
    """
    cfg = scenario.integrator
    lip = lipschitz_bound(scenario)
    if cfg.step * lip > STEP_GUARD + 1e-12:
        raise ConfigurationError(
            f"step {cfg.step} times Lipschitz bound {lip:.3g} exceeds "
            f"{STEP_GUARD}; refuse to integrate"
        )
    topo = scenario.realized_topology()
    if cfg.t_end > topo.horizon + 1e-9:
        raise ConfigurationError("t_end exceeds the topology horizon")

    n, m = scenario.agent_count, scenario.dimension
    family = SetFamily(scenario.sets)
    gains = scenario.gains.values[:, None]
    weights_spec = scenario.weights
    adjacencies = [_adjacency(g, n) for _, g in topo.pieces]
    switch_times = topo.switch_times

    x = scenario.initial.states.copy()
    if x.shape != (n, m):
        raise ConfigurationError(f"initial states must be ({n}, {m})")

    h = cfg.step
    t = 0.0
    piece = 0
    times = [0.0]
    states = [x.copy()]
    pieces_log = [0]
    w_lo, w_hi = np.inf, -np.inf

    def field(s: float, y: np.ndarray, adj: np.ndarray) -> np.ndarray:
        w = evaluate_weights(weights_spec, y, s) * adj
        return (w @ y - w.sum(axis=1, keepdims=True) * y) + gains * (
            family.project(y) - y
        )

    snap = 1e-9
    while t < cfg.t_end - snap:
        next_switch = switch_times[piece] if piece < len(switch_times) else np.inf
        t_next = min(t + h, next_switch, cfg.t_end)
        if next_switch - t_next < snap:
            t_next = next_switch
        if cfg.t_end - t_next < snap:
            t_next = cfg.t_end
        dt = t_next - t
        adj = adjacencies[piece]

        if np.any(adj):
            w_obs = evaluate_weights(weights_spec, x, t)[adj > 0]
            w_lo = min(w_lo, float(w_obs.min()))
            w_hi = max(w_hi, float(w_obs.max()))

        if cfg.method == "euler":
            x = x + dt * field(t, x, adj)
        else:
            k1 = field(t, x, adj)
            k2 = field(t + dt / 2.0, x + (dt / 2.0) * k1, adj)
            k3 = field(t + dt / 2.0, x + (dt / 2.0) * k2, adj)
            k4 = field(t + dt, x + dt * k3, adj)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        if not np.all(np.isfinite(x)):
            raise InvariantViolationError(
                f"non-finite state at t={t_next:.6f}; aborting"
            )
        t = t_next
        if piece < len(switch_times) and t >= switch_times[piece] - snap:
            piece += 1
        times.append(t)
        states.append(x.copy())
        pieces_log.append(piece)

    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        piece_index=np.array(pieces_log, dtype=int),
        scenario=scenario,
        weight_range=(w_lo, w_hi) if w_lo <= w_hi else (np.nan, np.nan),
    )


def render_trajectory_csv(
    traj: Trajectory, dist_xi: np.ndarray, dist_x0: np.ndarray
) -> str:
    """One row per (sample, agent): t,agent,c0..c{m-1},dist_Xi,dist_X0.

    Times use fixed 9-decimal format and coordinates use shortest-round-trip
    floats, so identical runs produce byte-identical files.
    """
    s, n, m = traj.states.shape
    header = "t,agent," + ",".join(f"c{j}" for j in range(m)) + ",dist_Xi,dist_X0"
    lines = [header]
    for k in range(s):
        tstr = f"{traj.times[k]:.9f}"
        for i in range(n):
            coords = ",".join(repr(float(v)) for v in traj.states[k, i])
            lines.append(
                f"{tstr},{i},{coords},{float(dist_xi[k, i])!r},{float(dist_x0[k, i])!r}"
            )
    return "\n".join(lines) + "\n"
