"""Time-varying communication graphs: switching signals with dwell time,
joint graphs over intervals, and finite-horizon certification of the two
connectivity conditions (uniform joint strong connectivity for directed
signals, infinite joint connectivity for bidirectional ones).

Convention: an arc (j, i) leaves j and enters i, so j is a neighbor of i.
The switching signal is right-continuous at switch instants; any convention
works (switch points have measure zero) but one must be fixed for
determinism.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

Arc = tuple[int, int]

__all__ = [
    "CertificationReport",
    "DigraphSnapshot",
    "GrowingIntervals",
    "PeriodicCycle",
    "RandomDwell",
    "Scripted",
    "StaticTopology",
    "SwitchingTopology",
    "certify_ijc",
    "certify_ujsc",
    "is_connected_bidirectional",
    "is_strongly_connected",
    "joint_graph",
    "neighbors",
    "realize",
    "snapshot_at",
]


@dataclass(frozen=True)
class DigraphSnapshot:
    """A digraph on nodes {0..n-1} with an ordered arc set, no self-loops."""

    n: int
    arcs: frozenset[Arc] = frozenset()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one node")
        arcs = frozenset((int(j), int(i)) for j, i in self.arcs)
        for j, i in arcs:
            if j == i:
                raise ValueError(f"self-loop ({j},{i}) not allowed")
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise ValueError(f"arc ({j},{i}) out of range for n={self.n}")
        object.__setattr__(self, "arcs", arcs)

    def is_bidirectional(self) -> bool:
        return all((i, j) in self.arcs for j, i in self.arcs)


def neighbors(g: DigraphSnapshot, i: int) -> set[int]:
    """Nodes j with an arc (j, i), i.e. whose state node i can read."""
    if not 0 <= i < g.n:
        raise ValueError(f"node {i} out of range")
    return {j for j, k in g.arcs if k == i}


def _reachable(g: DigraphSnapshot, start: int, reverse: bool = False) -> set[int]:
    adj: dict[int, list[int]] = {v: [] for v in range(g.n)}
    for j, i in g.arcs:
        if reverse:
            adj[i].append(j)
        else:
            adj[j].append(i)
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def is_strongly_connected(g: DigraphSnapshot) -> bool:
    """Every ordered node pair is joined by a directed path."""
    if g.n == 1:
        return True
    return (
        len(_reachable(g, 0)) == g.n and len(_reachable(g, 0, reverse=True)) == g.n
    )


def is_connected_bidirectional(g: DigraphSnapshot) -> bool:
    """Connectivity of the underlying undirected graph; requires a symmetric
    arc set."""
    if not g.is_bidirectional():
        raise ValueError("graph is not bidirectional (arc set not symmetric)")
    if g.n == 1:
        return True
    if not g.arcs:
        return False
    return len(_reachable(g, 0)) == g.n


@dataclass(frozen=True)
class SwitchingTopology:
    """Piecewise-constant graph signal: pieces (start_time, graph), strictly
    increasing starts beginning at 0, consecutive gaps >= dwell."""

    pieces: tuple[tuple[float, DigraphSnapshot], ...]
    dwell: float
    horizon: float

    def __post_init__(self):
        pieces = tuple((float(t), g) for t, g in self.pieces)
        if not pieces:
            raise ValueError("need at least one piece")
        if pieces[0][0] != 0.0:
            raise ValueError("first piece must start at time 0")
        if not self.dwell > 0.0:
            raise ValueError("dwell time must be positive")
        starts = [t for t, _ in pieces]
        for a, b in zip(starts, starts[1:]):
            if b - a < self.dwell - 1e-12:
                raise ValueError(
                    f"switch gap {b - a:.6g} violates dwell time {self.dwell:.6g}"
                )
        if self.horizon < starts[-1]:
            raise ValueError("horizon must cover the last piece start")
        n = pieces[0][1].n
        for _, g in pieces:
            if g.n != n:
                raise ValueError("all pieces must share the node count")
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "dwell", float(self.dwell))

    @property
    def n(self) -> int:
        return self.pieces[0][1].n

    @property
    def switch_times(self) -> list[float]:
        return [t for t, _ in self.pieces[1:]]

    def is_bidirectional(self) -> bool:
        return all(g.is_bidirectional() for _, g in self.pieces)


def snapshot_at(topo: SwitchingTopology, t: float) -> DigraphSnapshot:
    """Graph active at time t (right-continuous at switch instants)."""
    if not 0.0 <= t <= topo.horizon:
        raise ValueError(f"t={t} outside [0, {topo.horizon}]")
    starts = [s for s, _ in topo.pieces]
    idx = int(np.searchsorted(starts, t, side="right")) - 1
    return topo.pieces[idx][1]


def joint_graph(topo: SwitchingTopology, t1: float, t2: float) -> DigraphSnapshot:
    """Union of the arc sets of all pieces intersecting [t1, t2)."""
    if not (0.0 <= t1 < t2 <= topo.horizon + 1e-12):
        raise ValueError(f"invalid interval [{t1}, {t2})")
    arcs: set[Arc] = set()
    starts = [s for s, _ in topo.pieces]
    for k, (s, g) in enumerate(topo.pieces):
        end = starts[k + 1] if k + 1 < len(topo.pieces) else np.inf
        if s < t2 and end > t1:
            arcs |= g.arcs
    return DigraphSnapshot(n=topo.n, arcs=frozenset(arcs))


# ---------------------------------------------------------------------------
# Topology specifications (realized into SwitchingTopology signals)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StaticTopology:
    graph: DigraphSnapshot
    dwell: float = 0.5


@dataclass(frozen=True)
class PeriodicCycle:
    graphs: tuple[DigraphSnapshot, ...]
    piece_length: float
    dwell: float = 0.5

    def __post_init__(self):
        if self.piece_length < self.dwell:
            raise ValueError("piece length must be >= dwell time")


@dataclass(frozen=True)
class GrowingIntervals:
    """Piece k has length base * growth**k; graphs cycle one per piece.
    Realizes signals that are infinitely jointly connected without any
    uniform window."""

    graphs: tuple[DigraphSnapshot, ...]
    base: float
    growth: float
    dwell: float = 0.5

    def __post_init__(self):
        if self.base < self.dwell:
            raise ValueError("base length must be >= dwell time")
        if self.growth <= 1.0:
            raise ValueError("growth must exceed 1")


@dataclass(frozen=True)
class Scripted:
    starts: tuple[float, ...]
    graphs: tuple[DigraphSnapshot, ...]
    dwell: float = 0.5

    def __post_init__(self):
        if len(self.starts) != len(self.graphs):
            raise ValueError("starts and graphs must have equal length")


@dataclass(frozen=True)
class RandomDwell:
    """Random signal over a finite pre-drawn palette of graphs (the set of
    possible graphs must be finite), with piece lengths bounded below by the
    dwell time."""

    n: int
    seed: int
    arc_probability: float = 0.5
    palette_size: int = 4
    min_length: float = 0.5
    max_length: float = 1.25
    bidirectional: bool = False
    dwell: float = 0.5

    def __post_init__(self):
        if self.min_length < self.dwell:
            raise ValueError("min piece length must be >= dwell time")
        if self.max_length < self.min_length:
            raise ValueError("max piece length must be >= min length")

    def palette(self) -> list[DigraphSnapshot]:
        rng = np.random.default_rng(self.seed)
        graphs = []
        for _ in range(self.palette_size):
            arcs = set()
            for j in range(self.n):
                for i in range(self.n):
                    if j != i and rng.uniform() < self.arc_probability:
                        arcs.add((j, i))
            if self.bidirectional:
                arcs |= {(i, j) for j, i in arcs}
            graphs.append(DigraphSnapshot(n=self.n, arcs=frozenset(arcs)))
        return graphs


TopologySpec = (
    StaticTopology | PeriodicCycle | GrowingIntervals | Scripted | RandomDwell
)


def realize(spec: TopologySpec, horizon: float) -> SwitchingTopology:
    """Expand a specification into a concrete signal covering [0, horizon]."""
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if isinstance(spec, StaticTopology):
        pieces = [(0.0, spec.graph)]
    elif isinstance(spec, PeriodicCycle):
        pieces = []
        t, k = 0.0, 0
        while t < horizon:
            pieces.append((t, spec.graphs[k % len(spec.graphs)]))
            t += spec.piece_length
            k += 1
    elif isinstance(spec, GrowingIntervals):
        pieces = []
        t, k = 0.0, 0
        while t < horizon:
            pieces.append((t, spec.graphs[k % len(spec.graphs)]))
            t += spec.base * spec.growth**k
            k += 1
    elif isinstance(spec, Scripted):
        if spec.starts and max(spec.starts) > horizon:
            raise ValueError("scripted pieces extend past the horizon")
        pieces = list(zip(spec.starts, spec.graphs))
    elif isinstance(spec, RandomDwell):
        palette = spec.palette()
        rng = np.random.default_rng(spec.seed + 0x9E3779B9)
        pieces = []
        t = 0.0
        while t < horizon:
            g = palette[int(rng.integers(0, len(palette)))]
            pieces.append((t, g))
            t += float(rng.uniform(spec.min_length, spec.max_length))
    else:
        raise TypeError(f"unknown topology spec {type(spec).__name__}")
    return SwitchingTopology(pieces=tuple(pieces), dwell=spec.dwell, horizon=horizon)


# ---------------------------------------------------------------------------
# Connectivity certification
# ---------------------------------------------------------------------------


@dataclass
class CertificationReport:
    condition: str  # "ujsc" or "ijc"
    passed: bool
    window_or_partition: float | list[tuple[float, float]] | None
    first_failure: float | None
    horizon: float
    note: str = ""

    def to_json_dict(self) -> dict:
        wop = self.window_or_partition
        if isinstance(wop, list):
            wop = [[a, b] for a, b in wop]
        return {
            "condition": self.condition,
            "pass": self.passed,
            "window_or_partition": wop,
            "first_failure": self.first_failure,
            "horizon": self.horizon,
            "note": self.note,
        }


def certify_ujsc(topo: SwitchingTopology, window: float) -> CertificationReport:
    """Check that every length-`window` joint graph is strongly connected.

    Window starts are scanned on the grid of piece start times and their
    left-shifts by the window; the joint graph is piecewise constant in the
    window start between those points, so the grid is exhaustive.
    """
    if not 0.0 < window <= topo.horizon:
        raise ValueError(f"window must lie in (0, horizon={topo.horizon}]")
    starts = [s for s, _ in topo.pieces]
    grid = {0.0, topo.horizon - window}
    for s in starts:
        if 0.0 <= s <= topo.horizon - window:
            grid.add(s)
        if 0.0 <= s - window <= topo.horizon - window:
            grid.add(s - window)
    for t in sorted(grid):
        if not is_strongly_connected(joint_graph(topo, t, t + window)):
            return CertificationReport(
                condition="ujsc",
                passed=False,
                window_or_partition=window,
                first_failure=t,
                horizon=topo.horizon,
                note="joint graph over the failing window is not strongly connected",
            )
    return CertificationReport(
        condition="ujsc",
        passed=True,
        window_or_partition=window,
        first_failure=None,
        horizon=topo.horizon,
        note=(
            "window starts scanned at piece boundaries and their window "
            "shifts; joint graphs are piecewise constant between them"
        ),
    )


def certify_ijc(topo: SwitchingTopology) -> CertificationReport:
    """Greedy earliest-completion partition of [0, horizon] into intervals
    with connected joint graphs.

    Finite-horizon caveat: this certifies joint connectivity over the given
    horizon only; the trailing incomplete interval is reported but does not
    count against the certificate.
    """
    for s, g in topo.pieces:
        if not g.is_bidirectional():
            raise ValueError(f"piece at t={s} is not bidirectional")
    starts = [s for s, _ in topo.pieces] + [topo.horizon]
    partition: list[tuple[float, float]] = []
    seg_start = 0.0
    arcs: set[Arc] = set()
    for k, (_, g) in enumerate(topo.pieces):
        arcs |= g.arcs
        seg_end = starts[k + 1]
        candidate = DigraphSnapshot(n=topo.n, arcs=frozenset(arcs))
        if is_connected_bidirectional(candidate):
            partition.append((seg_start, seg_end))
            seg_start = seg_end
            arcs = set()
    passed = len(partition) > 0
    return CertificationReport(
        condition="ijc",
        passed=passed,
        window_or_partition=partition if passed else None,
        first_failure=None if passed else seg_start,
        horizon=topo.horizon,
        note=(
            "greedy earliest-completion partition; certificate covers "
            f"[0, {topo.horizon}] only"
            + ("" if seg_start >= topo.horizon else
               f"; trailing interval [{seg_start}, {topo.horizon}] incomplete")
        ),
    )
