"""Closed convex sets with exact projectors, an intersection oracle, and
convex-hull utilities.

All projectors accept arrays of shape ``(..., m)`` and act on the last axis,
so whole trajectories can be projected in one call.  Every operation here is
a pure function of its inputs; randomness enters only through explicit
generator arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MEMBERSHIP_TOL = 1e-9  # x counts as "in the set" iff distance(set, x) <= this

__all__ = [
    "Affine",
    "Ball",
    "Box",
    "ConvexSet",
    "DimensionMismatchError",
    "Halfspace",
    "Intersection",
    "IntersectionOracle",
    "MEMBERSHIP_TOL",
    "MultiProjectionWord",
    "OracleFailureError",
    "Polyhedron",
    "SetFamily",
    "apply_word",
    "as_point",
    "contains",
    "distance",
    "dykstra_project",
    "feasibility_probe",
    "hull_distance",
    "min_norm_point",
    "project",
    "sample_delta_point",
    "sqdist_gradient",
]


class DimensionMismatchError(ValueError):
    """Input point dimension does not match the set dimension."""


class OracleFailureError(RuntimeError):
    """Iterative projection failed to converge within its budget."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Validate and convert `x` to a finite 1-D float vector."""
    p = np.asarray(x, dtype=float)
    if p.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-D point, got shape {p.shape}")
    if dim is not None and p.shape[0] != dim:
        raise DimensionMismatchError(f"expected dimension {dim}, got {p.shape[0]}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite entries")
    return p


def _as_batch(x, dim: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0 or pts.shape[-1] != dim:
        raise DimensionMismatchError(
            f"expected last axis of size {dim}, got shape {pts.shape}"
        )
    return pts


class ConvexSet:
    """Base class: a nonempty closed convex subset of R^m."""

    dim: int

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # Feasibility-polish hooks.  `_feas_terms` returns the (value, gradient,
    # Hessian) contribution of squared distance-to-violation at y;
    # `_boundary_residuals` yields signed values and gradients of constraints
    # near-active at y (negative inside); `_normals` returns outward unit
    # normals of constraints active at y.
    def _feas_terms(self, y: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _boundary_residuals(
        self, y: np.ndarray, act_tol: float
    ) -> list[tuple[float, np.ndarray]]:
        raise NotImplementedError

    def _normals(self, y: np.ndarray, tol: float) -> list[np.ndarray]:
        raise NotImplementedError

    def _primitives(self) -> list["ConvexSet"]:
        return [self]


@dataclass(frozen=True, eq=False)
class Halfspace(ConvexSet):
    """{x : <normal, x> <= offset}."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = as_point(self.normal)
        if np.linalg.norm(n) == 0.0:
            raise ValueError("halfspace normal must be nonzero")
        n.flags.writeable = False
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "dim", n.shape[0])

    def project(self, x):
        pts = _as_batch(x, self.dim)
        a = self.normal
        viol = np.maximum(pts @ a - self.offset, 0.0) / (a @ a)
        return pts - viol[..., None] * a

    def _feas_terms(self, y):
        a = self.normal
        na = np.linalg.norm(a)
        s = (y @ a - self.offset) / na
        m = self.dim
        if s <= 0.0:
            return 0.0, np.zeros(m), np.zeros((m, m))
        u = a / na
        return s * s, 2.0 * s * u, 2.0 * np.outer(u, u)

    def _normals(self, y, tol):
        a = self.normal
        na = np.linalg.norm(a)
        if (y @ a - self.offset) / na >= -tol:
            return [a / na]
        return []

    def _boundary_residuals(self, y, act_tol):
        a = self.normal
        na = np.linalg.norm(a)
        s = (y @ a - self.offset) / na
        return [(s, a / na)] if s >= -act_tol else []


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    """Euclidean ball of given center and radius > 0."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = as_point(self.center)
        if not self.radius > 0.0:
            raise ValueError("ball radius must be positive")
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "dim", c.shape[0])

    def project(self, x):
        pts = _as_batch(x, self.dim)
        d = pts - self.center
        n = np.linalg.norm(d, axis=-1, keepdims=True)
        scale = np.where(n > self.radius, self.radius / np.maximum(n, 1e-300), 1.0)
        return self.center + d * scale

    def _feas_terms(self, y):
        m = self.dim
        d = y - self.center
        n = np.linalg.norm(d)
        if n <= self.radius:
            return 0.0, np.zeros(m), np.zeros((m, m))
        u = d / n
        s = n - self.radius
        hess = 2.0 * np.outer(u, u) + 2.0 * s * (np.eye(m) - np.outer(u, u)) / n
        return s * s, 2.0 * s * u, hess

    def _normals(self, y, tol):
        d = y - self.center
        n = np.linalg.norm(d)
        if n >= self.radius - tol and n > 0.0:
            return [d / n]
        return []

    def _boundary_residuals(self, y, act_tol):
        d = y - self.center
        n = np.linalg.norm(d)
        if n >= self.radius - act_tol and n > 0.0:
            return [(n - self.radius, d / n)]
        return []


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    """Axis-aligned box [lo, hi], lo <= hi componentwise."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = as_point(self.lo)
        hi = as_point(self.hi, dim=lo.shape[0])
        if np.any(lo > hi):
            raise ValueError("box requires lo <= hi componentwise")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "dim", lo.shape[0])

    def project(self, x):
        pts = _as_batch(x, self.dim)
        return np.clip(pts, self.lo, self.hi)

    def _feas_terms(self, y):
        m = self.dim
        below = np.minimum(y - self.lo, 0.0)
        above = np.maximum(y - self.hi, 0.0)
        r = below + above
        hess = np.zeros((m, m))
        hess[np.diag_indices(m)] = 2.0 * (r != 0.0)
        return float(r @ r), 2.0 * r, hess

    def _normals(self, y, tol):
        out = []
        for j in range(self.dim):
            if y[j] >= self.hi[j] - tol:
                e = np.zeros(self.dim)
                e[j] = 1.0
                out.append(e)
            if y[j] <= self.lo[j] + tol:
                e = np.zeros(self.dim)
                e[j] = -1.0
                out.append(e)
        return out

    def _boundary_residuals(self, y, act_tol):
        out = []
        for j in range(self.dim):
            if y[j] >= self.hi[j] - act_tol:
                e = np.zeros(self.dim)
                e[j] = 1.0
                out.append((float(y[j] - self.hi[j]), e))
            if y[j] <= self.lo[j] + act_tol:
                e = np.zeros(self.dim)
                e[j] = -1.0
                out.append((float(self.lo[j] - y[j]), e))
        return out


@dataclass(frozen=True, eq=False)
class Affine(ConvexSet):
    """anchor + span(basis rows); basis rows must be orthonormal to 1e-12."""

    anchor: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        anchor = as_point(self.anchor)
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim != 2 or basis.shape[1] != anchor.shape[0]:
            raise DimensionMismatchError("basis must have shape (k, m)")
        gram = basis @ basis.T
        if not np.allclose(gram, np.eye(basis.shape[0]), atol=1e-12):
            raise ValueError("affine basis rows must be orthonormal (within 1e-12)")
        anchor.flags.writeable = False
        basis.flags.writeable = False
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "dim", anchor.shape[0])

    def project(self, x):
        pts = _as_batch(x, self.dim)
        d = pts - self.anchor
        return self.anchor + (d @ self.basis.T) @ self.basis

    def _feas_terms(self, y):
        m = self.dim
        tang = np.eye(m) - self.basis.T @ self.basis
        w = tang @ (y - self.anchor)
        return float(w @ w), 2.0 * w, 2.0 * tang

    def _normal_directions(self):
        tang = np.eye(self.dim) - self.basis.T @ self.basis
        return [
            col
            for col in np.linalg.svd(tang)[0].T
            if np.linalg.norm(tang @ col) > 0.5
        ]

    def _normals(self, y, tol):
        # Equality constraint: both signs of every normal direction are active.
        out = []
        for col in self._normal_directions():
            out.append(col)
            out.append(-col)
        return out

    def _boundary_residuals(self, y, act_tol):
        # Always-active equalities, one signed residual per normal direction.
        return [
            (float(col @ (y - self.anchor)), col)
            for col in self._normal_directions()
        ]


@dataclass(frozen=True, eq=False)
class Polyhedron(ConvexSet):
    """Finite intersection of halfspaces.

    Projection solves the KKT system over active subsets of size <= 2 in
    closed form; larger active sets fall back to the iterative intersection
    path.
    """

    halfspaces: tuple[Halfspace, ...]

    def __post_init__(self):
        hs = tuple(self.halfspaces)
        if not hs:
            raise ValueError("polyhedron needs at least one halfspace")
        dim = hs[0].dim
        for h in hs:
            if h.dim != dim:
                raise DimensionMismatchError("halfspace dimensions disagree")
        object.__setattr__(self, "halfspaces", hs)
        object.__setattr__(self, "dim", dim)

    def _kkt_tables(self):
        # Cached constraint matrix and 2x2 Gram inverses per halfspace pair.
        cached = getattr(self, "_kkt_cache", None)
        if cached is not None:
            return cached
        A = np.array([h.normal for h in self.halfspaces])
        b = np.array([h.offset for h in self.halfspaces])
        sq = np.einsum("ij,ij->i", A, A)
        pairs = []
        k = len(self.halfspaces)
        for i in range(k):
            for j in range(i + 1, k):
                G = np.array([[sq[i], A[i] @ A[j]], [A[j] @ A[i], sq[j]]])
                det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
                if abs(det) <= 1e-14 * sq[i] * sq[j]:
                    continue  # parallel normals never co-active at a projection
                pairs.append((i, j, np.linalg.inv(G)))
        slab = None
        if k == 2:
            u0 = A[0] / np.sqrt(sq[0])
            u1 = A[1] / np.sqrt(sq[1])
            if np.allclose(u0, -u1, atol=1e-12):
                lo = -b[1] / np.sqrt(sq[1])
                hi = b[0] / np.sqrt(sq[0])
                if lo > hi:
                    raise ValueError("slab polyhedron is empty")
                slab = (u0, lo, hi)
        cached = (A, b, sq, pairs, slab)
        object.__setattr__(self, "_kkt_cache", cached)
        return cached

    def project(self, x):
        pts = _as_batch(x, self.dim)
        A, b, sq, pairs, slab = self._kkt_tables()
        if slab is not None:
            u, lo, hi = slab
            s = pts @ u
            return pts + (np.clip(s, lo, hi) - s)[..., None] * u
        flat = np.atleast_2d(pts.reshape(-1, self.dim))
        slack = flat @ A.T - b
        tol = 1e-12 * (1.0 + float(np.abs(b).max()) + float(np.abs(slack).max()))

        out = flat.copy()
        best = np.where(np.all(slack <= tol, axis=1), 0.0, np.inf)
        # Candidate active sets of size 1 and 2: a KKT candidate is the
        # projection iff feasible with nonnegative multipliers.
        for i in range(len(self.halfspaces)):
            lam = slack[:, i] / sq[i]
            y = flat - lam[:, None] * A[i]
            ok = (
                (lam >= -tol)
                & np.all(y @ A.T - b <= 10.0 * tol + 1e-12, axis=1)
            )
            d2 = np.einsum("ij,ij->i", flat - y, flat - y)
            take = ok & (d2 < best)
            out[take] = y[take]
            best = np.where(take, d2, best)
        for i, j, g_inv in pairs:
            lam = slack[:, (i, j)] @ g_inv.T
            y = flat - lam[:, :1] * A[i] - lam[:, 1:] * A[j]
            ok = (
                np.all(lam >= -tol, axis=1)
                & np.all(y @ A.T - b <= 10.0 * tol + 1e-12, axis=1)
            )
            d2 = np.einsum("ij,ij->i", flat - y, flat - y)
            take = ok & (d2 < best)
            out[take] = y[take]
            best = np.where(take, d2, best)
        # Larger active sets: fall back to the iterative intersection path.
        leftover = np.flatnonzero(np.isinf(best))
        if leftover.size:
            oracle = IntersectionOracle(members=self.halfspaces)
            out[leftover] = dykstra_project(oracle, flat[leftover])
        return out.reshape(pts.shape)

    def _feas_terms(self, y):
        m = self.dim
        F, g, H = 0.0, np.zeros(m), np.zeros((m, m))
        for h in self.halfspaces:
            f0, g0, h0 = h._feas_terms(y)
            F, g, H = F + f0, g + g0, H + h0
        return F, g, H

    def _normals(self, y, tol):
        out = []
        for h in self.halfspaces:
            out.extend(h._normals(y, tol))
        return out

    def _primitives(self):
        return list(self.halfspaces)


@dataclass(frozen=True, eq=False)
class Intersection(ConvexSet):
    """Intersection of arbitrary member sets, projected iteratively."""

    # Tighter than the standalone oracle default: as a first-class set this
    # variant must satisfy the projector axioms to within 1e-9 slack.
    _PROJECT_TOL = 1e-12

    members: tuple[ConvexSet, ...]

    def __post_init__(self):
        ms = tuple(self.members)
        if not ms:
            raise ValueError("intersection needs at least one member")
        dim = ms[0].dim
        for s in ms:
            if s.dim != dim:
                raise DimensionMismatchError("member dimensions disagree")
        object.__setattr__(self, "members", ms)
        object.__setattr__(self, "dim", dim)

    def project(self, x):
        oracle = IntersectionOracle(members=self.members, tolerance=self._PROJECT_TOL)
        return dykstra_project(oracle, x)

    def _feas_terms(self, y):
        m = self.dim
        F, g, H = 0.0, np.zeros(m), np.zeros((m, m))
        for s in self.members:
            f0, g0, h0 = s._feas_terms(y)
            F, g, H = F + f0, g + g0, H + h0
        return F, g, H

    def _normals(self, y, tol):
        out = []
        for s in self.members:
            out.extend(s._normals(y, tol))
        return out

    def _primitives(self):
        out = []
        for s in self.members:
            out.extend(s._primitives())
        return out


def project(set_: ConvexSet, x) -> np.ndarray:
    """Nearest point of the set, acting on the last axis of `x`."""
    return set_.project(x)


def distance(set_: ConvexSet, x) -> np.ndarray | float:
    """Euclidean distance |x - P(x)| to the set."""
    pts = _as_batch(x, set_.dim)
    d = np.linalg.norm(pts - set_.project(pts), axis=-1)
    return float(d) if d.ndim == 0 else d


def sqdist_gradient(set_: ConvexSet, x) -> np.ndarray:
    """Gradient of squared distance: 2 (x - P(x))."""
    pts = _as_batch(x, set_.dim)
    return 2.0 * (pts - set_.project(pts))


def contains(set_: ConvexSet, x, tol: float = MEMBERSHIP_TOL) -> bool | np.ndarray:
    d = distance(set_, x)
    return d <= tol


class SetFamily:
    """Per-index projector for a list of sets: row i of the input is
    projected onto sets[i].  Groups same-variant sets so that trajectories
    project in a handful of vectorized calls.
    """

    def __init__(self, sets: Sequence[ConvexSet]):
        self.sets = list(sets)
        if not self.sets:
            raise ValueError("empty set family")
        self.dim = self.sets[0].dim
        for s in self.sets:
            if s.dim != self.dim:
                raise DimensionMismatchError("family members must share dimension")
        self._balls = [i for i, s in enumerate(self.sets) if type(s) is Ball]
        self._halfspaces = [i for i, s in enumerate(self.sets) if type(s) is Halfspace]
        self._boxes = [i for i, s in enumerate(self.sets) if type(s) is Box]
        grouped = set(self._balls) | set(self._halfspaces) | set(self._boxes)
        self._other = [i for i in range(len(self.sets)) if i not in grouped]
        if self._balls:
            self._bc = np.array([self.sets[i].center for i in self._balls])
            self._br = np.array([self.sets[i].radius for i in self._balls])
        if self._halfspaces:
            self._hn = np.array([self.sets[i].normal for i in self._halfspaces])
            self._hb = np.array([self.sets[i].offset for i in self._halfspaces])
            self._hnn = np.einsum("ij,ij->i", self._hn, self._hn)
        if self._boxes:
            self._blo = np.array([self.sets[i].lo for i in self._boxes])
            self._bhi = np.array([self.sets[i].hi for i in self._boxes])

    def project(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        if pts.shape[-2:] != (len(self.sets), self.dim):
            raise DimensionMismatchError(
                f"expected trailing shape ({len(self.sets)}, {self.dim}), "
                f"got {pts.shape}"
            )
        out = pts.copy()
        if self._balls:
            sub = pts[..., self._balls, :]
            d = sub - self._bc
            n = np.linalg.norm(d, axis=-1)
            scale = np.where(n > self._br, self._br / np.maximum(n, 1e-300), 1.0)
            out[..., self._balls, :] = self._bc + d * scale[..., None]
        if self._halfspaces:
            sub = pts[..., self._halfspaces, :]
            viol = np.maximum(np.einsum("...ij,ij->...i", sub, self._hn) - self._hb, 0.0)
            out[..., self._halfspaces, :] = sub - (viol / self._hnn)[..., None] * self._hn
        if self._boxes:
            sub = pts[..., self._boxes, :]
            out[..., self._boxes, :] = np.clip(sub, self._blo, self._bhi)
        for i in self._other:
            out[..., i, :] = self.sets[i].project(pts[..., i, :])
        return out

    def distance(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        return np.linalg.norm(pts - self.project(pts), axis=-1)


# ---------------------------------------------------------------------------
# Intersection oracle (Dykstra + polish)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IntersectionOracle:
    """Oracle for the intersection of member sets.

    Dykstra's corrected alternating projections converge to the true
    projection (plain alternation only reaches *a* point of the
    intersection).  Cycles stop when the per-point cycle displacement drops
    below `tolerance` and the iterate verifies as feasible; points whose
    displacement decays sublinearly (tangentially touching members have no
    linear regularity) are finished by an active-set polish, accepted only
    under feasibility and optimality guards.
    """

    members: tuple[ConvexSet, ...]
    tolerance: float = 1e-8
    max_iterations: int = 100_000

    def __post_init__(self):
        ms = tuple(self.members)
        if not ms:
            raise ValueError("oracle needs at least one member")
        dim = ms[0].dim
        for s in ms:
            if s.dim != dim:
                raise DimensionMismatchError("member dimensions disagree")
        object.__setattr__(self, "members", ms)
        object.__setattr__(self, "dim", dim)

    def residual(self, x) -> np.ndarray | float:
        """Max distance from x to any member set."""
        pts = _as_batch(x, self.dim)
        r = np.max([distance(s, pts) for s in self.members], axis=0)
        return float(r) if np.ndim(r) == 0 else r


_POLISH_CHECKPOINTS = (256, 1024, 4096, 16384, 65536)


def _feasibility_newton(members, y0: np.ndarray, iters: int = 80) -> np.ndarray:
    """Minimize the sum of squared set distances by damped Newton steps."""
    y = y0.copy()
    m = y.shape[0]
    prims = []
    for s in members:
        prims.extend(s._primitives())

    def fgH(z):
        F, g, H = 0.0, np.zeros(m), np.zeros((m, m))
        for s in prims:
            f0, g0, h0 = s._feas_terms(z)
            F, g, H = F + f0, g + g0, H + h0
        return F, g, H

    F, g, H = fgH(y)
    for _ in range(iters):
        if F < 1e-30:
            break
        step, *_ = np.linalg.lstsq(H + 1e-12 * np.eye(m), -g, rcond=None)
        t = 1.0
        for _ in range(40):
            Fn, gn, Hn = fgH(y + t * step)
            if Fn <= F:
                break
            t *= 0.5
        else:
            break
        if abs(F - Fn) < 1e-32 and t < 1.0:
            break
        y = y + t * step
        F, g, H = Fn, gn, Hn
    return y


def _active_gauss_newton(members, y0: np.ndarray, iters: int = 60) -> np.ndarray:
    """Drive the signed residuals of near-active constraints to zero.

    Unlike the one-sided objective, signed residuals keep every nearby
    surface in play no matter which side the iterate sits on; this is what
    resolves tangentially-touching members, where the iterate hops between
    one-at-a-time active sets and the one-sided Hessian never sees the
    tangential direction.
    """
    prims = []
    for s in members:
        prims.extend(s._primitives())
    y = y0.copy()
    scale = 1.0 + float(np.linalg.norm(y0))
    viol0 = max(float(distance(s, y0)) for s in members)
    act_tol = max(1e-6 * scale, 10.0 * viol0)

    def residuals(z):
        pairs = []
        for s in prims:
            pairs.extend(s._boundary_residuals(z, act_tol))
        return pairs

    pairs = residuals(y)
    if not pairs:
        return y
    for _ in range(iters):
        r = np.array([v for v, _ in pairs])
        if np.max(np.abs(r)) < 1e-15 * scale:
            break
        J = np.array([g for _, g in pairs])
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        t = 1.0
        best = float(r @ r)
        for _ in range(30):
            trial = residuals(y + t * step)
            val = float(sum(v * v for v, _ in trial)) if trial else 0.0
            if val <= best:
                break
            t *= 0.5
        else:
            break
        if not trial:
            y = y + t * step
            break
        y = y + t * step
        pairs = trial
    return y


def _nnls(A: np.ndarray, b: np.ndarray, iters: int = 64) -> np.ndarray:
    """Tiny Lawson-Hanson NNLS: min |A x - b|, x >= 0."""
    n = A.shape[1]
    x = np.zeros(n)
    passive: list[int] = []
    for _ in range(iters):
        w = A.T @ (b - A @ x)
        candidates = [j for j in range(n) if j not in passive]
        if not candidates:
            break
        j = max(candidates, key=lambda c: w[c])
        if w[j] <= 1e-14:
            break
        passive.append(j)
        while True:
            z = np.zeros(n)
            sol, *_ = np.linalg.lstsq(A[:, passive], b, rcond=None)
            z[passive] = sol
            if np.all(z[passive] > 0.0):
                x = z
                break
            mask = [p for p in passive if z[p] <= 0.0]
            alpha = min(x[p] / (x[p] - z[p]) for p in mask if x[p] != z[p])
            x = x + alpha * (z - x)
            passive = [p for p in passive if x[p] > 1e-14]
    return x


def _polish_point(
    oracle: IntersectionOracle, x: np.ndarray, y0: np.ndarray
) -> np.ndarray | None:
    """Refine a stalled Dykstra iterate.

    Returns a replacement point only when it is (a) feasible to within
    MEMBERSHIP_TOL, and (b) either KKT-certified as the projection of x or a
    local feasible point next to the stalled iterate (the sublinear cases are
    exactly those where the feasible set pinches to the limit point).
    """
    y = _active_gauss_newton(oracle.members, y0)
    feas = max(float(distance(s, y)) for s in oracle.members)
    if feas > MEMBERSHIP_TOL:
        y = _feasibility_newton(oracle.members, y0)
        feas = max(float(distance(s, y)) for s in oracle.members)
    if feas > MEMBERSHIP_TOL:
        return None
    r = x - y
    rn = np.linalg.norm(r)
    if rn <= MEMBERSHIP_TOL:
        return y
    normals = []
    for s in oracle.members:
        normals.extend(s._normals(y, tol=1e-7 * (1.0 + np.linalg.norm(y))))
    if normals:
        N = np.array(normals).T  # (m, k)
        lam = _nnls(N, r)
        if np.linalg.norm(N @ lam - r) <= 1e-7 * (1.0 + rn):
            return y  # certified: x - y lies in the active normal cone
    if np.linalg.norm(y - y0) <= 0.1 * (1.0 + np.linalg.norm(x - y0)):
        return y
    return None


def dykstra_project(oracle: IntersectionOracle, x) -> np.ndarray:
    """Project onto the intersection of the oracle's members.

    Accepts (..., m) batches.  A point retires when its cycle displacement
    drops below the tolerance *and* it sits inside every member set; small
    displacement alone is not trusted because the sublinear (tangential)
    regime produces tiny steps while the iterate is still far out.  Points
    that stall are finished by the feasibility polish; if none of that
    resolves a point within the budget an OracleFailureError carrying the
    worst membership residual is raised.
    """
    pts = _as_batch(x, oracle.dim)
    single = pts.ndim == 1
    flat = pts.reshape(-1, oracle.dim).copy()
    n_pts = flat.shape[0]
    members = oracle.members

    y = flat.copy()
    corr = [np.zeros_like(flat) for _ in members]
    active = np.arange(n_pts)
    deferred = np.zeros(n_pts, dtype=bool)  # stalled, polish already failed
    xs = flat  # originals, for polish optimality checks

    checkpoints = set(_POLISH_CHECKPOINTS)
    for cycle in range(1, oracle.max_iterations + 1):
        sub = y[active]
        start = sub.copy()
        for k, s in enumerate(members):
            z = sub + corr[k][active]
            sub = s.project(z)
            corr[k][active] = z - sub
        y[active] = sub
        disp = np.linalg.norm(sub - start, axis=-1)
        at_checkpoint = cycle in checkpoints
        small = disp < oracle.tolerance
        done = np.zeros(active.size, dtype=bool)
        cand = np.flatnonzero(small & (~deferred[active] | at_checkpoint))
        if cand.size:
            batch = y[active[cand]]
            residual = np.max([distance(s, batch) for s in members], axis=0)
            residual = np.atleast_1d(residual)
            # Linear convergence leaves the membership residual at the
            # displacement's scale; in the tangential regime the ratio blows
            # up like 1/error, which is what routes those points to polish.
            gate = np.maximum(
                100.0 * disp[cand],
                1e-13 * (1.0 + np.linalg.norm(batch, axis=-1)),
            )
            ok = residual <= gate
            done[cand[ok]] = True
            for j in cand[~ok]:
                i = active[j]
                polished = _polish_point(oracle, xs[i], y[i])
                if polished is not None:
                    y[i] = polished
                    done[j] = True
                else:
                    deferred[i] = True
        if at_checkpoint:
            for j in np.flatnonzero(~small & ~done):
                i = active[j]
                polished = _polish_point(oracle, xs[i], y[i])
                if polished is not None:
                    y[i] = polished
                    done[j] = True
        if done.any():
            active = active[~done]
        if active.size == 0:
            break
    if active.size > 0:
        for i in list(active):
            polished = _polish_point(oracle, xs[i], y[i])
            if polished is not None:
                y[i] = polished
                active = active[active != i]
    if active.size > 0:
        try:
            worst = float(np.max(oracle.residual(y[active])))
        except OracleFailureError:  # nested oracle member also failed
            worst = float("nan")
        raise OracleFailureError(
            f"dykstra failed to converge for {active.size} point(s) within "
            f"{oracle.max_iterations} cycles",
            residual=worst,
        )
    out = y.reshape(pts.shape)
    return out[()] if not single else out.reshape(oracle.dim)


def feasibility_probe(oracle: IntersectionOracle, x) -> tuple[np.ndarray, float]:
    """Probe nonemptiness of the intersection from a start point.

    Runs displacement-stopped Dykstra cycles; the candidate is whichever of
    (polished end point, mean of the last cycle's per-member projections) has
    the smaller worst-case membership residual.  For disjoint members the
    cycle mean straddles the gap, so the residual is bounded below by half
    the gap.
    """
    p = as_point(x, oracle.dim)
    members = oracle.members
    y = p.copy()
    corr = [np.zeros_like(p) for _ in members]
    cycle_pts = [y]
    for _ in range(min(oracle.max_iterations, 20_000)):
        start = y.copy()
        cycle_pts = []
        for k, s in enumerate(members):
            z = y + corr[k]
            y = s.project(z)
            corr[k] = z - y
            cycle_pts.append(y)
        if np.linalg.norm(y - start) < oracle.tolerance:
            break
    candidates = [np.mean(cycle_pts, axis=0), y]
    polished = _polish_point(oracle, p, y)
    if polished is not None:
        candidates.append(polished)
    residuals = [float(oracle.residual(c)) for c in candidates]
    best = int(np.argmin(residuals))
    return candidates[best], residuals[best]


# ---------------------------------------------------------------------------
# Multi-projection words and the sampled invariant-set construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultiProjectionWord:
    """Finite composition word: indices applied left to right (first index
    projects first); the empty word is the identity map."""

    indices: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))


def apply_word(
    word: MultiProjectionWord, sets: Sequence[ConvexSet], x
) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    for i in word.indices:
        if not 0 <= i < len(sets):
            raise IndexError(f"word index {i} out of range for {len(sets)} sets")
        pts = sets[i].project(pts)
    return pts


def _simplex_weights(rng: np.random.Generator, k: int) -> np.ndarray:
    """Uniform point of the (k-1)-simplex via sorted-uniform spacings."""
    if k == 1:
        return np.ones(1)
    cuts = np.sort(rng.uniform(0.0, 1.0, size=k - 1))
    return np.diff(np.concatenate(([0.0], cuts, [1.0])))


def sample_delta_point(
    generators: Sequence[np.ndarray],
    sets: Sequence[ConvexSet],
    max_depth: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw a random element of the multi-projection hull of co{generators}.

    Uses m+1 terms (Caratheodory): each term applies a random projection
    word of depth <= max_depth to a random hull point of the generators;
    the terms combine with uniform simplex weights.
    """
    gens = np.array([as_point(g) for g in generators])
    if gens.size == 0:
        raise ValueError("need at least one generator")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    m = gens.shape[1]
    terms = []
    for _ in range(m + 1):
        depth = int(rng.integers(0, max_depth + 1))
        word = MultiProjectionWord(tuple(rng.integers(0, len(sets), size=depth)))
        hull_pt = _simplex_weights(rng, len(gens)) @ gens
        terms.append(apply_word(word, sets, hull_pt))
    weights = _simplex_weights(rng, m + 1)
    return weights @ np.array(terms)


# ---------------------------------------------------------------------------
# Min-norm point / hull distance (Wolfe's algorithm)
# ---------------------------------------------------------------------------


def min_norm_point(points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Minimum-norm point of co{rows of `points`} by Wolfe's method.

    Major cycles add the vertex minimizing <p, x>; minor cycles restore the
    corral property (affine minimizer with nonnegative weights).  Finite and
    exact in principle; tolerances only guard floating-point ties.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[0] == 0:
        raise ValueError("points must be a nonempty (k, m) array")
    scale = float(np.max(np.einsum("ij,ij->i", P, P))) + 1.0

    i0 = int(np.argmin(np.einsum("ij,ij->i", P, P)))
    S = [i0]
    lam = np.array([1.0])
    x = P[i0].copy()

    for _ in range(16 * len(P) + 64):
        dots = P @ x
        j = int(np.argmin(dots))
        if dots[j] >= x @ x - tol * scale:
            break
        if j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            Q = P[S]
            k = len(S)
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = Q @ Q.T
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            alpha = sol[:k]
            if np.all(alpha >= -1e-13):
                lam = np.maximum(alpha, 0.0)
                lam /= lam.sum()
                x = lam @ Q
                break
            neg = alpha < 1e-13
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(
                    lam - alpha > 0.0, lam / np.maximum(lam - alpha, 1e-300), np.inf
                )
            theta = float(np.min(ratios[neg]))
            theta = min(max(theta, 0.0), 1.0)
            lam = (1.0 - theta) * lam + theta * alpha
            keep = lam > 1e-13
            if keep.all():
                keep[int(np.argmin(lam))] = False
            S = [s for s, k_ in zip(S, keep) if k_]
            lam = lam[keep]
            lam /= lam.sum()
            x = lam @ P[S]
    return x


def hull_distance(generators: Sequence[np.ndarray], x) -> float:
    """Euclidean distance from x to the convex hull of the generators."""
    gens = np.array([as_point(g) for g in generators])
    p = as_point(x, gens.shape[1])
    v = min_norm_point(gens - p)
    return float(np.linalg.norm(v))
