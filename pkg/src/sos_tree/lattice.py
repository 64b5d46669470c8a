"""Finite rooted Cayley trees, the hinge admissibility graph and edge activities.

Vertices of a ball are indexed breadth-first with children in order, so the
first ``ball_size(k, r)`` indices always form the sub-ball ``V_r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

# Exhaustive-enumeration state-space guards.
MAX_ENUM_SPIN = 8
MAX_ENUM_RADIUS = 4


def sphere_size(k: int, r: int) -> int:
    """|W_r| = (k+1) k^(r-1) for r >= 1, and 1 for r = 0."""
    if r == 0:
        return 1
    return (k + 1) * k ** (r - 1)


def ball_size(k: int, n: int) -> int:
    return sum(sphere_size(k, r) for r in range(n + 1))


class PSOSOverflowError(ArithmeticError):
    """theta^(d^p) overflows a double (theta > 1 with large finite p)."""


@dataclass(frozen=True)
class CayleyBall:
    """The ball V_n of radius ``n`` around the root of the order-``k`` Cayley tree."""

    k: int
    n: int
    depth: np.ndarray = field(repr=False)
    parent: np.ndarray = field(repr=False)
    children: tuple = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.depth)

    @property
    def root(self) -> int:
        return 0

    def sphere(self, r: int) -> range:
        """Vertex indices of the sphere W_r."""
        if not 0 <= r <= self.n:
            raise ValueError(f"radius {r} outside ball of radius {self.n}")
        start = ball_size(self.k, r - 1) if r > 0 else 0
        return range(start, start + sphere_size(self.k, r))

    def edges(self) -> np.ndarray:
        """Array of (parent, child) pairs in child-index order."""
        child = np.arange(1, self.size)
        return np.stack([self.parent[1:], child], axis=1)

    def distance(self, u: int, v: int) -> int:
        du, dv = int(self.depth[u]), int(self.depth[v])
        steps = 0
        while du > dv:
            u, du, steps = int(self.parent[u]), du - 1, steps + 1
        while dv > du:
            v, dv, steps = int(self.parent[v]), dv - 1, steps + 1
        while u != v:
            u, v, steps = int(self.parent[u]), int(self.parent[v]), steps + 2
        return steps


def build_ball(k: int, n: int) -> CayleyBall:
    if k < 1 or int(k) != k:
        raise ValueError(f"branching order must be an integer >= 1, got {k}")
    if n < 0 or int(n) != n:
        raise ValueError(f"radius must be an integer >= 0, got {n}")
    k, n = int(k), int(n)
    size = ball_size(k, n)
    depth = np.zeros(size, dtype=np.int64)
    parent = np.full(size, -1, dtype=np.int64)
    children: list[tuple[int, ...]] = [() for _ in range(size)]
    nxt = 1
    for v in range(size):
        if depth[v] == n:
            continue
        fan = k + 1 if v == 0 else k
        kids = tuple(range(nxt, nxt + fan))
        children[v] = kids
        depth[nxt:nxt + fan] = depth[v] + 1
        parent[nxt:nxt + fan] = v
        nxt += fan
    depth.setflags(write=False)
    parent.setflags(write=False)
    return CayleyBall(k=k, n=n, depth=depth, parent=parent, children=tuple(children))


def successors(ball: CayleyBall, v: int) -> list[int]:
    """Direct successors S(v); empty for vertices on the boundary sphere."""
    if not 0 <= v < ball.size:
        raise IndexError(f"vertex {v} not in ball")
    return list(ball.children[v])


@dataclass(frozen=True)
class HingeGraphSpec:
    m: int
    adjacency: np.ndarray = field(repr=False)

    def allowed(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])


def hinge_graph(m: int) -> HingeGraphSpec:
    """Path on {0..m} with a self-loop at every vertex: a_ij = 1 iff |i-j| <= 1."""
    if m < 1 or int(m) != m:
        raise ValueError(f"max spin must be an integer >= 1, got {m}")
    idx = np.arange(m + 1)
    adj = (np.abs(idx[:, None] - idx[None, :]) <= 1).astype(np.int64)
    adj.setflags(write=False)
    return HingeGraphSpec(m=int(m), adjacency=adj)


@dataclass(frozen=True)
class ActivitySpec:
    """Edge activities. ``p is None`` selects the hardcore (infinity-SOS) variant."""

    theta: float
    p: Optional[float] = None

    def __post_init__(self):
        if not (self.theta >= 0 and math.isfinite(self.theta)):
            raise ValueError(f"theta must be finite and nonnegative, got {self.theta}")
        if self.p is not None and not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")

    @property
    def J(self) -> float:
        return math.log(self.theta)

    @property
    def hardcore(self) -> bool:
        return self.p is None


def activity_weight(spec: ActivitySpec, i: int, j: int) -> float:
    d = abs(int(i) - int(j))
    if spec.hardcore:
        if d == 0:
            return 1.0
        return spec.theta if d == 1 else 0.0
    if d == 0:
        return 1.0
    if spec.theta == 0.0:
        return 0.0
    if math.isinf(spec.p):
        # the p -> infinity limit keeps unit steps and drops longer ones (all kept at theta = 1)
        return spec.theta if d == 1 else float(spec.theta == 1.0)
    # exp form keeps huge exponents from overflowing to inf before underflowing
    try:
        return math.exp(d ** spec.p * math.log(spec.theta))
    except OverflowError:
        raise PSOSOverflowError(f"theta^({d}^p) overflows for theta={spec.theta}, p={spec.p}") from None


@dataclass(frozen=True)
class ModelSpec:
    """Spin cap, admissibility graph and activities of one model instance."""

    m: int
    activity: ActivitySpec

    @classmethod
    def inf_sos(cls, theta: float, m: int = 2) -> "ModelSpec":
        return cls(m=m, activity=ActivitySpec(theta))

    @classmethod
    def p_sos(cls, theta: float, p: float, m: int = 2) -> "ModelSpec":
        return cls(m=m, activity=ActivitySpec(theta, p))

    @property
    def theta(self) -> float:
        return self.activity.theta

    @property
    def adjacency(self) -> np.ndarray:
        if self.activity.hardcore:
            return hinge_graph(self.m).adjacency
        return np.ones((self.m + 1, self.m + 1), dtype=np.int64)

    def activity_matrix(self) -> np.ndarray:
        """(m+1)x(m+1) matrix a_ij * lambda_ij (zero on excluded pairs)."""
        lam = np.array([[activity_weight(self.activity, i, j) for j in range(self.m + 1)]
                        for i in range(self.m + 1)])
        return lam * self.adjacency


@dataclass(frozen=True)
class Configuration:
    """Spin assignment on a ball, stored in breadth-first vertex order."""

    spins: tuple
    m: int

    def __post_init__(self):
        bad = [s for s in self.spins if not 0 <= s <= self.m]
        if bad:
            raise ValueError(f"spins out of range 0..{self.m}: {bad[:5]}")

    @classmethod
    def of(cls, spins: Sequence[int], m: int) -> "Configuration":
        return cls(tuple(int(s) for s in spins), m)

    def __len__(self):
        return len(self.spins)


def _spins(cfg, ball: CayleyBall) -> np.ndarray:
    s = np.asarray(cfg.spins if isinstance(cfg, Configuration) else cfg, dtype=np.int64)
    if s.shape != (ball.size,):
        raise ValueError(f"configuration has {s.size} spins, ball has {ball.size} vertices")
    return s


def is_admissible(graph: HingeGraphSpec, ball: CayleyBall, cfg) -> bool:
    s = _spins(cfg, ball)
    if s.size and (s.min() < 0 or s.max() > graph.m):
        raise ValueError("spin out of range")
    e = ball.edges()
    if len(e) == 0:
        return True
    return bool(np.all(graph.adjacency[s[e[:, 0]], s[e[:, 1]]]))
