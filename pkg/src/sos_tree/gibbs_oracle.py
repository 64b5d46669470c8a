"""Exact finite-volume Gibbs distributions on Cayley balls.

Two independent routes are provided: brute-force enumeration of every
admissible configuration (``finite_measure``) and leaf-to-root recursion of
partial partition functions (``exact_marginal``). They must agree wherever
both are computable; the enumeration route is the ground truth for the rest
of the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .lattice import (
    MAX_ENUM_RADIUS,
    MAX_ENUM_SPIN,
    CayleyBall,
    ModelSpec,
    _spins,
    build_ball,
)

MAX_ENUM_CONFIGS = 10_000_000


class EnumerationGuardError(ValueError):
    """Raised when an exhaustive enumeration would exceed the state-space guard."""


@dataclass(frozen=True)
class BoundaryLawField:
    """Per-vertex boundary-law vectors, shape ``(ball.size, m + 1)``."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("boundary law field must be a 2-d array")
        if not np.all(v > 0) or not np.all(np.isfinite(v)):
            raise ValueError("boundary law entries must be finite and strictly positive")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[1] - 1

    @classmethod
    def constant(cls, ball: CayleyBall, z: Sequence[float]) -> "BoundaryLawField":
        z = np.asarray(z, dtype=float)
        return cls(np.tile(z, (ball.size, 1)))

    @classmethod
    def by_depth(cls, ball: CayleyBall, vectors: Sequence[Sequence[float]]) -> "BoundaryLawField":
        """Field whose value at a vertex of depth d is ``vectors[d % len(vectors)]``."""
        vecs = np.asarray(vectors, dtype=float)
        return cls(vecs[ball.depth % len(vecs)])

    def restrict(self, size: int) -> "BoundaryLawField":
        return BoundaryLawField(self.values[:size])

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.values[:, -1] - 1.0) <= tol))


@dataclass(frozen=True)
class FiniteMeasure:
    """All admissible configurations on V_n with their probabilities.

    ``configs`` rows are in lexicographic order of the breadth-first spin vector.
    """

    ball: CayleyBall
    m: int
    configs: np.ndarray = field(repr=False)
    probs: np.ndarray = field(repr=False)
    log_Z: float

    @property
    def Z(self) -> float:
        return float(np.exp(self.log_Z))

    def prob(self, cfg) -> float:
        s = _spins(cfg, self.ball)
        hit = np.all(self.configs == s, axis=1)
        return float(self.probs[hit].sum())

    # masked np.sum uses pairwise summation; bincount accumulates sequentially
    # and loses about 1e-11 over the millions of terms at k = 3, n = 2

    def site_marginal(self, v: int) -> np.ndarray:
        col = self.configs[:, v]
        return np.array([self.probs[col == i].sum() for i in range(self.m + 1)])

    def pair_marginal(self, u: int, v: int) -> np.ndarray:
        q = self.m + 1
        idx = self.configs[:, u].astype(np.int64) * q + self.configs[:, v]
        return np.array([self.probs[idx == c].sum() for c in range(q * q)]).reshape(q, q)


def _check_field(ball: CayleyBall, model: ModelSpec, z: BoundaryLawField):
    if z.values.shape != (ball.size, model.m + 1):
        raise ValueError(
            f"boundary law field shape {z.values.shape} does not match ball/model "
            f"({ball.size}, {model.m + 1})")


def config_weight(ball: CayleyBall, model: ModelSpec, z: BoundaryLawField, cfg) -> float:
    """Unnormalized weight: edge activities over V_n times boundary factors on W_n."""
    _check_field(ball, model, z)
    s = _spins(cfg, ball)
    lam = model.activity_matrix()
    e = ball.edges()
    w = float(np.prod(lam[s[e[:, 0]], s[e[:, 1]]])) if len(e) else 1.0
    if w == 0.0:
        return 0.0
    leaves = np.asarray(ball.sphere(ball.n))
    return w * float(np.prod(z.values[leaves, s[leaves]]))


def count_admissible(ball: CayleyBall, model: ModelSpec) -> int:
    """Exact number of admissible configurations on the ball (integer recursion)."""
    adj = [[int(a) for a in row] for row in model.adjacency]
    q = model.m + 1
    cnt = [[1] * q for _ in range(ball.size)]
    for v in range(ball.size - 1, -1, -1):
        for c in ball.children[v]:
            cnt[v] = [cnt[v][i] * sum(adj[i][j] * cnt[c][j] for j in range(q)) for i in range(q)]
    return sum(cnt[0])


def check_enumeration_guard(ball: CayleyBall, model: ModelSpec) -> int:
    if model.m > MAX_ENUM_SPIN:
        raise EnumerationGuardError(f"m={model.m} exceeds enumeration cap {MAX_ENUM_SPIN}")
    if ball.n > MAX_ENUM_RADIUS:
        raise EnumerationGuardError(f"n={ball.n} exceeds enumeration cap {MAX_ENUM_RADIUS}")
    count = count_admissible(ball, model)
    if count > MAX_ENUM_CONFIGS:
        raise EnumerationGuardError(
            f"{count} admissible configurations on V_{ball.n} (k={ball.k}) exceed "
            f"the enumeration guard {MAX_ENUM_CONFIGS}")
    return count


def enumerate_admissible(ball: CayleyBall, model: ModelSpec) -> np.ndarray:
    """All admissible configurations as an int8 array, lexicographically sorted."""
    check_enumeration_guard(ball, model)
    adj = np.asarray(model.adjacency, dtype=bool)
    q = model.m + 1
    configs = np.arange(q, dtype=np.int8)[:, None]
    for v in range(1, ball.size):
        par = configs[:, ball.parent[v]]
        blocks = []
        for j in range(q):
            keep = configs[adj[par, j]]
            blocks.append(np.hstack([keep, np.full((len(keep), 1), j, dtype=np.int8)]))
        configs = np.vstack(blocks)
    order = np.lexsort(configs.T[::-1])
    return configs[order]


def _log_weights(ball: CayleyBall, model: ModelSpec, z: BoundaryLawField,
                 configs: np.ndarray) -> np.ndarray:
    lam = model.activity_matrix()
    with np.errstate(divide="ignore"):
        log_lam = np.log(lam)
        log_z = np.log(z.values)
    lw = np.zeros(len(configs))
    for u, v in ball.edges():
        lw += log_lam[configs[:, u], configs[:, v]]
    for x in ball.sphere(ball.n):
        lw += log_z[x, configs[:, x]]
    return lw


def _scaled_weights(ball: CayleyBall, model: ModelSpec, z: BoundaryLawField,
                    configs: np.ndarray) -> tuple[np.ndarray, float]:
    """Linear-space weights with every factor divided by its largest value.

    Returns (w, log_scale) with true weight = w * exp(log_scale). Products of
    factors in (0, 1] are more accurate than exponentiated log sums.
    """
    lam = model.activity_matrix()
    lam_top = lam.max()
    z_top = z.values.max(axis=1)
    w = np.ones(len(configs))
    for u, v in ball.edges():
        w *= lam[configs[:, u], configs[:, v]] / lam_top
    leaves = list(ball.sphere(ball.n))
    for x in leaves:
        w *= z.values[x, configs[:, x]] / z_top[x]
    log_scale = (ball.size - 1) * np.log(lam_top) + float(np.sum(np.log(z_top[leaves])))
    return w, log_scale


def finite_measure(ball: CayleyBall, model: ModelSpec, z: BoundaryLawField) -> FiniteMeasure:
    _check_field(ball, model, z)
    configs = enumerate_admissible(ball, model)
    lw = _log_weights(ball, model, z, configs)
    keep = np.isfinite(lw)
    configs, lw = configs[keep], lw[keep]
    w, log_scale = _scaled_weights(ball, model, z, configs)
    if np.all(w > np.finfo(float).tiny):
        total = w.sum()
        log_Z = log_scale + float(np.log(total))
    else:
        # some weights underflow in linear space; fall back to log-space
        top = lw.max()
        w = np.exp(lw - top)
        total = w.sum()
        log_Z = float(top + np.log(total))
    return FiniteMeasure(ball=ball, m=model.m, configs=configs, probs=w / total, log_Z=log_Z)


def _marginalize_prefix(measure: FiniteMeasure, width: int):
    prefixes, inverse = np.unique(measure.configs[:, :width], axis=0, return_inverse=True)
    mass = np.bincount(inverse.ravel(), weights=measure.probs, minlength=len(prefixes))
    return prefixes, mass


def compatibility_residual(ball: CayleyBall, model: ModelSpec, z: BoundaryLawField,
                           relative: bool = False) -> float:
    """Max discrepancy between mu^(n) summed over W_n and mu^(n-1).

    Both measures use the same field: mu^(n-1) reads its boundary factors from
    W_{n-1}. The root's vector never enters, so genuine boundary laws give a
    zero residual only from n = 2 on. With ``relative=True`` the discrepancy
    is max |marginal / mu^(n-1) - 1| instead, which stays informative when
    most probabilities are tiny.
    """
    if ball.n < 1:
        raise ValueError("compatibility needs n >= 1")
    _check_field(ball, model, z)
    inner = build_ball(ball.k, ball.n - 1)
    outer_mu = finite_measure(ball, model, z)
    inner_mu = finite_measure(inner, model, z.restrict(inner.size))
    prefixes, mass = _marginalize_prefix(outer_mu, inner.size)
    # every admissible inner configuration extends (copy the parent spin outward)
    if prefixes.shape != inner_mu.configs.shape or not np.array_equal(prefixes, inner_mu.configs):
        raise AssertionError("inner configuration sets differ; admissibility is inconsistent")
    if relative:
        return float(np.max(np.abs(mass / inner_mu.probs - 1.0)))
    return float(np.max(np.abs(mass - inner_mu.probs)))


def subtree_messages(ball: CayleyBall, model: ModelSpec, z: BoundaryLawField) -> np.ndarray:
    """Normalized partial partition functions R_v(i) of each vertex's subtree.

    R_v = z_v on the boundary sphere; inside, R_v(i) = prod_c sum_j A_ij R_c(j).
    Each row is rescaled to sum to 1, which leaves every conditional unchanged.
    """
    _check_field(ball, model, z)
    A = model.activity_matrix()
    R = np.array(z.values, dtype=float)
    for v in range(ball.size - 1, -1, -1):
        kids = ball.children[v]
        if not kids:
            R[v] /= R[v].sum()
            continue
        log_r = np.zeros(model.m + 1)
        for c in kids:
            log_r += np.log(A @ R[c])
        R[v] = np.exp(log_r - log_r.max())
        R[v] /= R[v].sum()
    return R


def child_conditionals(ball: CayleyBall, model: ModelSpec, z: BoundaryLawField,
                       R: np.ndarray = None) -> np.ndarray:
    """Row-stochastic P_v[i, j] = Prob(sigma(v)=j | sigma(parent)=i) for each non-root v."""
    if R is None:
        R = subtree_messages(ball, model, z)
    A = model.activity_matrix()
    cond = A[None, :, :] * R[:, None, :]
    cond /= cond.sum(axis=2, keepdims=True)
    cond[0] = np.nan
    return cond


def _outside_messages(ball: CayleyBall, A: np.ndarray, R: np.ndarray) -> np.ndarray:
    """O_v(i): weight of everything outside v's subtree given sigma(v)=i."""
    O = np.ones_like(R)
    for v in range(ball.size):
        for c in ball.children[v]:
            into = A @ R[c]
            o = A.T @ (O[v] * R[v] / into)
            O[c] = o / o.sum()
    return O


def exact_marginal(ball: CayleyBall, model: ModelSpec, z: BoundaryLawField,
                   target: Union[int, Sequence[int]]) -> np.ndarray:
    """Site law of a vertex, or joint law of a nearest-neighbour pair (parent, child)."""
    R = subtree_messages(ball, model, z)
    A = model.activity_matrix()
    if np.ndim(target) == 0:
        v = int(target)
        if v == ball.root:
            law = R[v]
        else:
            law = R[v] * _outside_messages(ball, A, R)[v]
        return law / law.sum()
    u, v = (int(t) for t in target)
    if ball.parent[v] != u:
        if ball.parent[u] == v:
            return exact_marginal(ball, model, z, (v, u)).T
        raise ValueError(f"({u}, {v}) is not an edge of the ball")
    O = _outside_messages(ball, A, R)
    up = O[u] * R[u] / (A @ R[v])
    joint = up[:, None] * A * R[v][None, :]
    return joint / joint.sum()
