"""Three-state p-SOS model on the binary tree (k = m = 2) and its p -> infinity limit.

The step-two activity is ``s = theta^(2^p)``; ``p = math.inf`` is a legal
parameter and selects the limiting equations (s = 0 for theta != 1, s = 1 at
theta = 1), which coincide with the hardcore model's equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import PSOSOverflowError
from .roots import Root, bisect, newton_2d, positive_roots
from .ti_solver import (
    TANGENTIAL,
    SIMPLE,
    X1,
    XNE1,
    PhaseRecord,
    TISolution,
    _order,
    _reciprocal_pair,
)

THETA0_PRIME = (math.sqrt(5) - 1) / 4
NEAR_TANGENCY_RTOL = 1e-8


@dataclass(frozen=True)
class PSOSParams:
    theta: float
    p: float = math.inf

    def __post_init__(self):
        if not self.theta > 0 or not math.isfinite(self.theta):
            raise ValueError(f"theta must be positive and finite, got {self.theta}")
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")

    @property
    def s(self) -> float:
        """Activity of a height-two step, theta^(2^p)."""
        if self.theta == 1.0:
            return 1.0
        if math.isinf(self.p):
            return 0.0
        scale = 2.0 ** self.p if self.p < 1024 else math.inf
        log_s = scale * math.log(self.theta)
        if log_s < -745.0:
            return 0.0
        if log_s > 709.0:
            raise PSOSOverflowError(f"theta^(2^p) overflows for theta={self.theta}, p={self.p}")
        return math.exp(log_s)

    @property
    def q(self) -> float:
        return 1.0 - self.s


def residual_psos(x: float, y: float, params: PSOSParams) -> tuple[float, float]:
    th, s = params.theta, params.s
    den = s * x * x + th * y * y + 1.0
    return (x - (x * x + th * y * y + s) / den,
            y - (th * x * x + y * y + th) / den)


def _scaled_residual(x, y, params) -> float:
    dx, dy = residual_psos(x, y, params)
    return max(abs(dx) / max(1.0, abs(x)), abs(dy) / max(1.0, abs(y)))


def y_bridge_defect(x: float, y: float, params: PSOSParams) -> float:
    """theta y^2 - (q x - s (x^2 + 1)): zero on the x != 1 branch."""
    s = params.s
    return params.theta * y * y - ((1 - s) * x - s * (x * x + 1))


def cubic_coefficients(params: PSOSParams) -> list[float]:
    th = params.theta
    return [th, -1.0, params.s + 1.0, -2.0 * th]


def _x1_roots(params: PSOSParams) -> list[Root]:
    roots = positive_roots(cubic_coefficients(params))
    assert len(roots) <= 3
    return roots


def solve_psos_x1(params: PSOSParams) -> list[float]:
    return [r.value for r in _x1_roots(params)]


def delta0(theta: float) -> float:
    """Discriminant of the limiting cubic theta y^3 - y^2 + y - 2 theta."""
    return (4 * (1 - 3 * theta) ** 3 - (2 - 9 * theta + 54 * theta ** 3) ** 2) / (27 * theta ** 2)


def theta0() -> float:
    """The unique zero of delta0 in (0, 1), by bisection."""
    return bisect(delta0, 0.05, 0.3, rtol=1e-16)


def xi12(params: PSOSParams) -> Optional[tuple[float, float]]:
    """Closed-form (xi_1, xi_2), sorted; None when the radicand is negative."""
    th, q = params.theta, params.q
    if not 0 < th < 1:
        raise ValueError("xi12 is defined for 0 < theta < 1")
    rad = q * (q + 2 * th - 2) * ((q - th - 1) ** 2 + (th + 1) * (3 * th - 1))
    if rad < 0:
        return None
    den = (q - th - 1) * (th * q * q + (th * th - 1) * (q + th - 1))
    if den == 0:
        raise ZeroDivisionError("xi12 has a pole at these parameters")
    num = -3 * th * q * q + 2 * (th + 1) * q + 2 * (th * th - 1)
    sq = th * math.sqrt(rad)
    a, b = q / 2 * (num - sq) / den, q / 2 * (num + sq) / den
    return (a, b) if a <= b else (b, a)


def xi_limit(theta: float) -> Optional[tuple[float, float]]:
    """p -> infinity limits of (xi_1, xi_2); None where they are not real."""
    rad = (2 * theta - 1) * (4 * theta * theta + 2 * theta - 1)
    if rad < 0:
        return None
    sq = math.sqrt(rad)
    c = 2 * theta ** 3
    return ((1 - 2 * theta - sq) / c, (1 - 2 * theta + sq) / c)


def xi_quadratic(params: PSOSParams) -> tuple[float, float, float]:
    """Coefficients of the quadratic in xi = x + 1/x obeyed by x != 1 solutions."""
    th, q = params.theta, params.q
    A = th * th - 1 + q
    return (A * A + th * q * q * (1 - q),
            2 * A * q - th * q ** 3 + 2 * th * q * q * (1 - q),
            q * q - 2 * th * q ** 3)


def _xi_roots(params: PSOSParams) -> tuple[list[Root], float]:
    a, b, c = xi_quadratic(params)
    disc = b * b - 4 * a * c
    scale = b * b + 4 * abs(a * c)
    rel = abs(disc) / scale if scale else 0.0
    if rel <= 1e-12:
        return [Root(-b / (2 * a), tangential=True)], rel
    if disc < 0:
        return [], rel
    sq = math.sqrt(disc)
    qq = -0.5 * (b + math.copysign(sq, b))
    return sorted([Root(qq / a), Root(c / qq)], key=lambda r: r.value), rel


def _polish(x, y, params):
    F = lambda v: np.array(residual_psos(v[0], v[1], params))
    v = newton_2d(F, [x, y])
    return float(v[0]), float(v[1])


def _xne1(params: PSOSParams):
    th = params.theta
    if th >= 1:
        return [], 1.0
    s, q = params.s, params.q
    out = []
    roots, rel = _xi_roots(params)
    for r in roots:
        xi = r.value
        if xi <= 2:
            continue
        if (th * th - s) * xi + q <= 0 or q - s * xi <= 0:
            continue  # spurious root of the squared equation, or y^2 <= 0
        for x in _reciprocal_pair(xi):
            y = math.sqrt(x * (q - s * xi) / th)
            if not r.tangential:
                x, y = _polish(x, y, params)
            out.append((x, y, r.tangential))
    return out, rel


def _cubic_discriminant_rel(params: PSOSParams) -> float:
    a, b, c, d = cubic_coefficients(params)
    disc = 18 * a * b * c * d - 4 * b ** 3 * d + b * b * c * c - 4 * a * c ** 3 - 27 * a * a * d * d
    scale = abs(18 * a * b * c * d) + abs(4 * b ** 3 * d) + (b * c) ** 2 + abs(4 * a * c ** 3) + 27 * (a * d) ** 2
    return abs(disc) / scale


def classify_psos(theta: float, p: float = math.inf) -> PhaseRecord:
    """All translation-invariant fixed points of the k = m = 2 p-SOS system."""
    params = PSOSParams(theta, p)
    sols = []
    for r in _x1_roots(params):
        sols.append(TISolution(1.0, r.value, X1, TANGENTIAL if r.tangential else SIMPLE,
                               _scaled_residual(1.0, r.value, params)))
    pairs, xi_rel = _xne1(params)
    for x, y, tan in pairs:
        sols.append(TISolution(x, y, XNE1, TANGENTIAL if tan else SIMPLE,
                               _scaled_residual(x, y, params)))
    near = any(s.tangential for s in sols)
    if not math.isinf(p):
        near = near or min(xi_rel, _cubic_discriminant_rel(params)) < NEAR_TANGENCY_RTOL
    return PhaseRecord(theta=float(theta), k=2, solutions=_order(sols), model="p-sos",
                       p=float(p), near_tangency=near)


def expected_limit_count(theta: float) -> int:
    """Solution count of the p -> infinity limit as a step function of theta."""
    t0 = theta0()
    if theta < t0:
        return 7
    if theta == t0:
        return 6
    if theta < THETA0_PRIME:
        return 5
    if theta == THETA0_PRIME:
        return 3
    return 1
