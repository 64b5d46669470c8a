"""Residuals of the boundary-law fixed-point equations.

Normalization is at the top spin: every vector has ``z[m] == 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gibbs_oracle import BoundaryLawField, _check_field
from .lattice import ActivitySpec, CayleyBall, ModelSpec


@dataclass(frozen=True)
class TIBoundaryLaw:
    """Translation-invariant boundary law ``z`` with ``z[m] == 1``."""

    z: tuple

    def __post_init__(self):
        z = tuple(float(v) for v in self.z)
        if len(z) < 2:
            raise ValueError("need at least two spin values")
        if any(not v > 0 for v in z):
            raise ValueError(f"boundary law entries must be positive, got {z}")
        if abs(z[-1] - 1.0) > 1e-12:
            raise ValueError(f"boundary law must be normalized at the top spin, got z_m={z[-1]}")
        object.__setattr__(self, "z", z)

    @property
    def m(self) -> int:
        return len(self.z) - 1

    @classmethod
    def from_xy(cls, x: float, y: float, k: int) -> "TIBoundaryLaw":
        """m = 2 law with z = (x^k, y^k, 1)."""
        return cls((x ** k, y ** k, 1.0))

    def xy(self, k: int) -> tuple[float, float]:
        if self.m != 2:
            raise ValueError("reduced (x, y) coordinates exist only for m = 2")
        return self.z[0] ** (1.0 / k), self.z[1] ** (1.0 / k)


def _ratio_map(A: np.ndarray, z: np.ndarray) -> np.ndarray:
    """(A z)_i / (A z)_m for every i < m."""
    Az = A @ z
    return Az[:-1] / Az[-1]


def residual_general(ball: CayleyBall, model: ModelSpec, z: BoundaryLawField) -> float:
    """Max defect of the per-vertex system over internal vertices other than the root.

    The boundary law lives on V minus the root, so the root's k+1 successors
    impose nothing; each other internal vertex has k successors.
    """
    _check_field(ball, model, z)
    vals = z.values
    if not np.allclose(vals[:, -1], 1.0, rtol=0, atol=1e-12):
        raise ValueError("boundary law field must be normalized at the top spin")
    A = model.activity_matrix()
    worst = 0.0
    for v in range(1, ball.size):
        kids = ball.children[v]
        if not kids:
            continue
        rhs = np.ones(model.m)
        for c in kids:
            rhs *= _ratio_map(A, vals[c])
        worst = max(worst, float(np.max(np.abs(vals[v, :-1] - rhs))))
    return worst


def ti_defects(z: Sequence[float], model: ModelSpec, k: int) -> np.ndarray:
    """Signed defects z_i - ((A z)_i / (A z)_m)^k for i < m."""
    z = np.asarray(z, dtype=float)
    return z[:-1] - _ratio_map(model.activity_matrix(), z) ** k


def residual_ti(z: TIBoundaryLaw, theta: float, k: int, p: float = None) -> float:
    """Max absolute defect of the translation-invariant system.

    ``p=None`` is the hardcore model; a number selects the p-SOS activities.
    """
    model = ModelSpec(m=z.m, activity=ActivitySpec(theta, p))
    return float(np.max(np.abs(ti_defects(z.z, model, k))))


def residual_m2(x: float, y: float, theta: float, k: int) -> tuple[float, float]:
    """Signed defects of the reduced m = 2 pair in (x, y) = (z0^(1/k), z1^(1/k))."""
    xk, yk = x ** k, y ** k
    den = theta * yk + 1.0
    return x - (xk + theta * yk) / den, y - (theta * xk + yk + theta) / den


def scaled_residual_m2(x: float, y: float, theta: float, k: int) -> float:
    """Max defect with each component divided by max(1, |coordinate|).

    Solutions with x of order theta^-(k+1) carry absolute rounding errors far
    above 1e-10, so acceptance uses this relative form.
    """
    dx, dy = residual_m2(x, y, theta, k)
    return max(abs(dx) / max(1.0, abs(x)), abs(dy) / max(1.0, abs(y)))


def ky_bridge_defect(x: float, y: float, theta: float, k: int) -> float:
    """theta y^k - (x^(k-1) + ... + x): vanishes on the x != 1 branch."""
    return theta * y ** k - sum(x ** j for j in range(1, k))


def ti_map(z: Sequence[float], model: ModelSpec, k: int) -> np.ndarray:
    """One step of the recursion: the law of a vertex whose k successors all carry z."""
    z = np.asarray(z, dtype=float)
    return np.append(_ratio_map(model.activity_matrix(), z) ** k, 1.0)


def solve_two_periodic(theta: float, k: int, seed: Sequence[float] = None, m: int = 2,
                       burn_in: int = 3000) -> tuple[np.ndarray, np.ndarray]:
    """A depth-alternating boundary law (a, b) with b = T(a), a = T(b), a != b.

    The recursion T is iterated from ``seed`` to land near an attracting
    2-cycle, then the cycle is polished by Newton in log-coordinates.
    Raises ``ValueError`` if the iteration settles on a fixed point instead.
    """
    model = ModelSpec.inf_sos(theta, m)
    z = np.ones(m + 1) if seed is None else np.append(np.asarray(seed, dtype=float)[:m], 1.0)
    for _ in range(burn_in):
        z = ti_map(z, model, k)

    def F(u):
        a = np.append(np.exp(u), 1.0)
        return np.log(ti_map(ti_map(a, model, k), model, k)[:-1]) - u

    u = np.log(z[:-1])
    for _ in range(50):
        f = F(u)
        if np.max(np.abs(f)) < 1e-15:
            break
        J = np.empty((m, m))
        for j in range(m):
            h = 1e-7
            e = np.zeros(m)
            e[j] = h
            J[:, j] = (F(u + e) - F(u - e)) / (2 * h)
        u = u - np.linalg.solve(J, f)
    a = np.append(np.exp(u), 1.0)
    b = ti_map(a, model, k)
    if np.max(np.abs(np.log(a / b))) < 1e-6:
        raise ValueError(f"no 2-cycle reached from this seed at theta={theta}, k={k}")
    return a, b
