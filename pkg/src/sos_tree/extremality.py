"""Transition matrices of translation-invariant SGMs and the Kesten-Stigum test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ti_solver import SOLUTION_TOL, X1, TISolution

BOUNDARY_TOL = 1e-9
NON_EXTREMAL = "non-extremal"
INCONCLUSIVE = "ks-inconclusive"
BOUNDARY = "boundary"


class SpectrumError(ArithmeticError):
    """The non-unit eigenvalues came out complex, which a reversible chain forbids."""


@dataclass(frozen=True)
class TransitionMatrix:
    P: np.ndarray
    x: float
    y: float
    theta: float
    k: int
    det: float = math.nan      # det P from the factored determinant of the unnormalized rows

    def stationary(self) -> np.ndarray:
        """Left Perron vector; for this birth-death chain detailed balance gives it exactly."""
        P = self.P
        if P[1, 0] == 0 or P[2, 1] == 0:
            raise ValueError("chain is reducible at theta = 0")
        pi = np.array([1.0, P[0, 1] / P[1, 0], P[0, 1] / P[1, 0] * P[1, 2] / P[2, 1]])
        return pi / pi.sum()


def transition_matrix(x: float, y: float, theta: float, k: int, s: float = 0.0) -> TransitionMatrix:
    """Row-normalized a_ij z_j with z = (x^k, y^k, 1).

    ``s`` is the activity of a height-two step: 0 for the hardcore model,
    theta^(2^p) for p-SOS.
    """
    if not (x > 0 and y > 0 and theta >= 0):
        raise ValueError("x, y must be positive and theta nonnegative")
    xk, yk = x ** k, y ** k
    rows = np.array([
        [xk, theta * yk, s],
        [theta * xk, yk, theta],
        [s * xk, theta * yk, 1.0],
    ])
    sums = rows.sum(axis=1)
    P = rows / sums[:, None]
    P.setflags(write=False)
    # det rows = x^k y^k (1 - 2 theta^2 + 2 theta^2 s - s^2), free of cancellation
    det = xk * yk * (1 - 2 * theta * theta + 2 * theta * theta * s - s * s) / np.prod(sums)
    return TransitionMatrix(P=P, x=float(x), y=float(y), theta=float(theta), k=int(k), det=float(det))


def eigen_closed_x1(y: float, theta: float, k: int) -> tuple[float, float]:
    """Non-unit eigenvalues (lambda_1, lambda_2) of the x = 1 matrix in closed form."""
    u = y ** k
    lam1 = (1 - 2 * theta * theta) * u / (theta * u * u + (2 * theta * theta + 1) * u + 2 * theta)
    lam2 = 1 / (theta * u + 1)
    return lam1, lam2


def eigenvalues_numeric(tm: TransitionMatrix) -> tuple[float, float, float]:
    """(1, lambda_1, lambda_2) with lambda_1 <= lambda_2, without the closed forms.

    The unit eigenvalue (right eigenvector of all ones) is deflated by passing
    to the quotient space modulo that vector, where P acts as the 2x2 matrix
    B_ij = P_ij - P_2j. Its characteristic quadratic is solved in closed form.
    Reading the coefficients off B avoids the cancellation that trace and
    principal minors of P suffer when both remaining eigenvalues are tiny.
    When det B loses more than three digits to cancellation (one eigenvalue
    tiny) and the matrix carries its factored determinant, that product of
    the two eigenvalues is used instead. Near-equal eigenvalues keep det B,
    since the discriminant there needs b and c from the same matrix.
    """
    P = np.asarray(tm.P if isinstance(tm, TransitionMatrix) else tm, dtype=float)
    det = tm.det if isinstance(tm, TransitionMatrix) else math.nan
    B = P[:2, :2] - P[2, :2][None, :]
    # lambda^2 + b lambda + c
    b = -(B[0, 0] + B[1, 1])
    c = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
    if math.isfinite(det) and abs(c) < 1e-3 * (abs(B[0, 0] * B[1, 1]) + abs(B[0, 1] * B[1, 0])):
        c = det
    disc = b * b - 4 * c
    if disc < 0:
        if disc < -1e-10 * max(1.0, b * b):
            raise SpectrumError(f"complex eigenvalues, discriminant {disc}")
        disc = 0.0
    sq = math.sqrt(disc)
    if b == 0 and sq == 0:
        r1 = r2 = 0.0
    else:
        q = -0.5 * (b + math.copysign(sq, b))
        r1, r2 = q, (c / q if q != 0 else 0.0)
    lo, hi = sorted((r1, r2))
    return 1.0, lo, hi


@dataclass(frozen=True)
class KSVerdict:
    lambda1: float
    lambda2: float
    eta: float                 # k * (second-largest modulus)^2 - 1
    eta_lambda2: float         # k * lambda2^2 - 1
    k: int

    @property
    def in_K(self) -> bool:
        return self.eta > 0

    @property
    def verdict(self) -> str:
        if self.eta > BOUNDARY_TOL:
            return NON_EXTREMAL
        if self.eta < -BOUNDARY_TOL:
            return INCONCLUSIVE
        return BOUNDARY

    @property
    def disagreement(self) -> bool:
        """True when the lambda_2-based and modulus-based criteria differ in sign."""
        return (self.eta > 0) != (self.eta_lambda2 > 0)


def kesten_stigum(solution: TISolution, theta: float, k: int, check_residual: bool = True,
                  s: float = 0.0) -> KSVerdict:
    if check_residual and solution.residual > SOLUTION_TOL:
        raise ValueError(f"solution residual {solution.residual:.2e} exceeds {SOLUTION_TOL}")
    tm = transition_matrix(solution.x, solution.y, theta, k, s)
    _, lam1, lam2 = eigenvalues_numeric(tm)
    if solution.branch == X1 and theta < 1 and s == 0.0:
        c1, c2 = eigen_closed_x1(solution.y, theta, k)
        assert abs(c1) <= c2 * (1 + 1e-12), "second eigenvalue ordering violated on the x = 1 branch"
        lam1, lam2 = c1, c2
    lam = max(abs(lam1), abs(lam2))
    return KSVerdict(lambda1=lam1, lambda2=lam2, eta=k * lam * lam - 1,
                     eta_lambda2=k * lam2 * lam2 - 1, k=k)


# k = 3: above this theta the x = 1 root y > 2^(1/4) fails the condition
KS_THRESHOLD_K3 = (math.sqrt(3) - 1) / 8 ** 0.25
