"""Translation-invariant boundary laws of the three-state hardcore SOS model.

Solutions (x, y) with x = z0^(1/k), y = z1^(1/k) split into two branches:
x = 1, where y is a positive root of ``theta y^(k+1) - y^k + y - 2 theta``,
and x != 1, where ``theta y^k = x^(k-1) + ... + x`` ties y to x. For k = 2 the
x != 1 branch reduces to a quadratic in xi = x + 1/x; for k = 3 it reduces to
a quartic in eta = x + 1/x, which is solved through the substitution
w = (eta - 1) theta^2, E = b(eta) = a(w). ``solve_generic`` is an independent
grid-and-bisection oracle for any 2 <= k <= 6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .boundary_law import ky_bridge_defect, residual_m2, scaled_residual_m2
from .roots import (
    Root,
    bisect,
    bisect_log,
    golden_max,
    newton_2d,
    positive_roots,
    sign_changes,
)

SOLUTION_TOL = 1e-10
DEDUP_RTOL = 1e-9
# f-value window inside which a maximum touching zero counts as one double root
TANGENCY_TOL = 1e-10

X1 = "x=1"
XNE1 = "x!=1"
SIMPLE = "simple"
TANGENTIAL = "tangential"


@dataclass(frozen=True)
class TISolution:
    x: float
    y: float
    branch: str
    multiplicity: str = SIMPLE
    residual: float = 0.0

    @property
    def tangential(self) -> bool:
        return self.multiplicity == TANGENTIAL


@dataclass(frozen=True)
class PhaseRecord:
    theta: float
    k: int
    solutions: tuple
    model: str = "inf-sos"
    p: Optional[float] = None
    near_tangency: bool = False

    @property
    def count(self) -> int:
        return len(self.solutions)


@dataclass(frozen=True)
class CriticalValues:
    k: int
    theta_c: Optional[float] = None
    hat_theta_c: Optional[float] = None
    tilde_theta: Optional[float] = None
    eta_c: Optional[float] = None
    theta0: Optional[float] = None
    theta0_prime: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def transition_points(self) -> list[float]:
        pts = [self.theta_c, self.hat_theta_c, self.theta0, self.theta0_prime]
        return sorted(p for p in pts if p is not None)


# ---------------------------------------------------------------- x = 1 branch

def yk_coefficients(theta: float, k: int) -> list[float]:
    """theta y^(k+1) - y^k + y - 2 theta, highest degree first."""
    coeffs = [0.0] * (k + 2)
    coeffs[0] = theta
    coeffs[1] = -1.0
    coeffs[k] += 1.0
    coeffs[k + 1] = -2.0 * theta
    return coeffs


def x1_roots(theta: float, k: int) -> list[Root]:
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    roots = positive_roots(yk_coefficients(theta, k))
    assert len(roots) <= 3, f"more than three positive roots: {roots}"
    return roots


def solve_x1(theta: float, k: int) -> list[float]:
    """All positive y with (1, y) a fixed point, in increasing order."""
    return [r.value for r in x1_roots(theta, k)]


# --------------------------------------------------- k = 3 critical constants

CUBE = (1 + math.sqrt(2)) ** (1 / 3)
Y0 = math.sqrt(1 - CUBE + 1 / CUBE)


def alpha(y: float) -> float:
    """theta as a function of an x = 1 root y when k = 3: (y^3 - y)/(y^4 - 2)."""
    den = y ** 4 - 2
    if y <= 0:
        raise ValueError("y must be positive")
    if abs(den) < 1e-14:
        raise ZeroDivisionError("alpha has a pole at y = 2^(1/4)")
    return (y ** 3 - y) / den


def theta_c_closed() -> float:
    """Closed form of alpha at its interior stationary point y0 (k = 3)."""
    c = CUBE
    return ((1 - c * c) * math.sqrt(c * (1 + c - c * c))
            / (c ** 4 - 3 * c * c + 2 * c - 2 * math.sqrt(2) - 1))


# ------------------------------------------------------- x != 1 branch, k = 2

def _polish_pair(x: float, y: float, theta: float, k: int) -> tuple[float, float]:
    def F(v):
        return np.array(residual_m2(v[0], v[1], theta, k))
    v = newton_2d(F, [x, y])
    return float(v[0]), float(v[1])


def _reciprocal_pair(s: float) -> tuple[float, float]:
    """Roots of x^2 - s x + 1 = 0 for s > 2, computed without cancellation."""
    big = 0.5 * (s + math.sqrt(s * s - 4))
    return 1.0 / big, big


def xi_roots_k2(theta: float) -> list[Root]:
    """Real roots of theta^4 xi^2 + (2 theta^2 - theta) xi + 1 - 2 theta."""
    a, b, c = theta ** 4, 2 * theta ** 2 - theta, 1 - 2 * theta
    disc = b * b - 4 * a * c
    scale = b * b + 4 * abs(a * c)
    if abs(disc) <= 1e-12 * scale:
        return [Root(-b / (2 * a), tangential=True)]
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    return sorted([Root(q / a), Root(c / q)], key=lambda r: r.value)


def _xne1_k2(theta: float) -> list[tuple[float, float, bool]]:
    out = []
    for r in xi_roots_k2(theta):
        if r.value <= 2:
            continue
        for x in _reciprocal_pair(r.value):
            y = math.sqrt(x / theta)
            out.append((*_polish_pair(x, y, theta, 2), r.tangential))
    return out


def solve_xne1_k2(theta: float) -> list[tuple[float, float]]:
    return [(x, y) for x, y, _ in _xne1_k2(theta)]


# ------------------------------------------------------- x != 1 branch, k = 3

ETA_C = (7 + 3 * math.sqrt(57)) / 8
TILDE_THETA = 2 / math.sqrt(3 * math.sqrt(57) - 1)
A_MIN = 15 / 4
B_MIN = 21 / (1 + 2 * math.sqrt(7))


def a_of_w(w):
    return w * w + 3 * w + 1 / w


def a_prime(w):
    return 2 * w + 3 - 1 / (w * w)


def b_of_eta(eta):
    return (eta ** 3 + 7) / ((eta - 1) * (eta + 2))


def b_prime(eta):
    return (eta + 1) ** 2 * (eta ** 2 - 7) / ((eta - 1) ** 2 * (eta + 2) ** 2)


def w_branch(E: float, branch: int) -> float:
    """Inverse of a(w) = E on (0, 1/2] (branch 1) or [1/2, inf) (branch 2)."""
    if E <= A_MIN:
        return 0.5
    if branch == 1:
        lo, hi = 1.0 / E, 0.5          # a(1/E) > E >= a(1/2); a decreasing
        flo, fhi = 1.0, -1.0
    elif branch == 2:
        lo, hi = 0.5, math.sqrt(E)     # a increasing; a(sqrt E) > E
        flo, fhi = -1.0, 1.0
    else:
        raise ValueError("branch must be 1 or 2")
    return bisect(lambda w: a_of_w(w) - E, lo, hi, flo=flo, fhi=fhi, rtol=2e-16)


def w_branch_vec(E: np.ndarray, branch: int, iters: int = 200) -> np.ndarray:
    E = np.maximum(np.asarray(E, dtype=float), A_MIN)
    if branch == 1:
        lo, hi = 1.0 / E, np.full_like(E, 0.5)
    else:
        lo, hi = np.full_like(E, 0.5), np.sqrt(E)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        above = a_of_w(mid) > E
        if branch == 1:
            lo, hi = np.where(above, mid, lo), np.where(above, hi, mid)
        else:
            lo, hi = np.where(above, lo, mid), np.where(above, mid, hi)
    return 0.5 * (lo + hi)


def eta_defect(eta: float, theta: float, branch: int) -> float:
    """w_branch(b(eta)) - (eta - 1) theta^2."""
    return w_branch(b_of_eta(eta), branch) - (eta - 1) * theta * theta


def _eta_defect_vec(eta: np.ndarray, theta: float, branch: int) -> np.ndarray:
    return w_branch_vec(b_of_eta(eta), branch) - (eta - 1) * theta * theta


def _upper_bracket(f: Callable[[float], float], start: float) -> float:
    """Grow hi until f(hi) < 0 and f is decreasing there."""
    hi = start
    for _ in range(200):
        fh = f(hi)
        if fh < 0 and f(hi * 1.01) < fh:
            return hi
        hi *= 2
    raise RuntimeError("could not bracket the eta defect from above")


def eta_roots_k3(theta: float) -> list[Root]:
    """All eta >= eta_c solving either branch equation, merged and deduplicated."""
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    found: list[Root] = []

    f1 = lambda e: eta_defect(e, theta, 1)
    f2 = lambda e: eta_defect(e, theta, 2)

    # branch 1: decreasing from f1(eta_c) = 1/2 - (eta_c - 1) theta^2
    f1c = 0.5 - (ETA_C - 1) * theta * theta
    if abs(f1c) <= TANGENCY_TOL:
        found.append(Root(ETA_C))
    elif f1c > 0:
        hi = _upper_bracket(f1, 2 * ETA_C)
        found.append(Root(bisect_log(f1, ETA_C, hi, flo=f1c)))

    # branch 2: rises from f2(eta_c) = f1c, then decreases without bound
    hi = _upper_bracket(f2, 2 * ETA_C)
    grid = np.geomspace(ETA_C, hi, 400)
    vals = _eta_defect_vec(grid, theta, 2)
    i = int(np.argmax(vals))
    lo_b, hi_b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    peak = golden_max(f2, lo_b, hi_b)
    fpeak = f2(peak)
    if abs(fpeak) <= TANGENCY_TOL:
        found.append(Root(peak, tangential=True))
    elif fpeak > 0:
        if abs(f1c) <= TANGENCY_TOL:
            pass  # eta_c itself, already recorded
        elif f1c < 0:
            found.append(Root(bisect_log(f2, ETA_C, peak, flo=f1c, fhi=fpeak)))
        found.append(Root(bisect_log(f2, peak, hi, flo=fpeak)))

    found.sort(key=lambda r: r.value)
    merged: list[Root] = []
    for r in found:
        if merged and abs(r.value - merged[-1].value) <= DEDUP_RTOL * r.value:
            continue
        merged.append(r)
    return merged


def _xne1_k3(theta: float) -> list[tuple[float, float, bool]]:
    out = []
    for r in eta_roots_k3(theta):
        if r.value <= 2:
            continue
        for x in _reciprocal_pair(r.value):
            y = ((x * x + x) / theta) ** (1 / 3)
            if r.tangential:
                out.append((x, y, True))
            else:
                out.append((*_polish_pair(x, y, theta, 3), False))
    return out


def solve_xne1_k3(theta: float) -> list[tuple[float, float]]:
    return [(x, y) for x, y, _ in _xne1_k3(theta)]


def x8_coefficients(theta: float) -> list[float]:
    """Palindromic degree-8 polynomial in x for the k = 3, x != 1 branch."""
    t2, t4, t6 = theta ** 2, theta ** 4, theta ** 6
    c7 = -t6 + 3 * t4 - t2
    c5 = 2 * t6 - 3 * t2 + 1
    c4 = -2 * t6 + 6 * t4 - 7 * t2 + 2
    return [t6, c7, t6, c5, c4, c5, t6, c7, t6]


def eta_quartic_coefficients(theta: float) -> list[float]:
    t2, t4, t6 = theta ** 2, theta ** 4, theta ** 6
    return [t6, -t6 + 3 * t4 - t2, -3 * t6, 5 * t6 - 9 * t4 + 1, -2 * t6 + 6 * t4 - 7 * t2 + 2]


def x8_sign_changes(theta: float) -> int:
    return sign_changes(x8_coefficients(theta))


# the x^5 / x^3 coefficient 2 t^3 - 3 t + 1 (t = theta^2) changes sign here
THETA_C_DOUBLE_PRIME = math.sqrt((math.sqrt(3) - 1) / 2)


def structural_constants_k3() -> tuple[float, float, float, float]:
    """(eta_c, tilde_theta, min of a, minimum of b on eta > sqrt 7)."""
    return ETA_C, TILDE_THETA, A_MIN, B_MIN


# ------------------------------------------------------------- hat theta_c

@dataclass(frozen=True)
class HatThetaResult:
    newton: Optional[float]
    bisection: float
    eta1: Optional[float]

    @property
    def value(self) -> float:
        return self.newton if self.newton is not None else self.bisection

    @property
    def delta(self) -> Optional[float]:
        return None if self.newton is None else abs(self.newton - self.bisection)


def _w2_slope(eta: float) -> float:
    """d/d eta of w_2(b(eta))."""
    w = w_branch(b_of_eta(eta), 2)
    return b_prime(eta) / a_prime(w)


def _peak_defect(theta: float) -> float:
    """max over eta >= eta_c of w_2(b(eta)) - (eta - 1) theta^2."""
    f2 = lambda e: eta_defect(e, theta, 2)
    hi = _upper_bracket(f2, 2 * ETA_C)
    grid = np.geomspace(ETA_C, hi, 200)
    i = int(np.argmax(_eta_defect_vec(grid, theta, 2)))
    peak = golden_max(f2, grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)])
    return f2(peak)


def hat_theta_c_bisection() -> float:
    """Largest theta at which the x != 1 branch still has a root (peak defect = 0)."""
    return bisect(_peak_defect, TILDE_THETA, 0.6, rtol=1e-15)


def hat_theta_c(seed: tuple[float, float] = (5.0, 0.48)) -> HatThetaResult:
    """Tangency of w_2(b(eta)) with the line (eta - 1) theta^2, two ways.

    Newton solves {w_2(b(eta)) = (eta - 1) theta^2, d/deta w_2(b(eta)) = theta^2}
    for (eta, theta); bisection finds where the peak defect changes sign.
    """
    ref = hat_theta_c_bisection()

    def F(v):
        eta, th = v
        if eta <= ETA_C or th <= 0:
            return np.array([np.inf, np.inf])
        return np.array([eta_defect(eta, th, 2), _w2_slope(eta) - th * th])

    v = newton_2d(F, seed, steps=30)
    newton = eta1 = None
    if np.all(np.isfinite(F(v))) and np.max(np.abs(F(v))) < 1e-12 and abs(v[1] - ref) < 1e-3:
        eta1, newton = float(v[0]), float(v[1])
    return HatThetaResult(newton=newton, bisection=ref, eta1=eta1)


# ---------------------------------------------------------- generic oracle

def _generic_defect(x: np.ndarray, theta: float, k: int) -> np.ndarray:
    """Second equation with y eliminated through theta y^k = x^(k-1) + ... + x."""
    S = np.zeros_like(x)
    for j in range(1, k):
        S = S + x ** j
    y = (S / theta) ** (1.0 / k)
    return y - (theta * x ** k + S / theta + theta) / (S + 1)


def solve_generic(theta: float, k: int, points_per_decade: int = 16_667) -> list[tuple[float, float]]:
    """All positive fixed points by log-grid sign scan plus bisection, any 2 <= k <= 6."""
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if not 2 <= k <= 6:
        raise ValueError(f"k must be in [2, 6], got {k}")
    # x != 1 roots grow like theta^-(k+1); widen the symmetric window to cover them
    decades = max(6.0, math.log10(100.0) + (k + 1) * max(0.0, -math.log10(theta)))
    npts = max(200_000, int(2 * decades * points_per_decade))
    grid = np.logspace(-decades, decades, npts)
    with np.errstate(over="ignore", invalid="ignore"):
        g = _generic_defect(grid, theta, k)
    ok = np.isfinite(g)
    sgn = np.sign(g)
    cand: list[tuple[float, float]] = []
    flips = np.nonzero(ok[:-1] & ok[1:] & (sgn[:-1] * sgn[1:] < 0))[0]
    exact = np.nonzero(ok & (g == 0))[0]
    f = lambda t: float(_generic_defect(np.array([t]), theta, k)[0])
    xs = [bisect_log(f, grid[i], grid[i + 1], flo=g[i], fhi=g[i + 1]) for i in flips]
    xs += [float(grid[i]) for i in exact]
    for x in xs:
        S = sum(x ** j for j in range(1, k))
        y = (S / theta) ** (1.0 / k)
        cand.append(_polish_pair(x, y, theta, k))
    cand += [(1.0, y) for y in solve_x1(theta, k)]
    out = [(x, y) for x, y in _dedup(cand) if scaled_residual_m2(x, y, theta, k) <= SOLUTION_TOL]
    return sorted(out)


def _close(a: tuple[float, float], b: tuple[float, float], rtol: float) -> bool:
    return all(abs(u - v) <= rtol * max(1.0, abs(u), abs(v)) for u, v in zip(a, b))


def _dedup(pairs, rtol: float = DEDUP_RTOL):
    out = []
    for p in sorted(pairs):
        if not any(_close(p, q, rtol) for q in out):
            out.append(p)
    return out


# ---------------------------------------------------------------- classify

def _make_solution(x, y, theta, k, branch, tangential) -> TISolution:
    return TISolution(x=float(x), y=float(y), branch=branch,
                      multiplicity=TANGENTIAL if tangential else SIMPLE,
                      residual=scaled_residual_m2(x, y, theta, k))


def _order(sols: list[TISolution]) -> tuple:
    x1 = sorted((s for s in sols if s.branch == X1), key=lambda s: -s.y)
    rest = sorted((s for s in sols if s.branch != X1), key=lambda s: s.x)
    return tuple(x1 + rest)


def classify(theta: float, k: int, method: str = "auto") -> PhaseRecord:
    """All translation-invariant fixed points at (theta, k), tangential roots counted once.

    ``method`` is ``"closed"`` (k in {2, 3}), ``"generic"`` (grid oracle) or
    ``"auto"``, which picks the closed form whenever it exists.
    """
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if method == "auto":
        method = "closed" if k in (2, 3) else "generic"
    sols = [_make_solution(1.0, r.value, theta, k, X1, r.tangential) for r in x1_roots(theta, k)]
    if method == "closed":
        if k == 2:
            pairs = _xne1_k2(theta)
        elif k == 3:
            pairs = _xne1_k3(theta)
        else:
            raise ValueError(f"no closed-form x != 1 solver for k={k}")
        sols += [_make_solution(x, y, theta, k, XNE1, t) for x, y, t in pairs]
    elif method == "generic":
        for x, y in solve_generic(theta, k):
            if abs(x - 1.0) > 1e-12:
                sols.append(_make_solution(x, y, theta, k, XNE1, False))
    else:
        raise ValueError(f"unknown method {method!r}")
    return PhaseRecord(theta=float(theta), k=int(k), solutions=_order(sols))


def count_transition(count: Callable[[float], int], lo: float, hi: float,
                     tol: float = 1e-13) -> float:
    """Bisect the point where an integer-valued count changes between lo and hi."""
    c_lo = count(lo)
    if count(hi) == c_lo:
        raise ValueError("count does not change on the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if count(mid) == c_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def theta_c_numeric() -> float:
    """k = 3 critical value from the x = 1 root count switching from 3 to 1."""
    return count_transition(lambda t: len(solve_x1(t, 3)) >= 3, 0.1, 0.3)


def critical_values(k: int) -> CriticalValues:
    from .psos_limit import THETA0_PRIME, theta0

    if k == 3:
        hat = hat_theta_c()
        return CriticalValues(k=3, theta_c=theta_c_closed(), hat_theta_c=hat.value,
                              tilde_theta=TILDE_THETA, eta_c=ETA_C,
                              extra={"y0": Y0, "hat_theta_c_bisection": hat.bisection,
                                     "eta1": hat.eta1})
    if k == 2:
        return CriticalValues(k=2, theta0=theta0(), theta0_prime=THETA0_PRIME)
    return CriticalValues(k=k)


__all__ = [
    "CriticalValues", "PhaseRecord", "TISolution", "alpha", "classify", "critical_values",
    "eta_roots_k3", "hat_theta_c", "ky_bridge_defect", "solve_generic", "solve_x1",
    "solve_xne1_k2", "solve_xne1_k3", "structural_constants_k3", "theta_c_closed",
]
