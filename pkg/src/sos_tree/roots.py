"""Real root isolation for low-degree polynomials and scalar bracketing.

Roots of p are isolated between consecutive real critical points (roots of
p', found recursively), where p is monotone. A critical point at which p
vanishes to rounding accuracy is reported once, as a tangential root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Root:
    value: float
    tangential: bool = False


def bisect(f: Callable[[float], float], lo: float, hi: float, *, flo: float = None,
           fhi: float = None, rtol: float = 4 * EPS, max_iter: int = 400) -> float:
    """Bisection on a bracket with a strict sign change, to relative width ``rtol``."""
    flo = f(lo) if flo is None else flo
    fhi = f(hi) if fhi is None else fhi
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ValueError(f"no sign change on [{lo}, {hi}]: f={flo}, {fhi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * max(abs(lo), abs(hi)) or mid in (lo, hi):
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bisect_log(f: Callable[[float], float], lo: float, hi: float, **kw) -> float:
    """Bisection in log-coordinates for brackets spanning many decades."""
    g = lambda s: f(math.exp(s))
    return math.exp(bisect(g, math.log(lo), math.log(hi), **kw))


def golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-13,
               max_iter: int = 300) -> float:
    """Argmax of a unimodal function on [lo, hi] by golden-section search."""
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a), abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return c if fc >= fd else d


def polyval(coeffs: Sequence[float], x: float) -> float:
    acc = 0.0
    for c in coeffs:
        acc = acc * x + c
    return acc


def _scale(coeffs: Sequence[float], x: float) -> float:
    ax = abs(x)
    return polyval([abs(c) for c in coeffs], ax)


def _derivative(coeffs: Sequence[float]) -> list[float]:
    deg = len(coeffs) - 1
    return [c * (deg - i) for i, c in enumerate(coeffs[:-1])]


def _trim(coeffs: Sequence[float]) -> list[float]:
    coeffs = [float(c) for c in coeffs]
    while coeffs and coeffs[0] == 0.0:
        coeffs.pop(0)
    return coeffs


def cauchy_bound(coeffs: Sequence[float]) -> float:
    c = _trim(coeffs)
    return 1.0 + max(abs(a / c[0]) for a in c[1:]) if len(c) > 1 else 0.0


def sign_changes(coeffs: Sequence[float]) -> int:
    signs = [c > 0 for c in coeffs if c != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _newton_polish(coeffs, d1, r, lo, hi, steps=3):
    best, fbest = r, abs(polyval(coeffs, r))
    for _ in range(steps):
        slope = polyval(d1, best)
        if slope == 0:
            break
        cand = best - polyval(coeffs, best) / slope
        if not lo <= cand <= hi:
            break
        fc = abs(polyval(coeffs, cand))
        if fc >= fbest:
            break
        best, fbest = cand, fc
    return best


def real_roots(coeffs: Sequence[float], lo: float, hi: float, tangency_rtol: float = 1e-12) -> list[Root]:
    """All real roots of a polynomial (highest degree first) in the open interval (lo, hi)."""
    c = _trim(coeffs)
    deg = len(c) - 1
    if deg <= 0:
        return []
    if deg == 1:
        r = -c[1] / c[0]
        return [Root(r)] if lo < r < hi else []
    d1 = _derivative(c)
    crit = [r.value for r in real_roots(d1, lo, hi, tangency_rtol)]
    found: list[Root] = []
    pts = [lo] + crit + [hi]
    vals = [polyval(c, t) for t in pts]
    for i in range(1, len(pts) - 1):
        if abs(vals[i]) <= tangency_rtol * _scale(c, pts[i]):
            vals[i] = 0.0
            found.append(Root(pts[i], tangential=True))
    for a, b, fa, fb in zip(pts[:-1], pts[1:], vals[:-1], vals[1:]):
        if fa == 0 or fb == 0 or (fa > 0) == (fb > 0):
            continue
        r = bisect(lambda t: polyval(c, t), a, b, flo=fa, fhi=fb)
        found.append(Root(_newton_polish(c, d1, r, a, b)))
    found.sort(key=lambda r: r.value)
    return found


def positive_roots(coeffs: Sequence[float], tangency_rtol: float = 1e-12) -> list[Root]:
    """Positive real roots, each tangential (even-multiplicity) root reported once."""
    return real_roots(coeffs, 0.0, cauchy_bound(coeffs) * (1 + 1e-9), tangency_rtol)


def newton_2d(F: Callable[[np.ndarray], np.ndarray], x0: Sequence[float], *,
              jac: Callable[[np.ndarray], np.ndarray] = None, steps: int = 8) -> np.ndarray:
    """Newton polish of a 2-d system; keeps the best iterate by max-norm."""
    x = np.asarray(x0, dtype=float)
    best, fbest = x.copy(), np.max(np.abs(F(x)))
    for _ in range(steps):
        fx = F(x)
        if jac is not None:
            J = jac(x)
        else:
            J = np.empty((2, 2))
            for j in range(2):
                h = 1e-7 * max(1.0, abs(x[j]))
                e = np.zeros(2)
                e[j] = h
                J[:, j] = (F(x + e) - F(x - e)) / (2 * h)
        try:
            step = np.linalg.solve(J, fx)
        except np.linalg.LinAlgError:
            break
        x = x - step
        if not np.all(np.isfinite(x)):
            break
        fn = np.max(np.abs(F(x)))
        if fn < fbest:
            best, fbest = x.copy(), fn
        else:
            break
    return best
