import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sos_tree.roots import (
    bisect,
    bisect_log,
    cauchy_bound,
    golden_max,
    newton_2d,
    positive_roots,
    real_roots,
    sign_changes,
)


def test_bisect_and_log():
    assert bisect(lambda t: t * t - 2, 1, 2) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert bisect_log(lambda t: math.log(t) - 30, 1.0, 1e20) == pytest.approx(math.exp(30), rel=1e-13)
    with pytest.raises(ValueError):
        bisect(lambda t: t * t + 1, -1, 1)


def test_golden_max():
    assert golden_max(lambda t: -(t - 0.3) ** 2, 0, 1) == pytest.approx(0.3, abs=1e-7)


def test_double_root_reported_once():
    # (x - 1)^2 (x - 3) = x^3 - 5x^2 + 7x - 3
    roots = positive_roots([1, -5, 7, -3])
    assert len(roots) == 2
    assert roots[0].tangential and roots[0].value == pytest.approx(1.0, abs=1e-7)
    assert not roots[1].tangential and roots[1].value == pytest.approx(3.0, rel=1e-14)


def test_sign_changes_and_bound():
    assert sign_changes([1, -5, 7, -3]) == 3
    assert sign_changes([1, 0, 0, 2]) == 0
    assert cauchy_bound([2, -4, 2]) == 3.0


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=5, unique=True))
@settings(max_examples=80, deadline=None)
def test_real_roots_match_numpy(rts):
    rts = sorted(rts)
    if min(np.diff(rts)) < 1e-2:
        return
    coeffs = np.poly(rts)
    got = [r.value for r in real_roots(coeffs, -10, 10)]
    assert len(got) == len(rts)
    assert np.allclose(got, rts, atol=1e-9)


def test_newton_2d():
    F = lambda v: np.array([v[0] ** 2 + v[1] ** 2 - 2, v[0] - v[1]])
    v = newton_2d(F, [1.3, 0.8], steps=20)
    assert np.allclose(v, [1, 1], atol=1e-12)
