import itertools

import numpy as np
import pytest
from hypothesis import settings

# fixed example sequence so every run exercises the same cases
settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")


def brute_force_measure(k, n, theta, z, m=2, p=None):
    """Independent enumeration over all (m+1)^|V| assignments with explicit loops."""
    from sos_tree.lattice import build_ball

    ball = build_ball(k, n)
    edges = [(int(ball.parent[v]), v) for v in range(1, ball.size)]
    leaves = list(ball.sphere(n))
    out = {}
    for s in itertools.product(range(m + 1), repeat=ball.size):
        w = 1.0
        for a, b in edges:
            d = abs(s[a] - s[b])
            if p is None:
                w *= 1.0 if d == 0 else (theta if d == 1 else 0.0)
            else:
                w *= theta ** (d ** p)
        if w == 0.0:
            continue
        for v in leaves:
            w *= z[s[v]]
        out[s] = w
    Z = sum(out.values())
    return {s: w / Z for s, w in out.items()}, Z


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
