import io

import numpy as np
import pytest

from sos_tree.chain_sim import (
    chi_square,
    empirical_stats,
    product_law,
    read_batch,
    sample,
    solution_field,
    substream,
    write_batch,
)
from sos_tree.extremality import transition_matrix
from sos_tree.gibbs_oracle import child_conditionals, exact_marginal, finite_measure
from sos_tree.lattice import ModelSpec, build_ball, hinge_graph, is_admissible
from sos_tree.ti_solver import TISolution, classify


def setup(k, n, theta, index=0):
    ball = build_ball(k, n)
    model = ModelSpec.inf_sos(theta)
    sol = classify(theta, k).solutions[index]
    return ball, model, sol


def within_sigma(freq, prob, count, nsigma=4):
    sigma = np.sqrt(prob * (1 - prob) / count)
    return np.all(np.abs(freq - prob) <= nsigma * sigma + 1e-12)


def test_root_only():
    ball, model, sol = setup(2, 0, 0.5)
    batch = sample(ball, model, sol, 100_000, 7)
    law = exact_marginal(ball, model, solution_field(ball, sol), 0)
    assert within_sigma(empirical_stats(batch)["site"][0], law, batch.count)


def test_degenerate_theta():
    ball, model, sol = setup(2, 2, 1e-9)
    batch = sample(ball, model, sol, 2000, 3)
    assert np.all(batch.configs == batch.configs[:, :1])


def test_chi_square_against_enumeration():
    ball, model, sol = setup(2, 1, 0.5)
    batch = sample(ball, model, sol, 1_000_000, 42)
    mu = finite_measure(ball, model, solution_field(ball, sol))
    assert len(mu.configs) == 43   # of the 81 candidates, the rest have weight 0
    _, pvalue, dof = chi_square(batch, mu)
    assert dof == 42 and pvalue > 0.001


def test_empirical_stats():
    ball, model, sol = setup(2, 2, 0.2, 1)
    batch = sample(ball, model, sol, 50_000, 11)
    st = empirical_stats(batch)
    for law in st["site"].values():
        assert law.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all((0 <= law) & (law <= 1))
    assert st["pair"].sum() == pytest.approx(1.0, abs=1e-12)
    assert st["pair"][0, 2] == 0 and st["pair"][2, 0] == 0
    z = solution_field(ball, sol)
    depth1 = np.mean([exact_marginal(ball, model, z, v) for v in ball.sphere(1)], axis=0)
    assert within_sigma(st["site"][1], depth1, batch.count * 3)


def test_constant_batch_stats():
    ball, model, sol = setup(2, 1, 1e-9)
    st = empirical_stats(sample(ball, model, sol, 1000, 5))
    assert np.count_nonzero(np.diag(st["pair"])) >= 1
    assert st["pair"].trace() == pytest.approx(1.0)


def test_empty_batch_rejected():
    ball, model, sol = setup(2, 1, 0.5)
    with pytest.raises(ValueError):
        empirical_stats(sample(ball, model, sol, 0, 1))


def test_conditional_matrix_agreement():
    for theta, k in [(0.2, 2), (0.1, 3), (0.45, 3)]:
        ball = build_ball(k, 3)
        model = ModelSpec.inf_sos(theta)
        for sol in classify(theta, k).solutions:
            cond = child_conditionals(ball, model, solution_field(ball, sol))
            P = transition_matrix(sol.x, sol.y, theta, k).P
            for v in range(1, ball.size):
                assert np.max(np.abs(cond[v] - P)) <= 1e-12


def test_product_law_identity():
    for theta in (0.1, 0.3, 0.5):
        ball, model, _ = setup(2, 1, theta)
        for sol in classify(theta, 2).solutions:
            z = solution_field(ball, sol)
            mu = finite_measure(ball, model, z)
            assert np.max(np.abs(product_law(ball, model, z, mu.configs) - mu.probs)) <= 1e-12


def test_reproducible_across_threads():
    ball, model, sol = setup(3, 2, 0.3, 2)
    a = sample(ball, model, sol, 200_000, 99, threads=1)
    b = sample(ball, model, sol, 200_000, 99, threads=4)
    c = sample(ball, model, sol, 200_000, 100, threads=1)
    assert np.array_equal(a.configs, b.configs)
    assert not np.array_equal(a.configs, c.configs)


def test_samples_admissible():
    ball, model, sol = setup(3, 2, 0.3)
    batch = sample(ball, model, sol, 5000, 1)
    g = hinge_graph(2)
    assert all(is_admissible(g, ball, row) for row in batch.configs)


def test_substreams_independent():
    a = substream(1, 0, 0).random(4)
    b = substream(1, 1, 0).random(4)
    c = substream(1, 0, 1).random(4)
    assert not np.allclose(a, b) and not np.allclose(a, c)
    assert np.array_equal(a, substream(1, 0, 0).random(4))


def test_write_read_roundtrip():
    ball, model, sol = setup(2, 2, 0.5)
    batch = sample(ball, model, sol, 100, 3)
    buf = io.StringIO()
    write_batch(batch, buf, {"seed": 3})
    text = buf.getvalue()
    assert text.startswith("# seed: 3\n")
    assert all(len(line) == ball.size for line in text.splitlines()[1:])
    assert np.array_equal(read_batch(text), batch.configs)


def test_sample_preconditions():
    ball, model, _ = setup(2, 1, 0.5)
    with pytest.raises(ValueError):
        sample(ball, model, TISolution(1.0, 2.0, "x=1", residual=1.0), 10, 1)
    sol = classify(0.5, 2).solutions[0]
    with pytest.raises(ValueError):
        sample(ball, model, sol, -1, 1)
