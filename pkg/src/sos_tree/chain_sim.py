"""Exact ancestral sampling of finite-volume SGMs and empirical statistics.

The root spin is drawn from its exact law and every other spin from the
conditional law given its parent, both obtained from the partial partition
function recursion. Random numbers come from Philox4x64 (a counter-based
generator) keyed by (seed, vertex, chunk), so a batch is bitwise identical
whatever the number of worker threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np
from scipy import stats

from .gibbs_oracle import BoundaryLawField, FiniteMeasure, child_conditionals, subtree_messages
from .lattice import CayleyBall, ModelSpec
from .ti_solver import SOLUTION_TOL, TISolution

CHUNK = 1 << 16
THREADS_ENV = "SOS_TREE_THREADS"


@dataclass(frozen=True)
class SampleBatch:
    k: int
    n: int
    count: int
    seed: int
    theta: float
    x: float
    y: float
    p: Optional[float]
    configs: np.ndarray = field(repr=False)


def substream(seed: int, vertex: int, chunk: int) -> np.random.Generator:
    """Independent Philox stream for one (seed, vertex, chunk) triple."""
    key = np.array([seed & 0xFFFF_FFFF_FFFF_FFFF, (vertex << 32) | chunk], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def solution_field(ball: CayleyBall, solution: TISolution) -> BoundaryLawField:
    k = ball.k
    return BoundaryLawField.constant(ball, [solution.x ** k, solution.y ** k, 1.0])


def sampling_tables(ball: CayleyBall, model: ModelSpec, z: BoundaryLawField):
    """Root law and per-vertex cumulative conditional tables."""
    R = subtree_messages(ball, model, z)
    root_cdf = np.cumsum(R[0] / R[0].sum())
    cond = child_conditionals(ball, model, z, R)
    return root_cdf, np.cumsum(cond, axis=2)


def _draw(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    # skip the last cumulative value so rounding just below 1 cannot push past m
    idx = (u[:, None] >= cdf_rows[:, :-1]).sum(axis=1)
    return idx.astype(np.int8)


def _sample_chunk(ball, root_cdf, cdfs, seed, chunk, size) -> np.ndarray:
    out = np.empty((size, ball.size), dtype=np.int8)
    u = substream(seed, 0, chunk).random(size)
    out[:, 0] = _draw(np.broadcast_to(root_cdf, (size, len(root_cdf))), u)
    for v in range(1, ball.size):
        u = substream(seed, v, chunk).random(size)
        out[:, v] = _draw(cdfs[v][out[:, ball.parent[v]]], u)
    return out


def _workers(threads: Optional[int]) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, threads)


def sample(ball: CayleyBall, model: ModelSpec, solution: TISolution, count: int, seed: int,
           threads: Optional[int] = None) -> SampleBatch:
    """Draw ``count`` i.i.d. configurations on the ball from the solution's finite-volume law."""
    if solution.residual > SOLUTION_TOL:
        raise ValueError(f"solution residual {solution.residual:.2e} exceeds {SOLUTION_TOL}")
    if count < 0:
        raise ValueError("count must be nonnegative")
    z = solution_field(ball, solution)
    root_cdf, cdfs = sampling_tables(ball, model, z)
    sizes = [min(CHUNK, count - s) for s in range(0, count, CHUNK)]
    jobs = [(c, sz) for c, sz in enumerate(sizes)]
    run = lambda job: _sample_chunk(ball, root_cdf, cdfs, seed, job[0], job[1])
    workers = _workers(threads)
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    configs = np.vstack(parts) if parts else np.empty((0, ball.size), dtype=np.int8)
    return SampleBatch(k=ball.k, n=ball.n, count=count, seed=seed, theta=model.theta,
                       x=solution.x, y=solution.y, p=model.activity.p, configs=configs)


def product_law(ball: CayleyBall, model: ModelSpec, z: BoundaryLawField,
                configs: np.ndarray) -> np.ndarray:
    """Root law times the product of parent-to-child conditionals, per configuration."""
    R = subtree_messages(ball, model, z)
    cond = child_conditionals(ball, model, z, R)
    configs = np.asarray(configs, dtype=np.int64)
    prob = (R[0] / R[0].sum())[configs[:, 0]]
    for v in range(1, ball.size):
        prob = prob * cond[v][configs[:, ball.parent[v]], configs[:, v]]
    return prob


def empirical_stats(batch: SampleBatch, m: int = 2) -> dict:
    """Site law per depth and the pooled (parent spin, child spin) pair law."""
    if batch.count == 0:
        raise ValueError("empty batch")
    from .lattice import build_ball

    ball = build_ball(batch.k, batch.n)
    cfg = batch.configs.astype(np.int64)
    q = m + 1
    site = {}
    for d in range(ball.n + 1):
        spins = cfg[:, list(ball.sphere(d))].ravel()
        site[d] = np.bincount(spins, minlength=q) / spins.size
    pair = np.zeros((q, q))
    if ball.size > 1:
        e = ball.edges()
        codes = (cfg[:, e[:, 0]] * q + cfg[:, e[:, 1]]).ravel()
        pair = (np.bincount(codes, minlength=q * q) / codes.size).reshape(q, q)
    return {"site": site, "pair": pair}


def config_counts(batch: SampleBatch) -> tuple[np.ndarray, np.ndarray]:
    uniq, counts = np.unique(batch.configs, axis=0, return_counts=True)
    return uniq, counts


def chi_square(batch: SampleBatch, measure: FiniteMeasure) -> tuple[float, float, int]:
    """Pearson goodness of fit of per-configuration counts against an exact measure."""
    uniq, counts = config_counts(batch)
    expected = measure.probs * batch.count
    observed = np.zeros(len(measure.configs))
    index = {row.tobytes(): i for i, row in enumerate(measure.configs.astype(np.int8))}
    for row, c in zip(uniq.astype(np.int8), counts):
        i = index.get(row.tobytes())
        if i is None:
            raise ValueError(f"sampled configuration {row.tolist()} is outside the support")
        observed[i] = c
    stat, pvalue = stats.chisquare(observed, expected)
    return float(stat), float(pvalue), len(expected) - 1


def write_batch(batch: SampleBatch, out: TextIO, header: Optional[dict] = None) -> None:
    """One configuration per line, spins as digits in breadth-first vertex order."""
    for key, val in (header or {}).items():
        out.write(f"# {key}: {val}\n")
    digits = (batch.configs.astype(np.uint8) + ord("0"))
    newline = np.full((len(digits), 1), ord("\n"), dtype=np.uint8)
    out.write(np.hstack([digits, newline]).tobytes().decode("ascii"))


def read_batch(text: str) -> np.ndarray:
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return np.array([[int(ch) for ch in ln] for ln in rows], dtype=np.int8)
