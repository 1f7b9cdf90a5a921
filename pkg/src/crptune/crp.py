"""Contention-resolution rounds: sampling, exact rates, survivor algebra.

Protocol semantics: n stations start alive.  In round t (t = 1..k) every
alive station emits with probability p_w, where w is the global word of
round outcomes so far.  The round outcome r(t) is 1 iff at least one
station emitted; if so, the silent stations withdraw.  After k rounds the
resolution succeeded iff exactly one station is still alive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .distributions import Polynomial, StationDistribution
from .tree import Partition, ProbabilityTree

__all__ = [
    "CrpOutcome",
    "run_crp",
    "collision_rate_fixed_n",
    "mixture_collision_rate",
    "mc_collision_rate",
    "winner_histogram",
    "SurvivorDistribution",
    "survivor_distribution",
]

RngLike = Union[np.random.Generator, int, None]


def _as_rng(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _level_prob_arrays(tree: ProbabilityTree) -> list[np.ndarray]:
    return [
        np.array([tree.probs[(l, v)] for v in range(1 << l)])
        for l in range(tree.depth)
    ]


@dataclass(frozen=True)
class CrpOutcome:
    """Result of one k-round resolution."""

    survivors: int
    winner: int | None
    try_bits: tuple[int, ...]
    success: bool


def run_crp(tree: ProbabilityTree, n: int, rng: RngLike = None) -> CrpOutcome:
    """Run one resolution among n stations.

    Every round draws one uniform per station, including stations that
    already withdrew (their draws are ignored).  The consumed random
    stream therefore depends only on (n, depth), never on the tree's
    probabilities, which keeps runs under different trees paired when
    they share a seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = _as_rng(rng)
    alive = np.ones(n, dtype=bool)
    wval = 0
    bits = []
    for level in range(tree.depth):
        p = tree.probs[(level, wval)]
        u = gen.random(n)
        emit = alive & (u < p)
        r = bool(emit.any())
        if r:
            alive = emit
        bits.append(int(r))
        wval = (wval << 1) | int(r)
    survivors = int(alive.sum())
    winner = int(np.flatnonzero(alive)[0]) if survivors == 1 else None
    return CrpOutcome(
        survivors=survivors,
        winner=winner,
        try_bits=tuple(bits),
        success=survivors == 1,
    )


def collision_rate_fixed_n(partition, n: int) -> float:
    """Exact collision probability with exactly n contending stations.

    Success probability is sum_i (z_i - z_{i-1}) * n * z_{i-1}^(n-1), the
    lower sum of (x^n)' over the partition.
    """
    if isinstance(partition, ProbabilityTree):
        partition = partition.to_partition()
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 0.0
    z = partition.points
    rho = float(np.dot(np.diff(z), n * z[:-1] ** (n - 1)))
    return 1.0 - rho


def mixture_collision_rate(partition, dist: StationDistribution) -> float:
    """Scenario-averaged collision rate: sum_n q_n * rate(n)."""
    return sum(q * collision_rate_fixed_n(partition, n) for n, q in dist.weights.items())


def mc_collision_rate(
    tree: ProbabilityTree,
    n: int,
    trials: int,
    rng: RngLike = None,
    chunk_size: int = 1 << 16,
) -> tuple[float, float]:
    """Monte Carlo (rate, stderr) over the given number of resolutions.

    Tracks only survivor counts, so each trial needs k binomial draws
    instead of k*n uniforms; suitable for trial counts in the millions.
    """
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be >= 1")
    gen = _as_rng(rng)
    plevel = _level_prob_arrays(tree)
    successes = 0
    done = 0
    while done < trials:
        c = min(chunk_size, trials - done)
        s = np.full(c, n, dtype=np.int64)
        w = np.zeros(c, dtype=np.int64)
        for level in range(tree.depth):
            p = plevel[level][w]
            e = gen.binomial(s, p)
            r = e > 0
            s = np.where(r, e, s)
            w = (w << 1) + r
        successes += int((s == 1).sum())
        done += c
    rate = 1.0 - successes / trials
    stderr = float(np.sqrt(max(rate * (1.0 - rate), 0.0) / trials))
    return rate, stderr


def winner_histogram(
    tree: ProbabilityTree,
    n: int,
    trials: int,
    rng: RngLike = None,
    chunk_size: int = 1 << 13,
) -> np.ndarray:
    """Per-station win counts over the given number of resolutions.

    Only successful resolutions contribute; the counts therefore sum to
    the number of successes, not to trials.
    """
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be >= 1")
    gen = _as_rng(rng)
    plevel = _level_prob_arrays(tree)
    hist = np.zeros(n, dtype=np.int64)
    done = 0
    while done < trials:
        c = min(chunk_size, trials - done)
        alive = np.ones((c, n), dtype=bool)
        w = np.zeros(c, dtype=np.int64)
        for level in range(tree.depth):
            p = plevel[level][w]
            u = gen.random((c, n))
            emit = alive & (u < p[:, None])
            r = emit.any(axis=1)
            alive = np.where(r[:, None], emit, alive)
            w = (w << 1) + r
        ok = alive.sum(axis=1) == 1
        if ok.any():
            hist += np.bincount(alive[ok].argmax(axis=1), minlength=n)
        done += c
    return hist


@dataclass(frozen=True)
class SurvivorDistribution:
    """Distribution of the survivor count after a full resolution.

    poly's coefficient j is P(j stations survive); coefficient 0 is
    exactly zero (at least one station always survives) and coefficient 1
    is the success probability.
    """

    poly: Polynomial

    def __post_init__(self):
        c = self.poly.coefficients
        if c[0] != 0.0:
            raise ValueError("survivor distribution must have zero constant term")
        if abs(float(c.sum()) - 1.0) > 1e-9:
            raise ValueError("survivor distribution coefficients must sum to 1")

    @property
    def success_probability(self) -> float:
        c = self.poly.coefficients
        return float(c[1]) if len(c) > 1 else 0.0

    def expected_survivors(self) -> float:
        return self.poly.derivative()(1.0)


def survivor_distribution(tree: ProbabilityTree, f: Polynomial) -> SurvivorDistribution:
    """Propagate scenario f through the tree exactly.

    Each node w carries the joint polynomial f_w whose coefficient j is
    P(round outcomes spell w AND j stations alive).  Children:
      outcome 0:  f_w((1-p) x)            (nobody emitted, all stay)
      outcome 1:  f_w(p x + 1-p) - f_w(1-p)  (emitters survive, >= 1 of them)
    Both keep the constant term exactly zero by construction.  The sum
    over all depth-k words is the survivor-count distribution.
    """
    level_polys = [f]
    for l in range(tree.depth):
        nxt = []
        for v, fw in enumerate(level_polys):
            p = tree.probs[(l, v)]
            f0 = fw.compose_affine(1.0 - p, 0.0)
            f1 = fw.compose_affine(p, 1.0 - p)
            f1 = f1.shift_constant(-float(f1.coefficients[0]))
            nxt.append(f0)
            nxt.append(f1)
        level_polys = nxt
    g = level_polys[0]
    for fw in level_polys[1:]:
        g = g + fw
    return SurvivorDistribution(poly=g)
