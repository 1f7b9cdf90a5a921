from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from crptune import (
    Partition,
    Polynomial,
    StationDistribution,
    collision_rate_fixed_n,
    conti_tree,
    make_power_law,
    mc_collision_rate,
    mixture_collision_rate,
    run_crp,
    success_probability,
    survivor_distribution,
    tune,
    uniform_tree,
    winner_histogram,
)
from crptune.tree import ProbabilityTree, Word


def random_tree(rng, k: int) -> ProbabilityTree:
    probs = {
        (l, v): float(rng.uniform(0.05, 0.95))
        for l in range(k)
        for v in range(1 << l)
    }
    return ProbabilityTree(depth=k, probs=probs)


@pytest.fixture(scope="module")
def tuned():
    f = make_power_law(0.7, 100).gf()
    rep = tune(f, 6)
    return rep, f


# ----------------------------------------------------------------- run_crp

def test_single_station_always_wins():
    t = conti_tree()
    for seed in range(5):
        out = run_crp(t, 1, seed)
        assert out.success and out.survivors == 1 and out.winner == 0
        assert len(out.try_bits) == t.depth


def test_outcome_invariants_random():
    rng = np.random.default_rng(51)
    for _ in range(200):
        k = int(rng.integers(1, 5))
        t = random_tree(rng, k)
        n = int(rng.integers(1, 12))
        out = run_crp(t, n, rng)
        assert out.survivors >= 1
        assert out.success == (out.survivors == 1)
        assert (out.winner is not None) == out.success
        assert len(out.try_bits) == k
        assert all(b in (0, 1) for b in out.try_bits)


def test_two_station_single_round_frequency():
    # p = 1/2, k = 1: of the four emit patterns, the two single-emitter
    # ones succeed -> success probability 1/2
    t = uniform_tree(1)
    gen = np.random.default_rng(53)
    trials = 4000
    wins = sum(run_crp(t, 2, gen).success for _ in range(trials))
    se = np.sqrt(0.25 / trials)
    assert abs(wins / trials - 0.5) < 3 * se


def test_run_crp_rejects_empty_room():
    with pytest.raises(ValueError):
        run_crp(conti_tree(), 0, 1)


def test_run_crp_deterministic_per_seed():
    t = conti_tree()
    a = run_crp(t, 10, 99)
    b = run_crp(t, 10, 99)
    assert a == b


# ------------------------------------------------- analytic collision rates

def test_single_station_rate_is_exact_zero():
    z = Partition([0.0, 0.37, 1.0])
    assert collision_rate_fixed_n(z, 1) == 0.0


def test_two_station_rate_half_split():
    assert_allclose(collision_rate_fixed_n(Partition([0.0, 0.5, 1.0]), 2), 0.5, rtol=1e-15)


def test_rate_accepts_tree_argument():
    t = uniform_tree(1)
    assert_allclose(collision_rate_fixed_n(t, 2), 0.5, rtol=1e-14)


def test_conti_rates_stay_in_band():
    part = conti_tree().to_partition()
    rates = np.array([collision_rate_fixed_n(part, n) for n in range(2, 101)])
    assert rates.min() >= 0.040
    assert rates.max() <= 0.070
    assert abs(rates.min() - 0.045) <= 0.005
    assert abs(rates.max() - 0.065) <= 0.005


def test_mixture_identity(tuned):
    rep, f = tuned
    dist = make_power_law(0.7, 100)
    mix = mixture_collision_rate(rep.partition, dist)
    assert abs(mix - (1.0 - rep.rho)) < 1e-10


def test_mixture_identity_random_instances():
    rng = np.random.default_rng(59)
    for _ in range(25):
        k = int(rng.integers(1, 5))
        t = random_tree(rng, k)
        z = t.to_partition()
        dist = make_power_law(float(rng.uniform(0, 1.5)), int(rng.integers(3, 30)))
        f = dist.gf()
        mix = mixture_collision_rate(z, dist)
        assert abs(mix - (1.0 - success_probability(f, z))) < 1e-10


# -------------------------------------------------------------- Monte Carlo

def test_mc_matches_analytic(tuned):
    rep, _ = tuned
    n = 50
    exact = collision_rate_fixed_n(rep.partition, n)
    mc, se = mc_collision_rate(rep.tree, n, 200_000, 61)
    assert se > 0
    assert abs(mc - exact) < 3 * se


def test_mc_conti_small_n():
    t = conti_tree()
    exact = collision_rate_fixed_n(t, 2)
    mc, se = mc_collision_rate(t, 2, 100_000, 67)
    assert abs(mc - exact) < 3 * se


def test_mc_validation():
    with pytest.raises(ValueError):
        mc_collision_rate(conti_tree(), 0, 100)
    with pytest.raises(ValueError):
        mc_collision_rate(conti_tree(), 2, 0)


# ---------------------------------------------------------- winner fairness

def test_winner_histogram_single_station():
    h = winner_histogram(conti_tree(), 1, 500, 71)
    assert h.tolist() == [500]


def test_winner_histogram_two_station_symmetry():
    h = winner_histogram(uniform_tree(1), 2, 40_000, 73)
    total = h.sum()
    assert total > 0
    se = np.sqrt(0.25 * total)
    assert abs(h[0] - total / 2) < 4 * se


def test_winner_histogram_uniform_chi_square(tuned):
    rep, _ = tuned
    h = winner_histogram(rep.tree, 10, 100_000, 79)
    assert h.sum() > 50_000
    _, pvalue = stats.chisquare(h)
    assert pvalue >= 0.001


# ----------------------------------------------------- survivor distribution

def test_survivor_distribution_single_station_passthrough():
    g = survivor_distribution(conti_tree(), Polynomial([0, 1.0]))
    assert_allclose(g.poly.coefficients, [0.0, 1.0], atol=1e-12)
    assert g.success_probability == pytest.approx(1.0, abs=1e-12)


def test_survivor_distribution_two_station_half_split():
    g = survivor_distribution(uniform_tree(1), Polynomial([0, 0, 1.0]))
    assert_allclose(g.poly.coefficients, [0.0, 0.5, 0.5], atol=1e-12)


def test_survivor_distribution_matches_rho(tuned):
    rep, f = tuned
    g = survivor_distribution(rep.tree, f)
    assert abs(g.success_probability - rep.rho) < 1e-9
    assert g.poly.coefficients[0] == 0.0
    assert abs(g.poly(1.0) - 1.0) < 1e-9


def test_survivor_distribution_random_instances():
    rng = np.random.default_rng(83)
    for _ in range(25):
        k = int(rng.integers(1, 5))
        t = random_tree(rng, k)
        dist = make_power_law(float(rng.uniform(0, 1.5)), int(rng.integers(3, 20)))
        f = dist.gf()
        g = survivor_distribution(t, f)
        assert g.poly.coefficients[0] == 0.0
        assert abs(g.poly(1.0) - 1.0) < 1e-10
        assert np.all(g.poly.coefficients >= -1e-15)
        rho = success_probability(f, t.to_partition())
        assert abs(g.success_probability - rho) < 1e-9
        # mean survivors of the mixture never exceeds the scenario mean
        assert g.expected_survivors() <= f.derivative()(1.0) + 1e-9


def test_node_polynomials_are_scaled_shifts():
    # every branch polynomial equals delta_w * f'(y_w + delta_w x) after one
    # derivative; checked by propagating manually and comparing slopes
    rng = np.random.default_rng(89)
    xs = np.linspace(0.0, 1.0, 9)
    for _ in range(20):
        k = int(rng.integers(1, 4))
        t = random_tree(rng, k)
        dist = make_power_law(float(rng.uniform(0, 1.0)), int(rng.integers(3, 15)))
        f = dist.gf()
        f1 = f.derivative()
        polys = [f]
        words = [Word("")]
        for l in range(k):
            nxt, nxt_words = [], []
            for fw, w in zip(polys, words):
                p = t.probs[(l, w.value)]
                f0 = fw.compose_affine(1.0 - p, 0.0)
                fe = fw.compose_affine(p, 1.0 - p)
                fe = fe.shift_constant(-float(fe.coefficients[0]))
                nxt.extend([f0, fe])
                nxt_words.extend([w.append(0), w.append(1)])
            polys, words = nxt, nxt_words
        for fw, w in zip(polys, words):
            d = t.delta(w)
            y = t.y_cum(w)
            lhs = fw.derivative()(xs)
            rhs = d * f1(y + d * xs)
            assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_survivor_distribution_rejects_bad_poly():
    from crptune import SurvivorDistribution

    with pytest.raises(ValueError):
        SurvivorDistribution(Polynomial([0.1, 0.9]))  # nonzero constant
    with pytest.raises(ValueError):
        SurvivorDistribution(Polynomial([0.0, 0.4]))  # mass missing
