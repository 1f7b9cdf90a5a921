from __future__ import annotations

import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from crptune import (
    DegeneratePartitionError,
    Partition,
    Polynomial,
    RootNotFoundError,
    StationDistribution,
    asymptotic_collision,
    dp_optimal_partition,
    lower_bound_collision,
    lower_bound_details,
    make_power_law,
    quantile_partition,
    rho_by_pieces,
    single_step_optimum,
    sqrt_curvature_integral,
    success_probability,
    tune,
)

X2 = Polynomial([0, 0, 1.0])
X3 = Polynomial([0, 0, 0, 1.0])


def brute_force_best(f: Polynomial, m: int, M: int) -> float:
    """Independent exhaustive search over all grid partitions."""
    f1 = f.derivative()
    grid = np.arange(M + 1) / M
    vals = f1(grid)
    best = -np.inf
    for interior in itertools.combinations(range(1, M), m - 1):
        z = [0, *interior, M]
        rho = sum((z[i + 1] - z[i]) / M * vals[z[i]] for i in range(m))
        best = max(best, rho)
    return best


# ------------------------------------------------------ success_probability

def test_success_probability_certain_single_station():
    z = Partition([0.0, 0.3, 0.8, 1.0])
    assert_allclose(success_probability(Polynomial([0, 1.0]), z), 1.0, rtol=1e-15)


def test_success_probability_two_stations_halved():
    # two stations, one breakpoint at 1/2: enumerate the four emit patterns
    # with p = 1/2 -> exactly the two single-emitter outcomes succeed
    z = Partition([0.0, 0.5, 1.0])
    assert_allclose(success_probability(X2, z), 0.5, rtol=1e-15)


def test_success_probability_three_stations_optimum():
    z = Partition([0.0, 2.0 / 3.0, 1.0])
    assert_allclose(success_probability(X3, z), 4.0 / 9.0, rtol=1e-12)


def test_success_probability_equals_tree_form():
    # same sum expressed over tree words: sum_w delta_w f'(y_w)
    rng = np.random.default_rng(37)
    for _ in range(20):
        k = int(rng.integers(1, 6))
        interior = np.sort(rng.uniform(0.02, 0.98, size=(1 << k) - 1))
        if np.any(np.diff(interior) <= 0):
            continue
        z = Partition(np.concatenate([[0.0], interior, [1.0]]))
        f = make_power_law(float(rng.uniform(0, 1.5)), int(rng.integers(3, 25))).gf()
        t = z.to_tree()
        f1 = f.derivative()
        via_tree = sum(
            t.delta(w) * f1(t.y_cum(w)) for w in t.words(k)
        )
        assert_allclose(success_probability(f, z), via_tree, rtol=1e-10)


# ------------------------------------------------------- quantile heuristic

def test_quantile_uniform_density_single_split():
    z = quantile_partition(X2, 1, 4096)
    assert abs(z.points[1] - 0.5) <= 1.0 / 4096


def test_quantile_uniform_density_two_levels():
    z = quantile_partition(X2, 2, 4096)
    assert_allclose(z.points, [0, 0.25, 0.5, 0.75, 1.0], atol=1.0 / 4096)


def test_quantile_cubic_density():
    # sqrt(f'') ~ sqrt(x): cumulative mass z^{3/2}, so z_1 = (1/2)^{2/3}
    z = quantile_partition(X3, 1, 8192)
    assert abs(z.points[1] - 0.5 ** (2.0 / 3.0)) <= 2.0 / 8192


def test_quantile_requires_fine_grid():
    with pytest.raises(ValueError):
        quantile_partition(X2, 6, 1024)  # needs >= 64 * 64


def test_quantile_rejects_flat_curvature():
    with pytest.raises(DegeneratePartitionError):
        quantile_partition(Polynomial([0, 1.0]), 1, 4096)  # f'' == 0


def test_quantile_degenerate_concentrated_mass():
    # extreme point mass concentrates sqrt(f'') near 1 and the minimal legal
    # grid cannot separate the top quantiles
    f = StationDistribution({200: 1.0}).gf()
    with pytest.raises(DegeneratePartitionError):
        quantile_partition(f, 6, 64 * 64)


def test_quantile_monotone_refinement():
    f = make_power_law(0.7, 100).gf()
    rates = []
    for k in range(1, 9):
        z = quantile_partition(f, k, 65536)
        rates.append(1.0 - success_probability(f, z))
    assert all(a > b for a, b in zip(rates, rates[1:]))


# ------------------------------------------------------------ exact DP

def test_dp_matches_brute_force():
    rng = np.random.default_rng(41)
    cases = 0
    for _ in range(25):
        deg = int(rng.integers(2, 7))
        f = Polynomial(np.concatenate([[0.0], rng.uniform(0.0, 1.0, size=deg)]))
        M = int(rng.integers(8, 15))
        for m in range(1, 5):
            expect = brute_force_best(f, m, M)
            got = rho_by_pieces(f, m, M)[m - 1]
            assert abs(got - expect) < 1e-12, (f.coefficients, M, m)
            part = dp_optimal_partition(f, m, M)
            assert part.m == m
            assert abs(success_probability(f, part) - expect) < 1e-12
            cases += 1
    assert cases == 100


def test_dp_single_piece_is_slope_at_zero():
    f = Polynomial([0, 0.3, 0.7])
    assert_allclose(rho_by_pieces(f, 1, 512)[0], 0.3, rtol=1e-14)
    z = dp_optimal_partition(f, 1, 512)
    assert_allclose(z.points, [0.0, 1.0], atol=0)


def test_dp_two_stations_fine_grid():
    z = dp_optimal_partition(X2, 2, 8192)
    assert abs(z.points[1] - 0.5) <= 1.0 / 8192
    assert_allclose(success_probability(X2, z), 0.5, atol=1e-7)


def test_dp_three_stations_fine_grid():
    z = dp_optimal_partition(X3, 2, 8192)
    assert abs(z.points[1] - 2.0 / 3.0) <= 1.0 / 8192
    assert_allclose(success_probability(X3, z), 4.0 / 9.0, atol=1e-7)


def test_dp_values_increase_with_pieces():
    f = make_power_law(0.7, 60).gf()
    vals = rho_by_pieces(f, 64, 4096)
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] < 1.0


def test_dp_dominates_quantile_on_shared_grid():
    rng = np.random.default_rng(43)
    for _ in range(12):
        f = make_power_law(float(rng.uniform(0, 1.5)), int(rng.integers(5, 60))).gf()
        k = int(rng.integers(1, 5))
        M = 64 * (1 << k) * 2
        zq = quantile_partition(f, k, M)
        rq = success_probability(f, zq)
        rd = rho_by_pieces(f, 1 << k, M)[(1 << k) - 1]
        assert rd >= rq - 1e-12


def test_dp_optimum_beats_one_over_m_for_light_scenarios():
    # when f'(1) - f'(0) <= 2 the uniform partition already achieves
    # 1 - rho <= 1/m, hence so does the optimum; x^2 attains equality
    for m in (2, 4, 8, 16):
        rho = rho_by_pieces(X2, m, 2048)[m - 1]
        assert 1.0 - rho <= 1.0 / m + 1e-9
    f = Polynomial([0, 0.6, 0.4])  # mean 1.4
    for m in (2, 4, 8):
        rho = rho_by_pieces(f, m, 2048)[m - 1]
        assert 1.0 - rho <= 1.0 / m + 1e-9


def test_dp_requires_sane_piece_count():
    with pytest.raises(ValueError):
        rho_by_pieces(X2, 0, 128)
    with pytest.raises(ValueError):
        dp_optimal_partition(X2, 200, 100)


# --------------------------------------------------------- one-step root

def test_single_step_optimum_quadratic():
    assert abs(single_step_optimum(X2) - 0.5) < 1e-9


def test_single_step_optimum_cubic():
    assert abs(single_step_optimum(X3) - 2.0 / 3.0) < 1e-9


def test_single_step_optimum_satisfies_equation():
    rng = np.random.default_rng(47)
    for _ in range(20):
        f = make_power_law(float(rng.uniform(0, 1.2)), int(rng.integers(3, 40))).gf()
        z = single_step_optimum(f)
        assert 0.0 < z < 1.0
        resid = (1.0 - z) * f.derivative(2)(z) - f.derivative()(z)
        assert abs(resid) < 1e-6 * max(1.0, f.derivative()(1.0))


def test_single_step_optimum_no_root():
    with pytest.raises(RootNotFoundError):
        single_step_optimum(Polynomial([0, 1.0]))


# ------------------------------------------------------------- integrals

def test_sqrt_curvature_integral_constant_density():
    assert_allclose(sqrt_curvature_integral(X2), np.sqrt(2.0), rtol=1e-13)


def test_sqrt_curvature_integral_cubic():
    # integral of sqrt(6x) over [0,1] = 2 sqrt(6) / 3
    assert_allclose(sqrt_curvature_integral(X3), 2.0 * np.sqrt(6.0) / 3.0, rtol=1e-6)


def test_asymptotic_collision_quadratic_exact():
    for k in range(1, 8):
        assert_allclose(asymptotic_collision(X2, k), 0.5**k, rtol=1e-12)


def test_asymptotic_collision_halves_per_level():
    f = make_power_law(0.7, 100).gf()
    for k in range(1, 10):
        assert_allclose(
            asymptotic_collision(f, k) / asymptotic_collision(f, k + 1),
            2.0,
            rtol=1e-12,
        )


def test_asymptotic_matches_dp_for_quadratic_at_every_depth():
    # constant curvature: the dyadic optimum is exact at every k
    for k in (1, 2, 3, 4):
        m = 1 << k
        rho = rho_by_pieces(X2, m, 4096)[m - 1]
        assert_allclose(1.0 - rho, asymptotic_collision(X2, k), rtol=1e-10)


# ------------------------------------------------------------ lower bound

def test_lower_bound_quadratic_no_correction():
    # f''' == 0 so the bound is the leading term alone, and it is attained
    assert_allclose(lower_bound_collision(X2, 2), 0.5, rtol=1e-12)
    for m in (2, 4, 8):
        rho = rho_by_pieces(X2, m, 2048)[m - 1]
        assert_allclose(lower_bound_collision(X2, m), 1.0 - rho, rtol=1e-9)


def test_lower_bound_requires_positive_curvature_at_zero():
    with pytest.raises(ValueError):
        lower_bound_collision(X3, 4)  # f''(0) = 0


def test_lower_bound_below_measured_optimum():
    f = make_power_law(0.7, 100).gf()
    vals = rho_by_pieces(f, 256, 16384)
    for k in (4, 6, 8):
        m = 1 << k
        assert lower_bound_collision(f, m) <= (1.0 - vals[m - 1]) + 1e-12


def test_lower_bound_informative_case_stays_below_optimum():
    f = Polynomial([0, 0, 0.5, 0.5])
    details = lower_bound_details(f, 64)
    assert details["bound"] > 0.0
    rho = rho_by_pieces(f, 64, 8192)[63]
    assert details["bound"] <= 1.0 - rho


def test_lower_bound_correction_vanishes():
    f = Polynomial([0, 0, 0.5, 0.5])
    lead_64 = lower_bound_details(f, 64)
    lead_4096 = lower_bound_details(f, 4096)
    rel_64 = 1.0 - lead_64["bound"] / lead_64["leading_term"]
    rel_4096 = 1.0 - lead_4096["bound"] / lead_4096["leading_term"]
    assert rel_4096 < rel_64 / 5.0


def test_lower_bound_reports_both_constant_variants():
    f = make_power_law(0.7, 30).gf()
    d = lower_bound_details(f, 16)
    f3 = f.derivative(3)
    denom = 3.0 * np.sqrt(2.0) * f.derivative(2)(0.0) ** 1.5
    assert_allclose(d["correction_constant"], f3(1.0) / denom, rtol=1e-12)
    assert_allclose(d["correction_constant_origin_variant"], f3(0.0) / denom, rtol=1e-12)
    assert d["bound"] >= 0.0


# ------------------------------------------------------------------ tune

def test_tune_report_fields_consistent():
    f = make_power_law(0.7, 40).gf()
    rep = tune(f, 3, method="quantile", grid_size=8192)
    assert rep.method == "quantile"
    assert rep.partition.m == 8
    assert rep.tree.depth == 3
    assert_allclose(rep.rho, success_probability(f, rep.partition), rtol=0)
    assert_allclose(rep.collision_rate, 1.0 - rep.rho, rtol=0)
    assert 0.0 < rep.rho < 1.0
    blob = rep.to_json_dict()
    assert blob["k"] == 3 and blob["method"] == "quantile"
    assert len(blob["partition"]["z"]) == 9
    assert len(blob["tree"]["p"]) == 7


def test_tune_methods_ranked():
    f = make_power_law(0.7, 60).gf()
    uniform = tune(f, 4, method="uniform", grid_size=4096)
    quant = tune(f, 4, method="quantile", grid_size=4096)
    dp = tune(f, 4, method="dp", grid_size=4096)
    assert dp.rho >= quant.rho - 1e-12
    assert quant.rho > uniform.rho


def test_tune_rejects_unknown_method():
    with pytest.raises(ValueError):
        tune(X2, 2, method="magic")
