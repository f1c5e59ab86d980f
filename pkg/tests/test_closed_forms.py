import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fitlevels import closed_forms as cf
from fitlevels.levels import lower_bound_capped, lower_bound_viscosity, max_viscosity
from fitlevels.markov import hitting_time_levels, onemax_level_chain

P_GRID = [0.01, 0.05, 0.1, 0.25, 1 / 3, 0.5]


def masks_transition(n, i, p):
    """Law of the new number of one-bits of ``1^i 0^(n-i)`` by enumerating all flip masks."""
    law = np.zeros(n + 1)
    x = [1] * i + [0] * (n - i)
    for mask in itertools.product((0, 1), repeat=n):
        flips = sum(mask)
        ones = sum(b ^ f for b, f in zip(x, mask))
        law[ones] += p**flips * (1 - p) ** (n - flips)
    return law


# ---- LeadingOnes ----------------------------------------------------------

def test_init_distribution_single():
    assert np.allclose(cf.lo_init_distribution(3, 1), [1 / 2, 1 / 4, 1 / 8, 1 / 8], rtol=0, atol=1e-16)


def test_init_distribution_best_of_two_by_enumeration():
    def lo(v):
        s = format(v, "02b")
        return len(s) - len(s.lstrip("1"))

    counts = np.zeros(3)
    for a, b in itertools.product(range(4), repeat=2):
        counts[max(lo(a), lo(b))] += 1
    assert np.allclose(cf.lo_init_distribution(2, 2), counts / 16, atol=1e-16)
    assert np.allclose(counts / 16, [1 / 4, 5 / 16, 7 / 16])


def test_init_distribution_large_mu_concentrates():
    assert cf.lo_init_distribution(5, 10**5)[-1] == pytest.approx(1.0, abs=1e-12)


def test_lo_two_bits_is_three():
    assert cf.lo_expected_time(2, 0.5) == pytest.approx(3.0, rel=1e-15)
    assert cf.lo_one_plus_one_exact(2, 0.5) == pytest.approx(3.0, rel=1e-15)


@pytest.mark.parametrize("p", P_GRID)
def test_lo_one_bit(p):
    assert cf.lo_one_plus_one_exact(1, p) == pytest.approx(1 / (2 * p), rel=1e-14)


@pytest.mark.parametrize("n", [1, 2, 7, 50, 200])
@pytest.mark.parametrize("p", P_GRID)
def test_mu_one_matches_corollary(n, p):
    assert cf.lo_expected_time(n, p, 1) == pytest.approx(cf.lo_one_plus_one_exact(n, p), rel=1e-12)


@pytest.mark.parametrize("n", [1, 3, 20, 100, 200])
@pytest.mark.parametrize("p", P_GRID)
@pytest.mark.parametrize("mu", [1, 2, 17])
def test_sum_form_equals_simplified_form(n, p, mu):
    a = cf.lo_expected_time(n, p, mu, method="sum")
    b = cf.lo_expected_time(n, p, mu, method="simplified")
    assert a == pytest.approx(b, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 300), st.floats(1e-4, 0.5), st.integers(1, 500))
def test_more_initial_samples_never_hurt(n, p, mu):
    assert cf.lo_expected_time(n, p, mu + 1) <= cf.lo_expected_time(n, p, mu) * (1 + 1e-12)


def test_best_of_twenty_is_faster():
    assert cf.lo_expected_time(20, 1 / 20, 20) < cf.lo_expected_time(20, 1 / 20, 1)


def test_bad_method_and_rate():
    with pytest.raises(ValueError):
        cf.lo_expected_time(5, 0.1, method="guess")
    with pytest.raises(ValueError):
        cf.lo_one_plus_one_exact(5, 0.6)


def test_lo_p_one_over_n_closed_form():
    for n in (10, 100, 1000):
        direct = n * n / 2 * ((1 - 1 / n) ** (-n + 1) - 1 + 1 / n)
        assert cf.lo_one_plus_one_exact(n, 1 / n) == pytest.approx(direct, rel=1e-12)


def test_lo_ratio_rises_toward_limit():
    limit = (math.e - 1) / 2
    ratios = [cf.lo_one_plus_one_exact(n, 1 / n) / n**2 for n in (10**3, 10**4, 10**5, 10**6)]
    assert all(a < b for a, b in zip(ratios, ratios[1:]))
    assert all(r < limit for r in ratios)
    assert limit - ratios[-1] < 1e-5


def test_log_form_matches():
    for n, p in [(10, 0.1), (300, 0.5), (50, 0.02)]:
        assert math.exp(cf.log_lo_one_plus_one_exact(n, p)) == pytest.approx(cf.lo_one_plus_one_exact(n, p), rel=1e-12)
    assert math.isfinite(cf.log_lo_one_plus_one_exact(10**6, 0.5))


def test_lo_optimal_rate_n100():
    opt = cf.lo_optimal_rate(100, full=True)
    assert 1.55 <= opt.p * 100 <= 1.63
    assert opt.grid_unimodal
    assert opt.value <= cf.lo_one_plus_one_exact(100, 1 / 100)
    for q in (opt.p * 0.999, opt.p * 1.001):
        assert cf.lo_one_plus_one_exact(100, q) >= opt.value * (1 - 1e-12)
    with pytest.raises(ValueError):
        cf.lo_optimal_rate(1)


# ---- OneMax -----------------------------------------------------------------

def test_harmonic():
    assert cf.harmonic(3) == pytest.approx(11 / 6)
    assert cf.harmonic(10**6) == pytest.approx(math.log(10**6) + np.euler_gamma + 0.5e-6, rel=1e-12)


def test_onemax_upper_examples():
    assert cf.onemax_upper(1, 0.5) == pytest.approx(2.0)
    assert cf.onemax_upper(3, 1 / 3) == pytest.approx(12.375, rel=1e-14)
    with pytest.raises(ValueError):
        cf.onemax_upper(3, 1.0)


@pytest.mark.parametrize("n", [4, 10, 50, 100, 120])
def test_onemax_bounds_sandwich_level_chain(n):
    exact = hitting_time_levels(onemax_level_chain(n, 1 / n))
    assert cf.onemax_lower(n, 1 / n) <= exact <= cf.onemax_upper(n, 1 / n)


def test_onemax_lower_direct_evaluation():
    n = 100
    direct = (math.log(n) - math.log(math.log(n)) - 3) * n / 0.99**n
    assert cf.onemax_lower(n, 1 / n) == pytest.approx(direct, rel=1e-12)
    assert cf.onemax_lower(n, 1 / n) == pytest.approx(21.307, abs=1e-3)
    assert cf.onemax_lower_regime(n, 1 / n) == cf.SMALL_P


def test_onemax_lower_second_regime():
    n, p = 10**4, 2e-4
    assert cf.onemax_lower_regime(n, p) == cf.LARGE_P
    direct = (math.log(1 / (p * p * n)) - math.log(math.log(n)) - 3) / (p * (1 - p) ** n)
    assert cf.onemax_lower(n, p) == pytest.approx(direct, rel=1e-12)


def test_onemax_lower_falls_back_to_trivial_bound():
    n, p = 100, 0.3
    assert cf.onemax_lower_regime(n, p) == cf.TRIVIAL
    assert cf.onemax_lower(n, p) == cf.trivial_lower(n, p, 1)
    assert cf.evaluate("om.lower", n=n, p=p)["flags"] == [cf.TRIVIAL, "log=log2"]


def test_onemax_lower_non_informative_small_n():
    assert cf.onemax_lower(20, 1 / 20) < 0
    assert "non-informative" in cf.evaluate("om.lower", n=20, p=1 / 20)["flags"]
    assert cf.onemax_lower_p_1_over_n(20) < 0


def test_corollary_value_at_100():
    e, n = math.e, 100
    terms = e * n * math.log(n), e * n * math.log(math.log(n)), 3 * e * n
    assert cf.onemax_lower_p_1_over_n(n) == pytest.approx(terms[0] - terms[1] - terms[2], rel=1e-12)
    assert cf.onemax_lower_p_1_over_n(n) == pytest.approx(21.200, abs=1e-3)


def test_corollary_ratio_trend():
    ratios = [cf.onemax_lower_p_1_over_n(n) / (math.e * n * math.log(n)) for n in (10**3, 10**6, 10**9)]
    assert ratios[1] >= 0.5 and all(a < b < 1 for a, b in zip(ratios, ratios[1:]))


def test_trivial_lower_examples():
    assert cf.trivial_lower(10, 0.5, 1) == pytest.approx((1 - 2**-10) * math.exp(5), rel=1e-14)
    assert cf.trivial_lower(10, 0.5, 1) == pytest.approx(148.27, abs=5e-3)
    assert cf.trivial_lower(8, 1 / 8) == pytest.approx((1 - 2**-8) * math.e, rel=1e-14)
    assert cf.trivial_lower(4, 0.25, 16) == 0.0


def test_transition_examples():
    assert cf.onemax_transition_exact(5, 5, 0, 0.2) == pytest.approx(0.8**5)
    assert cf.onemax_transition_exact(2, 1, 1, 0.3) == pytest.approx(0.3 * 0.7, rel=1e-14)
    with pytest.raises(ValueError):
        cf.onemax_transition_exact(5, 5, 1, 0.2)
    with pytest.raises(ValueError):
        cf.onemax_transition_exact(5, 2, -1, 0.2)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
@pytest.mark.parametrize("p", [0.1, 0.3, 0.5])
def test_transition_matches_mask_enumeration(n, p):
    for i in range(n + 1):
        law = masks_transition(n, i, p)
        for k in range(n - i + 1):
            assert cf.onemax_transition_exact(n, i, k, p) == pytest.approx(law[i + k], rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("n", range(1, 13))
def test_transition_bound_dominates_for_positive_gain(n):
    for p in np.linspace(0.05, 0.5, 10):
        for i in range(n):
            for k in range(1, n - i + 1):
                assert cf.onemax_transition_bound(n, i, k, p) >= cf.onemax_transition_exact(n, i, k, p) * (1 - 1e-12)


def test_transition_bound_at_top_is_zero():
    assert cf.onemax_transition_bound(6, 6, 0, 0.1) == pytest.approx(0.9**6)
    assert cf.onemax_transition_bound(6, 5, 1, 0.1) > 0


def test_strengthened_bound_at_k1_is_level_rate():
    n, p = 30, 1 / 30
    for i in range(20, n):
        z = cf.transition_z(n, i, p)
        expected = p * (1 - p) ** (n - 1) * (n - i) * (1 + 0.6 * z)
        assert cf.onemax_transition_bound(n, i, 1, p, strengthened=True) == pytest.approx(expected, rel=1e-13)
        for k in range(1, n - i + 1):
            for i2 in range(i - 3, i + 1):
                assert (cf.onemax_transition_bound(n, i, k, p, strengthened=True)
                        >= cf.onemax_transition_exact(n, i2, i + k - i2, p))


def test_strengthened_boundary_accepted():
    # n = 9, i = 6: i(n-i) = 18, so p with 18 p^2 = (1-p)^2 puts z exactly at 1
    n, i = 9, 6
    p = 1 / (1 + math.sqrt(18))
    assert cf.transition_z(n, i, p) == pytest.approx(1.0, rel=1e-14)
    cf.onemax_transition_bound(n, i, 1, p, strengthened=True)
    with pytest.raises(ValueError):
        cf.onemax_transition_bound(n, 5, 1, 0.01, strengthened=True)
    with pytest.raises(ValueError):
        cf.onemax_transition_bound(n, i, 1, 0.3, strengthened=True)


def test_onemax_chi_and_cutoff():
    n, p = 1000, 1e-3
    assert cf.onemax_chi(n, p) == pytest.approx(1 - 1 / ((1 - p) * math.log2(n)), rel=1e-15)
    lg = math.log2(n)
    assert cf.cutoff_level(n, p) == math.ceil(n - min(n / lg, 1 / (p * p * n * lg)))


@pytest.mark.parametrize("n", [10, 11, 12])
def test_coarse_onemax_partition_dominates_true_transitions(n):
    p = 1 / n
    part = cf.build_onemax_levels(n, p)
    ell = part.meta["ell"]
    G = part.gamma.to_matrix()
    for a in range(part.m - 1):
        i = ell + a
        for b in range(a + 1, part.m):
            k = b - a
            assert part.rate[a] * G[a, b] >= cf.onemax_transition_exact(n, i, k, p) * (1 - 1e-12)


def test_coarse_onemax_partition_properties():
    n, p = 1000, 1e-3
    part = cf.build_onemax_levels(n, p)
    assert part.chi == pytest.approx(cf.onemax_chi(n, p))
    assert part.start[0] == 1.0
    assert max_viscosity(part.gamma) >= part.chi - 1e-12
    rep = lower_bound_viscosity(part)
    assert rep.certified and rep.value >= cf.onemax_lower(n, p)
    with pytest.raises(ValueError):
        cf.build_onemax_levels(3, 1 / 3)
    with pytest.raises(ValueError):
        cf.build_onemax_levels(8, 1 / 8)
    with pytest.raises(ValueError):
        cf.build_onemax_levels(100, 0.3)


def test_onemax_optimal_rate():
    for n in (2, 10, 1000):
        assert cf.onemax_optimal_rate(n) == 1 / n
    grid = np.linspace(0.1, 3.0, 291) / 1000
    values = [cf.onemax_upper(1000, q) for q in grid]
    assert abs(grid[int(np.argmin(values))] - 1e-3) <= grid[1] - grid[0]
    for n in (10, 100, 1000):
        q = 1.59 / n
        assert (1 / n) * (1 - 1 / n) ** (n - 1) >= q * (1 - q) ** (n - 1)


# ---- build_lo_levels and long paths ------------------------------------------

@pytest.mark.parametrize("n", [1, 5, 20, 50])
@pytest.mark.parametrize("p", [0.02, 0.2, 0.5])
def test_lo_partition_reproduces_exact(n, p):
    part = cf.build_lo_levels(n, p)
    if n > 1:
        assert max_viscosity(part.gamma) == 0.5
    assert lower_bound_viscosity(part).value == pytest.approx(cf.lo_one_plus_one_exact(n, p), rel=1e-12)


@pytest.mark.parametrize("n,k", [(4, 2), (6, 3), (8, 2), (12, 3)])
@pytest.mark.parametrize("p", [0.05, 0.1, 0.3])
def test_longpath_partition_matches_mutation_probabilities(n, k, p):
    part = cf.build_longpath_levels(n, k, p)
    G = part.gamma.to_matrix()
    assert np.allclose(G[:-1].sum(axis=1), 1.0, atol=1e-14)
    assert part.band == k and part.alpha == pytest.approx(1 - (p / (1 - p)) ** k)
    for i in range(part.m - 1):
        for j in range(1, min(k, part.m - 1 - i) + 1):
            assert part.rate[i] * G[i, i + j] == pytest.approx(p**j * (1 - p) ** (n - j), rel=1e-12)


def test_longpath_worked_example():
    n, k, p, m = 4, 2, 0.1, 6
    assert cf.longpath_upper(n, k, p) == pytest.approx(m / (p * 0.9**3), rel=1e-14)
    assert cf.longpath_upper(n, k, p) == pytest.approx(82.3045, abs=1e-4)
    direct = m / (p * 0.9**3) * (0.8 / 0.9) ** 2 * (1 - (1 / 9) ** 2) ** m
    assert cf.longpath_lower(n, k, p) == pytest.approx(direct, rel=1e-14)
    assert cf.longpath_lower(n, k, p) == pytest.approx(60.3599, abs=1e-4)
    assert cf.longpath_lower(n, k, 0.5) == 0.0
    with pytest.raises(ValueError):
        cf.longpath_lower(5, 2, 0.1)


def test_astronomical_path_lengths_saturate():
    assert cf.longpath_upper(10**6, 10**3, 1e-6) == math.inf


@pytest.mark.parametrize("p", [0.05, 0.1, 0.25])
def test_longpath_capped_bound_is_at_least_closed_form(p):
    part = cf.build_longpath_levels(4, 2, p)
    assert lower_bound_capped(part).value >= cf.longpath_lower(4, 2, p)


@pytest.mark.parametrize("n", [100, 400])
def test_corollary_factor_near_one(n):
    f = cf.longpath_corollary_factor(n, 1 / n)
    assert 0.99 < f <= 1.0


# ---- numerical range and registry ------------------------------------------

@pytest.mark.parametrize("name", sorted(cf.FORMULAS))
def test_every_formula_finite_at_a_million_bits(name):
    params = {"n": 10**6, "p": 1e-6, "mu": 1, "i": 999_999, "k": 1}
    if name.startswith("lp."):
        params.update(k=params["n"] // 2)
    out = cf.evaluate(name, **params)
    assert math.isfinite(out["value"])
    assert out["formula"] == name


def test_evaluate_errors_and_flags():
    with pytest.raises(KeyError):
        cf.evaluate("nope", n=3)
    with pytest.raises(ValueError):
        cf.evaluate("lo.exact.1p1", n=3)
    out = cf.evaluate("lo.exact.1p1", n=2, p=0.5)
    assert out["value"] == pytest.approx(3.0) and out["params"] == {"n": 2, "p": 0.5}
    assert cf.evaluate("om.lower", n=100, p=0.01)["flags"] == [cf.SMALL_P, "log=log2"]
