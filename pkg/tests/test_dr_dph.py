from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aoii_smdp.dr_dph import (
    DualRegimeChain,
    absorption_vectors,
    drdph_pmf,
    drdph_sample,
    drdph_sample_many,
    drdph_tail,
    expected_penalty_sum,
    factorial_moment,
    faulhaber_coefficients,
    ordinary_moment,
    regime2_ipv,
)
from aoii_smdp.errors import ArgumentOutOfRange, ValidationError
from aoii_smdp.stochastic_core import DphDistribution, dph_pmf, falling_factorial, make_rng
from oracles import pmf_by_iteration, random_chain_arrays, truncated_expectation

seeds = st.integers(0, 2**32 - 1)


def scalar_chain(a1, a2, tau):
    return DualRegimeChain([1.0], tau, [[1.0]], [[a1]], [[a2]], [[1 - a1]], [[1 - a2]])


def random_chain(seed, **kw):
    arrays = random_chain_arrays(np.random.default_rng(seed), **kw)
    return DualRegimeChain(**arrays), arrays


def test_scalar_pmf_example():
    dist = scalar_chain(0.5, 0.3, 3).distribution
    assert drdph_pmf(dist, 4) == pytest.approx(0.25 * 0.3 * 0.7, abs=1e-15)
    assert drdph_pmf(dist, 2) == pytest.approx(0.25, abs=1e-15)


def test_threshold_one_is_plain_dph_of_regime2():
    chain, _ = random_chain(3)
    chain = DualRegimeChain(chain.ipv1, 1, chain.btm, chain.tpts1, chain.tpts2, chain.apts1, chain.apts2)
    np.testing.assert_allclose(regime2_ipv(chain), chain.ipv1 @ chain.btm, atol=1e-15)
    plain = DphDistribution.from_arrays(chain.distribution.ipv2, chain.tpts2)
    for t in range(1, 30):
        assert drdph_pmf(chain.distribution, t) == pytest.approx(dph_pmf(plain, t), abs=1e-15)
    sigma1, _ = absorption_vectors(chain)
    assert np.all(sigma1 == 0.0)


@given(seeds)
def test_pmf_matches_forward_iteration(seed):
    chain, arrays = random_chain(seed)
    ref = pmf_by_iteration(arrays, 40)
    got = [drdph_pmf(chain.distribution, t) for t in range(1, 41)]
    np.testing.assert_allclose(got, ref, atol=1e-14)


@given(seeds)
def test_regime2_mass_plus_regime1_absorption_is_one(seed):
    chain, _ = random_chain(seed)
    sigma1, _ = absorption_vectors(chain)
    assert chain.distribution.ipv2.sum() + sigma1.sum() == pytest.approx(1.0, abs=1e-12)


@given(seeds, st.integers(0, 30))
def test_tail_plus_partial_sum(seed, extra):
    chain, _ = random_chain(seed)
    dist = chain.distribution
    t = dist.threshold - 1 + extra
    partial = sum(drdph_pmf(dist, s) for s in range(1, t + 1))
    assert partial + drdph_tail(dist, t) == pytest.approx(1.0, abs=1e-12)


def test_geometric_moments():
    dist = scalar_chain(0.5, 0.5, 1).distribution
    assert factorial_moment(dist, 1) == pytest.approx(2.0, rel=1e-14)
    assert ordinary_moment(dist, 1) == pytest.approx(2.0, rel=1e-14)
    assert ordinary_moment(dist, 2) == pytest.approx(6.0, rel=1e-14)
    assert ordinary_moment(dist, 2) == pytest.approx(factorial_moment(dist, 2) + factorial_moment(dist, 1), rel=1e-15)
    assert expected_penalty_sum(dist, [0.0, 1.0]) == pytest.approx(4.0, rel=1e-14)
    assert expected_penalty_sum(dist, [1.0]) == pytest.approx(2.0, rel=1e-14)
    assert expected_penalty_sum(dist, [0.0, 0.0, 0.0]) == 0.0


def test_moment_order_limits():
    dist = scalar_chain(0.5, 0.5, 1).distribution
    assert factorial_moment(dist, 0) == 1.0
    with pytest.raises(ArgumentOutOfRange):
        factorial_moment(dist, 11)
    with pytest.raises(ArgumentOutOfRange):
        ordinary_moment(dist, 0)
    with pytest.raises(ArgumentOutOfRange):
        expected_penalty_sum(dist, [0.0] * 9 + [1.0])


@given(seeds, st.integers(1, 4))
def test_moments_against_truncated_series(seed, m):
    chain, arrays = random_chain(seed)
    dist = chain.distribution
    ref, bound, _ = truncated_expectation(arrays, lambda t: float(t) ** m, m)
    assert ordinary_moment(dist, m) == pytest.approx(ref, rel=1e-8)
    ref_f, _, _ = truncated_expectation(arrays, lambda t: float(falling_factorial(t, m)), m)
    assert factorial_moment(dist, m) == pytest.approx(ref_f, rel=1e-8, abs=1e-12)


@given(seeds)
def test_quadratic_penalty_sum_against_truncated_series(seed):
    chain, arrays = random_chain(seed)
    ref, _, _ = truncated_expectation(arrays, lambda t: t * (t + 1) * (2 * t + 1) / 6.0, 3)
    assert expected_penalty_sum(chain.distribution, [0.0, 0.0, 1.0]) == pytest.approx(ref, rel=1e-8)


@given(seeds, st.integers(1, 6))
def test_shifted_closed_form_agrees_beyond_threshold(seed, m):
    # re-indexing the series by m - tau only drops terms whose falling factorial is zero
    chain, arrays = random_chain(seed, tau_max=3)
    dist = chain.distribution
    ref, _, _ = truncated_expectation(arrays, lambda t: float(falling_factorial(t, m)), m)
    assert factorial_moment(dist, m, legacy_form=True) == pytest.approx(ref, rel=1e-8, abs=1e-12)
    assert factorial_moment(dist, m, legacy_form=True) == pytest.approx(factorial_moment(dist, m), rel=1e-10)


@pytest.mark.parametrize("k", range(9))
def test_faulhaber_exact(k):
    coeffs = faulhaber_coefficients(k)
    for big_t in range(0, 25):
        lhs = sum(Fraction(t) ** k for t in range(1, big_t + 1))
        assert sum(c * Fraction(big_t) ** n for n, c in enumerate(coeffs)) == lhs


def test_chain_validation():
    with pytest.raises(ArgumentOutOfRange):
        scalar_chain(0.5, 0.5, 0)
    with pytest.raises(ValidationError, match="btm"):
        DualRegimeChain([1.0], 2, [[0.5]], [[0.5]], [[0.5]], [[0.5]], [[0.5]])
    with pytest.raises(ValidationError, match="regime 2"):
        DualRegimeChain([1.0], 2, [[1.0]], [[0.5]], [[0.5]], [[0.5]], [[0.4]])


def test_sampler_threshold_one_all_regime2():
    chain = scalar_chain(0.4, 0.6, 1)
    t, s, r2 = drdph_sample_many(chain, 1000, make_rng(2))
    assert np.array_equal(t, r2) and np.all(s == 0)
    one = drdph_sample(chain, make_rng(2))
    assert one[0] == one[2]


def test_sampler_matches_closed_forms():
    chain, _ = random_chain(21, k1_max=4, k2_max=4, tau_max=4)
    n = 10**6
    t, s, r2 = drdph_sample_many(chain, n, make_rng(9))
    sigma = np.sum(absorption_vectors(chain), axis=0)
    freq = np.bincount(s, minlength=chain.n_absorbing) / n
    se = np.sqrt(sigma * (1 - sigma) / n)
    assert np.all(np.abs(freq - sigma) <= 3 * se + 1e-12)
    mean = ordinary_moment(chain.distribution, 1)
    assert abs(t.mean() - mean) < 3 * t.std(ddof=1) / np.sqrt(n)
    np.testing.assert_array_equal(r2, np.maximum(t - chain.threshold + 1, 0))
