import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dioclt.stats import (
    SampleSet,
    joint_cumulant,
    k_statistic,
    ks_distance,
    normal_cdf,
    restricted_growth_strings,
    set_partitions,
)

BELL = [1, 2, 5, 15, 52, 203, 877, 4140]


def test_partition_counts_and_order():
    for r, bell in enumerate(BELL, start=1):
        rgs = list(restricted_growth_strings(r))
        assert len(rgs) == bell
        assert rgs == sorted(rgs)
        assert len(set(rgs)) == bell
    assert list(set_partitions(3))[0] == ((0, 1, 2),)


def const_oracle(c):
    return lambda block: c ** len(block)


def test_cumulant_examples():
    mom = {(0,): 2.0, (1,): 3.0, (0, 1): 10.0}
    assert joint_cumulant(lambda b: mom[b], 2) == 10.0 - 6.0
    assert joint_cumulant(const_oracle(1.7), 3) == pytest.approx(0.0, abs=1e-12)
    # Bernoulli(1/2): every moment is 1/2
    assert joint_cumulant(lambda b: 0.5, 3) == 0.0


def test_cumulant_order_range():
    with pytest.raises(ValueError):
        joint_cumulant(const_oracle(1.0), 9)
    with pytest.raises(ValueError):
        joint_cumulant(const_oracle(1.0), 0)


def gaussian_moment_oracle(cov):
    """E[prod x_i] for a centred Gaussian vector (Isserlis)."""

    def moment(block):
        if len(block) % 2:
            return 0.0
        if not block:
            return 1.0
        first, rest = block[0], block[1:]
        return sum(cov[first][j] * moment(rest[:k] + rest[k + 1 :]) for k, j in enumerate(rest))

    return moment


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 4), st.floats(0.1, 5))
def test_cumulant_multilinear(r, slot, lam):
    slot = slot % r
    rng = np.random.default_rng(r * 10 + slot)
    means = rng.normal(size=r)
    base = lambda block: float(np.prod([means[i] + 0.3 * i for i in block])) + 0.1 * len(block) ** 2
    scaled = lambda block: base(block) * (lam if slot in block else 1.0)
    assert joint_cumulant(scaled, r) == pytest.approx(lam * joint_cumulant(base, r), rel=1e-9, abs=1e-9)


def test_cumulant_independent_groups_vanish():
    for r in (2, 3, 4):
        split = r // 2
        mA = lambda block: 1.0 + 0.5 * len(block) ** 2
        mB = lambda block: 1.0 + 0.25 * len(block) ** 3
        prod = lambda block: mA(tuple(i for i in block if i < split)) * mB(tuple(i for i in block if i >= split))
        assert joint_cumulant(prod, r) == pytest.approx(0.0, abs=1e-9)


def test_gaussian_higher_cumulants_vanish():
    cov = [[1.0, 0.3, 0.1, 0.0], [0.3, 2.0, 0.2, 0.4], [0.1, 0.2, 1.5, 0.5], [0.0, 0.4, 0.5, 1.0]]
    mom = gaussian_moment_oracle(cov)
    assert joint_cumulant(mom, 4) == pytest.approx(0.0, abs=1e-12)
    assert joint_cumulant(lambda b: mom(tuple(i % 2 for i in b)), 2) == pytest.approx(0.3)


# --- k-statistics ---------------------------------------------------------------


def test_k_constant_samples():
    for r in (2, 3, 4):
        assert k_statistic(np.full(50, 3.7), r, resamples=10).value == 0.0


def test_k_normal_samples():
    x = np.random.default_rng(0).normal(size=100_000)
    k2, k3, k4 = (k_statistic(x, r, seed=1, resamples=200) for r in (2, 3, 4))
    assert abs(k2.value - 1) <= 3 * k2.stderr
    assert abs(k3.value) <= 3 * k3.stderr
    assert abs(k4.value) <= 3 * k4.stderr
    assert k2.sample_count == 100_000 and k2.stderr > 0


def test_k3_of_balanced_bits_shrinks():
    vals = []
    for n in (100, 10_000, 1_000_000):
        x = np.tile([0.0, 1.0], n // 2)
        vals.append(abs(k_statistic(x, 3, resamples=0).value))
    assert vals[-1] <= 1e-12


def test_k2_is_unbiased_variance():
    rng = np.random.default_rng(2)
    x = rng.integers(-50, 50, 101).astype(float)
    xs = [Fraction(int(v)) for v in x]
    mean = sum(xs) / len(xs)
    exact = sum((v - mean) ** 2 for v in xs) / (len(xs) - 1)
    # the mean is rounded once, so allow a couple of ulps
    assert abs(k_statistic(x, 2, resamples=0).value - float(exact)) <= 2 * math.ulp(float(exact))
    y = rng.normal(size=1000)
    assert k_statistic(y, 2, resamples=0).value == pytest.approx(np.var(y, ddof=1), rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(-1000, 1000), min_size=6, max_size=60),
    st.integers(-(2**20), 2**20),
    st.sampled_from([2, 3, 4]),
)
def test_k_shift_invariant_exactly(values, c, r):
    x = np.array(values, dtype=float) / 8
    a = k_statistic(x, r, resamples=0).value
    b = k_statistic(x + c, r, resamples=0).value
    assert a == b


def test_k_insufficient_samples():
    with pytest.raises(ValueError):
        k_statistic(np.arange(3.0), 3)
    with pytest.raises(ValueError):
        k_statistic(np.arange(10.0), 5)


def test_bootstrap_reproducible():
    x = np.random.default_rng(3).normal(size=500)
    a = k_statistic(x, 3, seed=9, tag=4)
    b = k_statistic(SampleSet(x), 3, seed=9, tag=4)
    assert a == b


def test_sample_set_rejects_nonfinite():
    with pytest.raises(ValueError):
        SampleSet([1.0, math.nan])


# --- Gaussian reference and KS --------------------------------------------------


def test_normal_cdf_examples():
    assert normal_cdf(0.0, 3.0) == 0.5
    assert abs(normal_cdf(1e3, 1.0) - 1.0) <= 1e-12
    for var in (0.5, 1.0, 8.0):
        assert normal_cdf(math.sqrt(var), var) == pytest.approx(0.8413447460685429, abs=1e-15)
    with pytest.raises(ValueError):
        normal_cdf(0.0, 0.0)


def test_ks_examples():
    from scipy.stats import norm

    n = 1000
    q = norm.ppf((np.arange(1, n + 1) - 0.5) / n, scale=2.0)
    assert ks_distance(q, 4.0) <= 1 / (2 * n) + 1e-9
    assert ks_distance(np.zeros(10), 1.0) == 0.5
    x = np.random.default_rng(5).normal(scale=2.0, size=10_000)
    assert ks_distance(x, 4.0) <= 0.02
    with pytest.raises(ValueError):
        ks_distance(np.array([]), 1.0)


def test_ks_matches_scipy():
    from scipy.stats import kstest

    x = np.random.default_rng(6).normal(size=300) * 1.3 + 0.2
    assert ks_distance(x, 1.0) == pytest.approx(kstest(x, "norm").statistic, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50), st.floats(0.01, 100))
def test_ks_range(values, var):
    assert 0.0 <= ks_distance(np.array(values), var) <= 1.0
