import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dioclt.counting import (
    CountSeries,
    DioInstance,
    count_shells_batch,
    count_solutions_bruteforce,
    count_solutions_shells,
    headline_instance,
    mean_shell,
    mean_total,
    normalized_batch,
    normalized_statistic,
    omega_n,
    theta_infty,
    variance_sigma2,
)
from dioclt.errors import BudgetExceeded
from dioclt.selftest import check_count_oracle, random_instance

SQ2, SQ3 = math.sqrt(2) - 1, math.sqrt(3) - 1


def test_instance_validation():
    with pytest.raises(ValueError):
        DioInstance.create((0.0,), (1.0,), (0.0,))
    with pytest.raises(ValueError):
        DioInstance.create((1.0, 1.0), (0.5, 0.6), (0.0, 0.0))
    with pytest.raises(ValueError):
        DioInstance.create((1.0,), (1.0,), (0.0,), boundary="open")


def test_bruteforce_examples():
    strict = DioInstance.create((1.0,), (1.0,), (0.0,))
    closed = DioInstance.create((1.0,), (1.0,), (0.0,), boundary="closed")
    assert count_solutions_bruteforce(strict, [[0.0]], 3) == 6
    assert count_solutions_bruteforce(closed, [[0.0]], 3) == 10


def triple_loop(theta, xi, T, vartheta=(1.0, 1.0), w=(0.5, 0.5)):
    total = 0
    for q in range(-T, T + 1):
        if q == 0:
            continue
        for p1 in range(-T - 3, T + 4):
            if abs(p1 + theta[0] * q + xi[0]) >= vartheta[0] * abs(q) ** -w[0]:
                continue
            for p2 in range(-T - 3, T + 4):
                if abs(p2 + theta[1] * q + xi[1]) < vartheta[1] * abs(q) ** -w[1]:
                    total += 1
    return total


def test_bruteforce_matches_triple_loop():
    inst = headline_instance()
    assert count_solutions_bruteforce(inst, [[0.3], [0.7]], 100) == triple_loop((0.3, 0.7), (SQ2, SQ3), 100)


def test_bruteforce_budget():
    inst = DioInstance.create((1.0,), (2.0,), (0.0,), n=2)
    with pytest.raises(BudgetExceeded):
        count_solutions_bruteforce(inst, [[0.1, 0.2]], 5000)


def test_shell_examples():
    inst = DioInstance.create((1.0,), (1.0,), (0.0,))
    assert count_solutions_shells(inst, [[0.0]], 1).per_shell.tolist() == [4]
    empty = count_solutions_shells(inst, [[0.0]], 0)
    assert empty.total == 0 and len(empty.per_shell) == 0


def test_shells_match_bruteforce_n2():
    rng = np.random.default_rng(8)
    for _ in range(20):
        raw = rng.uniform(0.5, 1.5, 2)
        inst = DioInstance.create(tuple(rng.uniform(0.5, 2, 2)), tuple(raw / raw.sum() * 2), tuple(rng.random(2)), n=2)
        theta = rng.random((2, 2))
        N = int(rng.integers(1, 5))
        assert count_solutions_shells(inst, theta, N).total == count_solutions_bruteforce(inst, theta, math.exp(N) * (1 - 1e-15))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_shell_total_is_sum(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, int(rng.integers(1, 3)))
    series = count_solutions_shells(inst, rng.random((inst.m, 1)), int(rng.integers(1, 7)))
    assert series.total == int(series.per_shell.sum())


def test_oracle_equivalence_smoke():
    assert check_count_oracle(trials=50, seed=3) == []


def test_batch_independent_of_threads():
    inst = headline_instance()
    thetas = np.random.default_rng(1).random((64, 2, 1))
    a = count_shells_batch(inst, thetas, 7, threads=1)
    b = count_shells_batch(inst, thetas, 7, threads=3)
    assert np.array_equal(a, b)


# --- means and constants ----------------------------------------------------


def test_mean_shell_examples():
    assert mean_shell(DioInstance.create((1.0,), (1.0,), (0.0,)), 0) == 6.0
    assert mean_shell(headline_instance(), 0) == 12.0


def test_mean_shell_independent_of_xi():
    base = mean_shell(headline_instance(), 3)
    for k in range(10):
        inst = DioInstance.create((1.0, 1.0), (0.5, 0.5), (k / 10, 1 - k / 10))
        assert mean_shell(inst, 3) == base


def test_mean_shell_monte_carlo():
    inst = headline_instance()
    rng = np.random.default_rng(9)
    table = count_shells_batch(inst, rng.random((4000, 2, 1)), 5)
    for s in range(5):
        col = table[:, s]
        assert abs(col.mean() - mean_shell(inst, s)) <= 3 * col.std(ddof=1) / math.sqrt(len(col))


def test_mean_total_is_sum_of_shells():
    inst = headline_instance()
    assert mean_total(inst, 6) == pytest.approx(sum(mean_shell(inst, s) for s in range(6)), rel=1e-15)


def test_omega_examples():
    assert omega_n(1) == 2 and omega_n(2) == 8


@pytest.mark.parametrize("n", [1, 2, 3])
def test_omega_quadrature(n):
    # integral over 1 <= ||y||_sup < e of ||y||^{-n}; radial density n 2^n r^{n-1}
    val, _ = integrate.quad(lambda r: n * 2**n * r ** (n - 1) * r**-n, 1, math.e, epsabs=1e-13)
    assert abs(val - omega_n(n)) <= 1e-8


def test_omega_quadrature_2d_direct():
    def inner(y2):
        f = lambda y1: max(abs(y1), abs(y2)) ** -2.0 if 1 <= max(abs(y1), abs(y2)) < math.e else 0.0
        pts = sorted({-math.e, -1.0, -abs(y2), abs(y2), 1.0, math.e})
        return integrate.quad(f, -math.e, math.e, points=pts, limit=200, epsabs=1e-12)[0]

    val, _ = integrate.quad(inner, -math.e, math.e, points=[-1, 0, 1], limit=200, epsabs=1e-11)
    assert abs(val - omega_n(2)) <= 1e-7


def test_variance_examples():
    assert variance_sigma2(DioInstance.create((1.0,), (1.0,), (0.0,))) == 4
    assert variance_sigma2(headline_instance()) == 8


def test_theta_infty():
    inst = headline_instance()
    assert theta_infty(inst, 0) == 8
    for s in range(1, 6):
        assert theta_infty(inst, s) == 0.0
    rng = np.random.default_rng(6)
    for _ in range(10):
        inst = random_instance(rng, int(rng.integers(1, 3)))
        assert abs(theta_infty(inst, 0) - variance_sigma2(inst)) <= 1e-6


def test_theta_infty_monte_carlo_volume():
    """Volume of Omega_e by uniform sampling of its bounding box."""
    inst = headline_instance()
    rng = np.random.default_rng(12)
    n = 400_000
    y = rng.uniform(-math.e, math.e, n)
    x = rng.uniform(-1, 1, (n, 2))
    r = np.abs(y)
    inside = (r >= 1) & (r < math.e) & np.all(np.abs(x) < r[:, None] ** -0.5, axis=1)
    box = 2 * math.e * 4
    est = box * inside.mean()
    se = box * inside.std(ddof=1) / math.sqrt(n)
    assert abs(est - theta_infty(inst, 0)) <= 3 * se


# --- normalisation ------------------------------------------------------------


def test_normalized_examples():
    inst = headline_instance()
    N = 5
    means = [mean_shell(inst, s) for s in range(N)]
    exact = CountSeries(np.zeros((2, 1)), np.array(means), N)
    assert normalized_statistic(exact, inst).birkhoff == pytest.approx(0.0, abs=1e-12)
    flat = CountSeries(np.zeros((2, 1)), np.array([8] * N), N)
    assert normalized_statistic(flat, inst).theorem == 0.0


def test_normalized_hand_computed():
    inst = headline_instance()
    series = count_solutions_shells(inst, [[0.3], [0.7]], 10)
    shells = series.per_shell.astype(float)
    stat = normalized_statistic(series, inst)
    assert stat.theorem == pytest.approx((shells.sum() - 80) / math.sqrt(10), rel=1e-12)
    want = sum(shells[s] - mean_shell(inst, s) for s in range(10)) / math.sqrt(10)
    assert stat.birkhoff == pytest.approx(want, rel=1e-12, abs=1e-12)
    thm, bk = normalized_batch(series.per_shell[None, :], inst, 10)
    assert thm[0] == pytest.approx(stat.theorem) and bk[0] == pytest.approx(stat.birkhoff)
