"""Cumulants, k-statistics and Kolmogorov-Smirnov distances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .rng import seed_stream

MAX_CUMULANT_ORDER = 8
BOOTSTRAP_RESAMPLES = 200
TAG_BOOTSTRAP = 7


@dataclass(frozen=True, eq=False)
class SampleSet:
    values: np.ndarray
    label: str = ""
    seed: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class CumulantEstimate:
    order: int
    value: float
    stderr: float
    sample_count: int


def restricted_growth_strings(r: int) -> Iterator[tuple]:
    """Restricted growth strings of length r in lexicographic order.

    ``a[0] = 0`` and ``a[i] <= 1 + max(a[:i])``; each string encodes one set
    partition of ``{0, ..., r-1}`` (block label of each element).
    """
    if r < 1:
        return
    a = [0] * r
    while True:
        yield tuple(a)
        i = r - 1
        while i > 0 and a[i] > max(a[:i]):
            i -= 1
        if i == 0:
            return
        a[i] += 1
        a[i + 1 :] = [0] * (r - i - 1)


def set_partitions(r: int):
    """Set partitions of ``{0..r-1}`` as tuples of blocks (tuples)."""
    for a in restricted_growth_strings(r):
        k = max(a) + 1
        blocks = [[] for _ in range(k)]
        for i, label in enumerate(a):
            blocks[label].append(i)
        yield tuple(tuple(bl) for bl in blocks)


def joint_cumulant(moments: Callable[[tuple], float], r: int) -> float:
    """Joint cumulant of ``phi_0..phi_{r-1}`` from a moment oracle.

    ``moments(I)`` must return ``E[prod_{i in I} phi_i]`` for a sorted tuple
    of indices ``I``.  Sum over set partitions P of
    ``(-1)^{|P|-1} (|P|-1)! prod_{I in P} E[prod_{i in I} phi_i]``.
    """
    if not 1 <= r <= MAX_CUMULANT_ORDER:
        raise ValueError(f"order must lie in [1, {MAX_CUMULANT_ORDER}], got {r}")
    cache = {}
    terms = []
    for partition in set_partitions(r):
        k = len(partition)
        prod = 1.0
        for block in partition:
            if block not in cache:
                cache[block] = float(moments(block))
            prod *= cache[block]
        terms.append((-1) ** (k - 1) * math.factorial(k - 1) * prod)
    return math.fsum(terms)


def _central_sums(x):
    """``(n, sum e^2, sum e^3, sum e^4)`` for deviations e from the mean.

    Data are first pivoted by the median order statistic, so adding a
    constant that is exactly representable leaves every later operation
    bit-identical.
    """
    n = len(x)
    pivot = np.partition(x, n // 2)[n // 2]
    y = x - pivot
    mean = math.fsum(y) / n
    e = y - mean
    e2 = e * e
    return n, math.fsum(e2), math.fsum(e2 * e), math.fsum(e2 * e2)


def _k_from_sums(r, n, s2, s3, s4):
    m2, m3, m4 = s2 / n, s3 / n, s4 / n
    if r == 2:
        return n / (n - 1) * m2
    if r == 3:
        return n * n / ((n - 1) * (n - 2)) * m3
    return n * n * ((n + 1) * m4 - 3 * (n - 1) * m2 * m2) / ((n - 1) * (n - 2) * (n - 3))


def _k_stat(x, r):
    return _k_from_sums(r, *_central_sums(x))


def k_statistic(samples, r: int, seed: int = 0, resamples: int = BOOTSTRAP_RESAMPLES, tag: int = 0) -> CumulantEstimate:
    """Unbiased k-statistic ``k_r`` (r in 2..4) with a bootstrap standard error.

    Resample ``j`` draws its indices from ``seed_stream(seed, j, tag)``, so
    the standard error is reproducible and independent of scheduling.
    """
    x = samples.values if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float).reshape(-1)
    if r not in (2, 3, 4):
        raise ValueError("k-statistics implemented for r in {2, 3, 4}")
    n = len(x)
    if n <= r:
        raise ValueError(f"need more than {r} samples, got {n}")
    value = _k_stat(x, r)
    if resamples <= 0:
        return CumulantEstimate(r, value, 0.0, n)
    boots = np.empty(resamples)
    for j in range(resamples):
        idx = seed_stream(seed, j, TAG_BOOTSTRAP * 1000 + tag).integers(0, n, n)
        boots[j] = _k_stat(x[idx], r)
    return CumulantEstimate(r, value, float(np.std(boots, ddof=1)), n)


def bootstrap_stderr(x, statistic, seed: int = 0, resamples: int = BOOTSTRAP_RESAMPLES, tag: int = 0) -> float:
    x = np.asarray(x, dtype=float)
    n = len(x)
    boots = np.empty(resamples)
    for j in range(resamples):
        idx = seed_stream(seed, j, TAG_BOOTSTRAP * 1000 + tag).integers(0, n, n)
        boots[j] = statistic(x[idx])
    return float(np.std(boots, ddof=1))


def normal_cdf(eta, variance: float):
    """``N_sigma(eta)`` for the centred normal law with the given variance."""
    if not variance > 0:
        raise ValueError("variance must be positive")
    z = np.asarray(eta, dtype=float) / math.sqrt(2.0 * variance)
    if z.ndim == 0:
        return 0.5 * math.erfc(-float(z))
    return 0.5 * np.vectorize(math.erfc, otypes=[float])(-z)


def ks_distance(samples, variance: float) -> float:
    """``sup_x |F_n(x) - N_sigma(x)|`` using both one-sided gaps at each jump."""
    x = samples.values if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float).reshape(-1)
    n = len(x)
    if n == 0:
        raise ValueError("empty sample")
    xs = np.sort(x)
    cdf = normal_cdf(xs, variance)
    k = np.arange(1, n + 1)
    d_plus = np.max(k / n - cdf)
    d_minus = np.max(cdf - (k - 1) / n)
    return float(max(d_plus, d_minus, 0.0))
