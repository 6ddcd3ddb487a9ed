"""Counting solutions of the weighted inhomogeneous Diophantine system.

For ``theta`` in M_{m x n}(R) and a shift ``xi`` we count integer pairs
``(p, q)`` with ``|theta_i . q + xi_i + p_i| < vartheta_i ||q||^{-w_i}``
(sup norm on q).  Two independent code paths exist: a vectorised numpy
brute force over ``1 <= ||q|| <= T`` and a compiled shell kernel that buckets
the same count into ``e^s <= ||q|| < e^{s+1}``.  For every ``q`` the number of
admissible ``p_i`` is the number of integers in an interval, so neither path
loops over ``p``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numba as nb
import numpy as np

from .errors import BudgetExceeded, DimensionError
from .lattice import Weights

Q_LOOP_BUDGET = 10**8
MULTI_Q_T_CAP = 1000.0


@dataclass(frozen=True)
class DioInstance:
    """Problem data ``(m, n, vartheta, weights, xi, boundary)``.

    ``boundary`` is ``"strict"`` (``|.| < vartheta ||q||^{-w}``) or
    ``"closed"`` (``<=``).  Weights are always in CLT mode.
    """

    m: int
    n: int
    vartheta: tuple
    weights: Weights
    xi: tuple
    boundary: str = "strict"

    def __post_init__(self):
        object.__setattr__(self, "vartheta", tuple(float(x) for x in self.vartheta))
        object.__setattr__(self, "xi", tuple(float(x) for x in self.xi))
        if len(self.vartheta) != self.m or len(self.xi) != self.m:
            raise DimensionError("vartheta and xi must have length m")
        if any(not (v > 0) or not math.isfinite(v) for v in self.vartheta):
            raise ValueError(f"vartheta must be positive, got {self.vartheta}")
        if not all(math.isfinite(x) for x in self.xi):
            raise ValueError("xi must be finite")
        if (self.weights.m, self.weights.n) != (self.m, self.n):
            raise DimensionError("weights do not match (m, n)")
        if abs(math.fsum(self.weights.expansion) - self.n) > 1e-12:
            raise ValueError("expansion weights must sum to n")
        if self.boundary not in ("strict", "closed"):
            raise ValueError(f"boundary must be 'strict' or 'closed', got {self.boundary!r}")

    @classmethod
    def create(cls, vartheta, expansion_weights, xi, n=1, boundary="strict"):
        w = Weights.clt(expansion_weights, n)
        return cls(w.m, n, tuple(vartheta), w, tuple(xi), boundary)

    @property
    def d(self):
        return self.m + self.n

    @property
    def expansion(self):
        return np.array(self.weights.expansion)

    def check_theta(self, theta):
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if theta.shape != (self.m, self.n):
            raise DimensionError(f"theta has shape {theta.shape}, expected ({self.m}, {self.n})")
        return theta


def headline_instance():
    """m=2, n=1, vartheta=(1,1), w=(1/2,1/2), xi=(sqrt2-1, sqrt3-1)."""
    return DioInstance.create((1.0, 1.0), (0.5, 0.5), (math.sqrt(2) - 1, math.sqrt(3) - 1), n=1)


@dataclass(frozen=True, eq=False)
class CountSeries:
    theta: np.ndarray
    per_shell: np.ndarray
    N: int

    @property
    def total(self):
        return int(self.per_shell.sum())


class NormalizedStatistic(NamedTuple):
    theorem: float
    birkhoff: float


# ---------------------------------------------------------------------------
# brute force


def _p_counts(c, r, strict):
    """Number of integers p with |c + p| < r (strict) or <= r (closed)."""
    if strict:
        return np.ceil(c + r) - np.floor(c - r) - 1
    return np.floor(c + r) - np.ceil(c - r) + 1


def _centers(theta, xi, q):
    """``xi_i + sum_j theta_ij q_j`` accumulated in a fixed order."""
    m, n = theta.shape
    c = np.empty((q.shape[0], m))
    for i in range(m):
        acc = np.full(q.shape[0], xi[i])
        for j in range(n):
            acc = acc + theta[i, j] * q[:, j]
        c[:, i] = acc
    return c


def _q_grid(n, qmax):
    axes = [np.arange(-qmax, qmax + 1, dtype=np.int64)] * n
    q = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    return q[np.any(q != 0, axis=1)]


def count_solutions_bruteforce(instance: DioInstance, theta, T: float, budget=Q_LOOP_BUDGET) -> int:
    """``#{(p, q) : 1 <= ||q|| <= T and the system holds}``."""
    theta = instance.check_theta(theta)
    if T < 1:
        raise ValueError("T must be >= 1")
    n = instance.n
    qmax = int(math.floor(T))
    size = (2 * qmax + 1) ** n
    if size > budget or (n >= 2 and T > MULTI_Q_T_CAP):
        raise BudgetExceeded(f"brute force over {size} values of q exceeds budget")
    total = 0
    chunk = max(1, 2_000_000 // max(1, instance.m))
    q_all = _q_grid(n, qmax)
    for start in range(0, len(q_all), chunk):
        q = q_all[start : start + chunk]
        norm = np.max(np.abs(q), axis=1).astype(float)
        c = _centers(theta, instance.xi, q)
        prod = np.ones(len(q), dtype=np.int64)
        for i in range(instance.m):
            r = instance.vartheta[i] * norm ** (-instance.weights.w[i])
            prod *= _p_counts(c[:, i], r, instance.boundary == "strict").astype(np.int64)
        total += int(prod.sum())
    return total


# ---------------------------------------------------------------------------
# shell kernel


class _ShellTable(NamedTuple):
    q: np.ndarray  # K x n integer vectors
    shell: np.ndarray  # K shell indices
    radii: np.ndarray  # K x m interval half-widths


@lru_cache(maxsize=8)
def _shell_table(instance: DioInstance, N: int) -> _ShellTable:
    n = instance.n
    if N == 0:
        return _ShellTable(np.zeros((0, n), np.int64), np.zeros(0, np.int64), np.zeros((0, instance.m)))
    qmax = math.ceil(math.exp(N)) - 1
    size = (2 * qmax + 1) ** n
    if size > Q_LOOP_BUDGET or (n >= 2 and qmax > MULTI_Q_T_CAP):
        raise BudgetExceeded(f"shell counting over {size} values of q exceeds budget")
    if n == 1:
        pos = np.arange(1, qmax + 1, dtype=np.int64)
        q = np.stack([pos, -pos], axis=1).reshape(-1, 1)
    else:
        q = _q_grid(n, qmax)
    norm = np.max(np.abs(q), axis=1).astype(float)
    bounds = np.exp(np.arange(N + 1, dtype=float))
    shell = np.searchsorted(bounds, norm, side="right") - 1
    keep = (shell >= 0) & (shell < N)
    q, norm, shell = q[keep], norm[keep], shell[keep]
    radii = np.empty((len(q), instance.m))
    for i in range(instance.m):
        radii[:, i] = instance.vartheta[i] * norm ** (-instance.weights.w[i])
    for arr in (q, shell, radii):
        arr.setflags(write=False)
    return _ShellTable(np.ascontiguousarray(q), np.ascontiguousarray(shell), np.ascontiguousarray(radii))


@nb.njit(nogil=True, cache=True)
def _shell_kernel(thetas, xi, q, shell, radii, strict, out):
    S = thetas.shape[0]
    m = thetas.shape[1]
    n = thetas.shape[2]
    K = q.shape[0]
    for s in range(S):
        for k in range(K):
            prod = 1
            for i in range(m):
                c = xi[i]
                for j in range(n):
                    c = c + thetas[s, i, j] * q[k, j]
                r = radii[k, i]
                if strict:
                    cnt = math.ceil(c + r) - math.floor(c - r) - 1
                else:
                    cnt = math.floor(c + r) - math.ceil(c - r) + 1
                prod *= int(cnt)
                if prod == 0:
                    break
            out[s, shell[k]] += prod


def count_shells_batch(instance: DioInstance, thetas, N: int, threads: int = 1) -> np.ndarray:
    """Per-shell counts for a stack of ``theta`` matrices, shape ``(S, N)``.

    Work is split into contiguous sample blocks; every block writes its own
    rows, so the result does not depend on ``threads``.
    """
    thetas = np.ascontiguousarray(np.asarray(thetas, dtype=float).reshape(-1, instance.m, instance.n))
    if N < 0:
        raise ValueError("N must be >= 0")
    out = np.zeros((thetas.shape[0], N), dtype=np.int64)
    if N == 0 or thetas.shape[0] == 0:
        return out
    table = _shell_table(instance, N)
    xi = np.array(instance.xi)
    strict = instance.boundary == "strict"
    blocks = np.array_split(np.arange(thetas.shape[0]), max(1, min(threads, thetas.shape[0])))

    def work(idx):
        if len(idx):
            sub = np.zeros((len(idx), N), dtype=np.int64)
            _shell_kernel(thetas[idx[0] : idx[-1] + 1], xi, table.q, table.shell, table.radii, strict, sub)
            out[idx[0] : idx[-1] + 1] = sub

    if threads <= 1:
        for idx in blocks:
            work(idx)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, blocks))
    return out


def count_solutions_shells(instance: DioInstance, theta, N: int) -> CountSeries:
    """Counts of ``Lambda_{theta,xi}`` in each shell ``b^{-s} Omega_e``, s < N."""
    theta = instance.check_theta(theta)
    if N < 0:
        raise ValueError("N must be >= 0")
    per_shell = count_shells_batch(instance, theta[None], N)[0]
    return CountSeries(theta, per_shell, N)


# ---------------------------------------------------------------------------
# exact means and constants


def _sup_sphere_count(r: int, n: int) -> int:
    return (2 * r + 1) ** n - (2 * r - 1) ** n


def mean_shell(instance: DioInstance, s: int) -> float:
    """``2^m prod(vartheta) * sum_{e^s <= ||q|| < e^{s+1}} ||q||^{-n}`` exactly."""
    if s < 0:
        raise ValueError("s must be >= 0")
    lo = math.ceil(math.exp(s))
    hi = math.ceil(math.exp(s + 1)) - 1
    n = instance.n
    total = math.fsum(_sup_sphere_count(r, n) / r**n for r in range(lo, hi + 1))
    return 2**instance.m * math.prod(instance.vartheta) * total


def mean_total(instance: DioInstance, N: int) -> float:
    return math.fsum(mean_shell(instance, s) for s in range(N))


def omega_n(n: int) -> float:
    """``int_{1 <= ||y|| < e} ||y||^{-n} dy`` for the sup norm on R^n, ``n 2^n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(n * 2**n)


def variance_sigma2(instance: DioInstance) -> float:
    """``C_{m,n} = sigma^2_{m,n} = 2^m vartheta_1...vartheta_m omega_n``."""
    return 2**instance.m * math.prod(instance.vartheta) * omega_n(instance.n)


def theta_infty(instance: DioInstance, s: int) -> float:
    """``vol(Omega_e cap b^{-s} Omega_e)``.

    Zero for s >= 1 since the shells ``[1, e)`` and ``[e^s, e^{s+1})`` in
    ``||y||`` are disjoint.  For s = 0 it is ``vol(Omega_e)``, evaluated as the
    radial integral ``n 2^n 2^m prod(vartheta) int_1^e r^{n-1-sum(w)} dr``.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    if s >= 1:
        return 0.0
    n = instance.n
    beta = n - math.fsum(instance.weights.expansion)
    radial = 1.0 if abs(beta) < 1e-14 else math.expm1(beta) / beta
    return 2**instance.m * math.prod(instance.vartheta) * n * 2**n * radial


def normalized_statistic(series: CountSeries, instance: DioInstance) -> NormalizedStatistic:
    """Theorem form ``(Delta - C N)/sqrt(N)`` and Birkhoff form ``F_N``."""
    N = series.N
    if N < 1:
        raise ValueError("N must be >= 1")
    C = variance_sigma2(instance)
    root = math.sqrt(N)
    theorem = (series.total - C * N) / root
    birkhoff = math.fsum(float(series.per_shell[s]) - mean_shell(instance, s) for s in range(N)) / root
    return NormalizedStatistic(theorem, birkhoff)


def normalized_batch(per_shell: np.ndarray, instance: DioInstance, N: int):
    """Vectorised ``normalized_statistic`` over the first N shells of each row."""
    C = variance_sigma2(instance)
    totals = per_shell[:, :N].sum(axis=1).astype(float)
    root = math.sqrt(N)
    theorem = (totals - C * N) / root
    birkhoff = (totals - mean_total(instance, N)) / root
    return theorem, birkhoff
