"""Affine unimodular lattices, diagonal flows and lattice geometry.

Lattices are stored by a column basis ``G`` and a translation ``v``: the point
set is ``{G k + v : k in Z^d}``.  All norms are the sup norm unless a function
says otherwise; covolumes of sublattices use the Gram (Euclidean) volume.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, DimensionError

UNIMODULAR_TOL = 1e-9
MEMBERSHIP_TOL = 1e-9
BALANCE_TOL = 1e-12
EXACT_SV_DIM = 4
EXACT_ALPHA_DIM = 3
# Hermite constant gamma_2: lambda_1 * lambda_2 <= gamma_2 * covol for rank-2 lattices.
RANK2_DISTORTION = 2.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class Weights:
    """Expansion weights ``w[:m]`` and contraction weights ``w[m:]``."""

    m: int
    n: int
    w: tuple
    clt_mode: bool = False

    def __post_init__(self):
        w = tuple(float(x) for x in self.w)
        object.__setattr__(self, "w", w)
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")
        if len(w) != self.m + self.n:
            raise DimensionError(f"expected {self.m + self.n} weights, got {len(w)}")
        if any(not (x > 0) or not math.isfinite(x) for x in w):
            raise ValueError(f"weights must be positive and finite, got {w}")
        imbalance = math.fsum(w[: self.m]) - math.fsum(w[self.m :])
        if abs(imbalance) > BALANCE_TOL:
            raise ValueError(f"unbalanced weights: expansion - contraction = {imbalance:.3e}")
        if self.clt_mode:
            if any(x != 1.0 for x in w[self.m :]):
                raise ValueError("CLT mode requires unit contraction weights")
            if abs(math.fsum(w[: self.m]) - self.n) > BALANCE_TOL:
                raise ValueError(f"CLT mode requires expansion weights summing to n={self.n}")

    @classmethod
    def clt(cls, expansion, n):
        """Weights with the given expansion part and ``n`` unit contraction weights."""
        expansion = tuple(float(x) for x in expansion)
        return cls(len(expansion), n, expansion + (1.0,) * n, clt_mode=True)

    @classmethod
    def equal(cls, m, n):
        return cls.clt((n / m,) * m, n)

    @property
    def d(self):
        return self.m + self.n

    @property
    def expansion(self):
        return self.w[: self.m]

    @property
    def log_diagonal(self):
        """Diagonal of ``log a_1``: ``(w_1..w_m, -w_{m+1}..-w_{m+n})``."""
        return np.array(self.w[: self.m] + tuple(-x for x in self.w[self.m :]))


@dataclass(frozen=True)
class FlowElement:
    """A diagonal element ``diag(exp(exponents))`` of SL_d(R)."""

    exponents: tuple
    kind: str = "a_t"

    def __post_init__(self):
        e = tuple(float(x) for x in self.exponents)
        object.__setattr__(self, "exponents", e)
        if self.kind not in ("a_t", "b_power"):
            raise ValueError(f"unknown flow kind {self.kind!r}")
        scale = max(1.0, max(abs(x) for x in e))
        if abs(math.fsum(e)) > BALANCE_TOL * scale:
            raise ValueError("flow exponents must sum to zero")

    @classmethod
    def a_t(cls, weights: Weights, t: float):
        return cls(tuple(t * weights.log_diagonal), "a_t")

    @classmethod
    def b_power(cls, weights: Weights, s: float):
        """``b^s`` with ``b = diag(e^{w_1},...,e^{w_m}, e^{-1},...,e^{-1})``."""
        logs = weights.expansion + (-1.0,) * weights.n
        return cls(tuple(s * x for x in logs), "b_power")

    @property
    def dim(self):
        return len(self.exponents)

    def inverse(self):
        return FlowElement(tuple(-x for x in self.exponents), self.kind)

    def matrix(self):
        return np.diag(np.exp(self.exponents))


@dataclass(frozen=True, eq=False)
class AffineLattice:
    """The affine lattice ``basis @ Z^d + shift``."""

    basis: np.ndarray
    shift: np.ndarray = field(default=None)
    check: bool = True

    def __post_init__(self):
        basis = np.array(self.basis, dtype=float)
        if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
            raise DimensionError(f"basis must be square, got shape {basis.shape}")
        d = basis.shape[0]
        shift = np.zeros(d) if self.shift is None else np.array(self.shift, dtype=float).reshape(-1)
        if shift.shape != (d,):
            raise DimensionError(f"shift must have length {d}, got {shift.shape}")
        if not (np.all(np.isfinite(basis)) and np.all(np.isfinite(shift))):
            raise ValueError("lattice data must be finite")
        if self.check and abs(np.linalg.det(basis) - 1.0) > UNIMODULAR_TOL:
            raise ValueError(f"basis is not unimodular: det = {np.linalg.det(basis)!r}")
        basis.setflags(write=False)
        shift.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "shift", shift)

    @property
    def dim(self):
        return self.basis.shape[0]

    @classmethod
    def standard(cls, d):
        return cls(np.eye(d))

    def coordinates(self, x):
        """Real coordinates ``G^{-1}(x - shift)`` of a point (or rows of points)."""
        x = np.asarray(x, dtype=float)
        return np.linalg.solve(self.basis, (x - self.shift).T).T

    def contains(self, x, tol=MEMBERSHIP_TOL):
        k = self.coordinates(x)
        return bool(np.all(np.abs(k - np.round(k)) <= tol))

    def point(self, k):
        return self.basis @ np.asarray(k, dtype=float) + self.shift

    def linear_part(self):
        return AffineLattice(self.basis, None, check=self.check)


def u_matrix(theta):
    """The unipotent ``u(theta) = [[I_m, theta], [0, I_n]]``."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    m, n = theta.shape
    u = np.eye(m + n)
    u[:m, m:] = theta
    return u


def make_affine_lattice(instance, theta) -> AffineLattice:
    """``Lambda_{theta,xi} = u(theta) Z^{m+n} + (xi, 0)``."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if theta.shape != (instance.m, instance.n):
        raise DimensionError(
            f"theta has shape {theta.shape}, instance needs ({instance.m}, {instance.n})"
        )
    shift = np.concatenate([np.asarray(instance.xi, dtype=float), np.zeros(instance.n)])
    return AffineLattice(u_matrix(theta), shift)


def apply_flow(lattice: AffineLattice, flow: FlowElement) -> AffineLattice:
    if flow.dim != lattice.dim:
        raise DimensionError(f"flow has dimension {flow.dim}, lattice {lattice.dim}")
    scale = np.exp(np.array(flow.exponents))
    return AffineLattice(scale[:, None] * lattice.basis, scale * lattice.shift, check=lattice.check)


# ---------------------------------------------------------------------------
# reduction and enumeration


def _gram_schmidt(b):
    d = b.shape[1]
    bstar = np.zeros_like(b)
    mu = np.zeros((d, d))
    for i in range(d):
        v = b[:, i].copy()
        for j in range(i):
            denom = bstar[:, j] @ bstar[:, j]
            mu[i, j] = (b[:, i] @ bstar[:, j]) / denom
            v -= mu[i, j] * bstar[:, j]
        bstar[:, i] = v
    return bstar, mu


def lll_reduce(basis, delta=0.99):
    """LLL-reduce the columns of ``basis``.

    Returns ``(reduced, U)`` with ``reduced = basis @ U`` and ``U`` an integer
    matrix of determinant +-1.  Floating point; intended for d <= 6.
    """
    b = np.array(basis, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionError(f"basis must be square, got shape {b.shape}")
    d = b.shape[1]
    if abs(np.linalg.det(b)) == 0.0:
        raise ValueError("singular basis")
    U = np.eye(d, dtype=np.int64)
    bstar, mu = _gram_schmidt(b)
    k = 1
    iterations = 0
    while k < d:
        iterations += 1
        if iterations > 100000:
            raise RuntimeError("LLL did not converge")
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q:
                b[:, k] -= q * b[:, j]
                U[:, k] -= q * U[:, j]
                bstar, mu = _gram_schmidt(b)
        nk = bstar[:, k] @ bstar[:, k]
        nk1 = bstar[:, k - 1] @ bstar[:, k - 1]
        if nk >= (delta - mu[k, k - 1] ** 2) * nk1:
            k += 1
        else:
            b[:, [k - 1, k]] = b[:, [k, k - 1]]
            U[:, [k - 1, k]] = U[:, [k, k - 1]]
            bstar, mu = _gram_schmidt(b)
            k = max(k - 1, 1)
    return b, U


def short_vectors(basis, radius, budget=2_000_000):
    """Integer coefficient vectors ``k != 0`` with ``||basis @ k||_2 <= radius``.

    Fincke-Pohst enumeration on the QR factor.  Only one of each pair
    ``+-k`` is returned (first nonzero coordinate positive).
    """
    b = np.asarray(basis, dtype=float)
    d = b.shape[1]
    r = np.linalg.qr(b, mode="r")
    diag = np.abs(np.diag(r))
    if np.any(diag == 0):
        raise ValueError("singular basis")
    r2 = radius * radius * (1 + 1e-12)
    out = []
    k = np.zeros(d, dtype=np.int64)
    nodes = 0

    def recurse(i, partial):
        nonlocal nodes
        # contribution of row i: (r_ii k_i + sum_{j>i} r_ij k_j)^2
        c = (r[i, i + 1 :] @ k[i + 1 :]) / r[i, i]
        rem = r2 - partial
        if rem < 0:
            return
        half = math.sqrt(rem) / diag[i]
        lo = math.ceil(-c - half)
        hi = math.floor(-c + half)
        for ki in range(lo, hi + 1):
            nodes += 1
            if nodes > budget:
                raise BudgetExceeded(f"enumeration exceeded {budget} nodes")
            k[i] = ki
            val = partial + (r[i, i] * (ki + c)) ** 2
            if val > r2:
                continue
            if i == 0:
                if np.any(k):
                    nz = k[np.nonzero(k)[0][0]]
                    if nz > 0:
                        out.append(k.copy())
            else:
                recurse(i - 1, val)
        k[i] = 0

    recurse(d - 1, 0.0)
    if not out:
        return np.zeros((0, d), dtype=np.int64)
    return np.array(out)


def _canonical(vectors):
    """Sign-normalise rows (first nonzero entry positive)."""
    v = np.array(vectors, dtype=float)
    for row in v:
        nz = np.nonzero(row)[0]
        if len(nz) and row[nz[0]] < 0:
            row *= -1
    return v


def shortest_vector(basis, norm="sup", budget=2_000_000):
    """A nonzero lattice vector of minimal norm and its length.

    ``norm`` is ``"sup"`` or ``"euclid"``.  Exact for d <= 4: LLL reduction,
    then Fincke-Pohst enumeration inside a certified Euclidean radius.
    """
    b = np.asarray(basis, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionError(f"basis must be square, got shape {b.shape}")
    d = b.shape[0]
    if d > EXACT_SV_DIM:
        raise DimensionError(f"exact shortest vector supports d <= {EXACT_SV_DIM}, got {d}")
    if not np.all(np.isfinite(b)) or abs(np.linalg.det(b)) < 1e-300:
        raise ValueError("singular basis")
    red, _ = lll_reduce(b)
    if norm == "sup":
        f = lambda x: np.max(np.abs(x), axis=-1)
        radius = float(np.min(f(red.T))) * math.sqrt(d)
    elif norm == "euclid":
        f = lambda x: np.sqrt(np.sum(x * x, axis=-1))
        radius = float(np.min(f(red.T)))
    else:
        raise ValueError(f"unknown norm {norm!r}")
    ks = short_vectors(red, radius, budget=budget)
    vecs = _canonical(ks @ red.T)
    lengths = f(vecs)
    best = float(np.min(lengths))
    ties = vecs[lengths <= best * (1 + 1e-12)]
    order = np.lexsort(ties.T[::-1])
    return ties[order[0]], best


def height_ht(lattice: AffineLattice) -> float:
    """``ht(g) = 1 / lambda_1(g Z^d)`` in the sup norm (the shift is ignored)."""
    return 1.0 / shortest_vector(lattice.basis, "sup")[1]


def successive_minima(basis, k=2):
    """First ``k`` Euclidean successive minima (small d only)."""
    b = np.asarray(basis, dtype=float)
    red, _ = lll_reduce(b)
    radius = float(np.max(np.linalg.norm(red, axis=0)))
    ks = short_vectors(red, radius)
    vecs = ks @ red.T
    lengths = np.linalg.norm(vecs, axis=1)
    order = np.argsort(lengths, kind="stable")
    chosen = []
    minima = []
    for idx in order:
        cand = chosen + [vecs[idx]]
        if np.linalg.matrix_rank(np.array(cand), tol=1e-9 * lengths[idx]) == len(cand):
            chosen = cand
            minima.append(float(lengths[idx]))
            if len(minima) == k:
                break
    return minima


def alpha_height(basis, approximate=False) -> float:
    """``alpha(Lambda) = sup_V 1/covol(V cap Lambda)`` over rational subspaces.

    Exact for d <= 3: rank-1 covolumes are Euclidean vector lengths and, for
    a unimodular lattice, the minimal rank-(d-1) covolume equals the dual
    lattice's first minimum.  For d >= 4 pass ``approximate=True``: middle
    ranks use ``1/(lambda_1 lambda_2)``, which undershoots the rank-2 term by
    at most the factor ``RANK2_DISTORTION``; only d = 4 is supported.
    """
    b = np.asarray(basis, dtype=float)
    d = b.shape[0]
    if d > EXACT_ALPHA_DIM and not approximate:
        raise DimensionError(f"exact alpha height supports d <= {EXACT_ALPHA_DIM}; pass approximate=True")
    if d > 4:
        raise DimensionError("alpha height implemented for d <= 4")
    value = 1.0
    if d == 1:
        return value
    value = max(value, 1.0 / shortest_vector(b, "euclid")[1])
    if d >= 3:
        dual = np.linalg.inv(b).T
        value = max(value, 1.0 / shortest_vector(dual, "euclid")[1])
    if d == 4:
        l1, l2 = successive_minima(b, 2)
        value = max(value, 1.0 / (l1 * l2))
    return value


def gauss_alpha_2d(basis) -> float:
    """Fast ``alpha`` for d = 2 via Lagrange-Gauss reduction (Euclidean)."""
    u = np.array(basis[:, 0], dtype=float)
    v = np.array(basis[:, 1], dtype=float)
    nu, nv = u @ u, v @ v
    if nu > nv:
        u, v, nu, nv = v, u, nv, nu
    for _ in range(10000):
        q = round((u @ v) / nu)
        if q:
            v = v - q * u
            nv = v @ v
        if nv >= nu:
            break
        u, v, nu, nv = v, u, nv, nu
    return max(1.0, 1.0 / math.sqrt(nu))


def enumerate_points_in_box(lattice: AffineLattice, lo, hi, budget=1_000_000, return_coords=False):
    """All lattice points with ``lo < x < hi`` componentwise (strict).

    Points come out in lexicographic order of their integer coordinates with
    respect to ``lattice.basis``.  Raises BudgetExceeded when the candidate
    coefficient box is larger than ``budget``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lattice.dim
    if lo.shape != (d,) or hi.shape != (d,):
        raise DimensionError("box bounds must match the lattice dimension")
    if not np.all(lo < hi):
        raise ValueError("box requires lo < hi componentwise")
    red, U = lll_reduce(lattice.basis)
    inv = np.linalg.inv(red)
    center = (lo + hi) / 2 - lattice.shift
    half = (hi - lo) / 2
    kc = inv @ center
    kh = np.abs(inv) @ half
    pad = 1e-9 * (1 + np.abs(kc) + kh)
    klo = np.ceil(kc - kh - pad).astype(np.int64)
    khi = np.floor(kc + kh + pad).astype(np.int64)
    sizes = np.maximum(khi - klo + 1, 0)
    total = float(np.prod(sizes.astype(float)))
    if total > budget:
        raise BudgetExceeded(f"box needs {total:.3g} candidates, budget {budget}")
    if total == 0:
        pts = np.zeros((0, d))
        return (pts, np.zeros((0, d), dtype=np.int64)) if return_coords else pts
    axes = [np.arange(a, b + 1) for a, b in zip(klo, khi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    pts = grid @ red.T + lattice.shift
    mask = np.all((pts > lo) & (pts < hi), axis=1)
    pts = pts[mask]
    coords = grid[mask] @ U.T
    order = np.lexsort(coords.T[::-1])
    pts, coords = pts[order], coords[order]
    return (pts, coords) if return_coords else pts


def random_unimodular_integer(d, rng, entry_bound=3, steps=6):
    """A random GL_d(Z) matrix built from elementary operations."""
    U = np.eye(d, dtype=np.int64)
    for _ in range(steps):
        i, j = rng.choice(d, size=2, replace=False)
        c = int(rng.integers(-entry_bound, entry_bound + 1))
        U[:, j] += c * U[:, i]
    if rng.random() < 0.5:
        U[:, 0] *= -1
    return U


def box_coefficients(d, bound):
    """All integer vectors in ``[-bound, bound]^d`` as rows."""
    return np.array(list(itertools.product(range(-bound, bound + 1), repeat=d)), dtype=np.int64)
