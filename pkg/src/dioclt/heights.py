"""Diophantine diagnostics of shifts and base points.

Kim's scale ``zeta(v, T)``, a bounded Liouville-witness scan, the thin
cylinder test for lattices in R^{d+1}, and Shi's height functions
``phi_eps`` / ``alpha_eps`` on exterior powers of R^{d+1}.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import BudgetExceeded, DimensionError
from .lattice import Weights, lll_reduce, short_vectors

ZERO_TOL = 1e-12


def dist_to_integers(x):
    """Sup-norm distance of each row of ``x`` to Z^d."""
    x = np.asarray(x, dtype=float)
    return np.max(np.abs(x - np.round(x)), axis=-1)


def zeta_kim(v, T: float) -> int:
    """Smallest N with ``min_{1<=q<=N} ||q v||_Z <= N^2 / T``.

    The scan stops by ``N = ceil(sqrt(T)) + 1`` at the latest, since then
    ``N^2 / T >= 1 > 1/2 >= ||q v||_Z``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    ceiling = math.isqrt(math.ceil(T)) + 2
    running = math.inf
    for N in range(1, ceiling + 1):
        running = min(running, float(dist_to_integers(N * v)))
        if running <= N * N / T:
            return N
    return ceiling  # unreachable: guaranteed by the bound above


def liouville_witness(v, E: float, Qmax: int, q_min: int = 2):
    """First ``(p, q)`` with ``q_min <= q <= Qmax`` and ``||q v - p|| < q^{-E}``.

    The homogeneous form defines the same Liouville set as
    ``||v - p/q|| < q^{-E}`` (shift E by one).  ``q = 1`` always passes for
    E >= 0, so the scan starts at ``q_min = 2`` unless told otherwise.
    Returns None when the range holds no witness; that says nothing about
    whether v is Liouville.
    """
    if Qmax < 1:
        raise ValueError("Qmax must be >= 1")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    q_min = max(1, int(q_min))
    chunk = 65536
    for start in range(q_min, Qmax + 1, chunk):
        q = np.arange(start, min(Qmax, start + chunk - 1) + 1, dtype=float)
        qv = q[:, None] * v[None, :]
        p = np.round(qv)
        dist = np.max(np.abs(qv - p), axis=1)
        hits = np.nonzero(dist < q ** (-float(E)))[0]
        if len(hits):
            k = hits[0]
            return p[k].astype(np.int64), int(q[k])
    return None


def has_vector_in_cylinder(basis, A: float, B: float, budget=2_000_000) -> Optional[np.ndarray]:
    """A nonzero lattice vector ``(x, y)`` with ``||x|| <= A`` and ``|y| <= B``, or None.

    Columns of ``basis`` span a lattice in R^{d+1}; the last coordinate is
    ``y``.  The lattice is rescaled so the cylinder becomes the unit sup
    ball, short vectors are enumerated inside the circumscribed Euclidean
    ball, and candidates are checked against the original inequalities.
    """
    b = np.asarray(basis, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionError("basis must be square")
    if not (A > 0 and B >= 0):
        raise ValueError("need A > 0 and B >= 0")
    if abs(np.linalg.det(b)) == 0:
        raise ValueError("singular basis")
    D = b.shape[0]
    scale = np.full(D, 1.0 / A)
    scale[-1] = 1.0 / (B if B > 0 else 1e-9 * A)
    red, _ = lll_reduce(scale[:, None] * b)
    ks = short_vectors(red, math.sqrt(D) * (1 + 1e-9), budget=budget)
    if len(ks) == 0:
        return None
    vecs = (ks @ red.T) / scale[None, :]
    ok = np.all(np.abs(vecs[:, :-1]) <= A, axis=1) & (np.abs(vecs[:, -1]) <= B)
    if not np.any(ok):
        return None
    cand = vecs[ok]
    # sign-canonical (first nonzero coordinate positive), then smallest Euclidean
    # norm, ties broken towards the lexicographically largest vector
    lead = np.argmax(np.abs(cand) > 1e-12, axis=1)
    cand = cand * np.sign(cand[np.arange(len(cand)), lead])[:, None]
    keys = [-cand[:, j] for j in range(cand.shape[1] - 1, -1, -1)]
    order = np.lexsort(keys + [np.round(np.sum(cand * cand, axis=1), 12)])
    return cand[order[0]]


def cylinder_lattice(g, v, weights: Weights, t: float, theta):
    """Basis of ``diag(a_t u(theta), 1) [[g, g v], [0, 1]] Z^{d+1}``."""
    g = np.asarray(g, dtype=float)
    d = g.shape[0]
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    top = np.eye(d + 1)
    top[:d, :d] = g
    top[:d, d] = g @ np.asarray(v, dtype=float)
    flow = np.eye(d + 1)
    u = np.eye(d)
    u[: weights.m, weights.m :] = theta
    flow[:d, :d] = np.diag(np.exp(t * weights.log_diagonal)) @ u
    return flow @ top


# ---------------------------------------------------------------------------
# Shi heights


@dataclass(frozen=True)
class ShiWeightData:
    d: int
    weights: Weights
    delta_i: tuple
    delta_eta: tuple
    eps0: float

    @classmethod
    def build(cls, weights: Weights, eps0: float):
        d = weights.d
        if not 0 < eps0 < 1:
            raise ValueError("eps0 must lie in (0, 1)")
        delta_i = tuple((d + 1 - i) * i for i in range(1, d + 1))
        logs = weights.log_diagonal
        delta_eta = tuple(float(math.fsum(logs[:k])) for k in range(1, d))
        bad = [k + 1 for k, x in enumerate(delta_eta) if not x > 0]
        if bad:
            raise ValueError(f"delta_eta_k must be positive; fails for k = {bad}")
        return cls(d, weights, delta_i, delta_eta, float(eps0))


@dataclass(frozen=True, eq=False)
class MonomialVector:
    """An element of ``Lambda^i R^{d+1}`` split along ``R^{d+1} = R^d + R e_{d+1}``.

    ``pure_part`` holds the coordinates on ``Lambda^i R^d`` (index sets of
    size i from ``range(d)``, lexicographic); ``wedge_part`` those on
    ``Lambda^{i-1} R^d ^ e_{d+1}``.
    """

    ambient: int
    degree: int
    pure_part: np.ndarray
    wedge_part: np.ndarray

    def __post_init__(self):
        d = self.ambient - 1
        if not 1 <= self.degree <= d:
            raise ValueError(f"degree must lie in [1, {d}], got {self.degree}")
        pure = np.asarray(self.pure_part, dtype=float).reshape(-1)
        wedge = np.asarray(self.wedge_part, dtype=float).reshape(-1)
        if len(pure) != math.comb(d, self.degree) or len(wedge) != math.comb(d, self.degree - 1):
            raise DimensionError("component sizes do not match the degree")
        if not (np.all(np.isfinite(pure)) and np.all(np.isfinite(wedge))):
            raise ValueError("components must be finite")
        object.__setattr__(self, "pure_part", pure)
        object.__setattr__(self, "wedge_part", wedge)

    @classmethod
    def from_vectors(cls, vectors):
        """``v_1 ^ ... ^ v_i`` for the rows of ``vectors`` (each in R^{d+1})."""
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        i, D = V.shape
        d = D - 1
        pure = [np.linalg.det(V[:, list(S)]) for S in itertools.combinations(range(d), i)]
        wedge = [np.linalg.det(V[:, list(S) + [d]]) for S in itertools.combinations(range(d), i - 1)]
        return cls(D, i, np.array(pure), np.array(wedge))


def _components(degree, d):
    """(pure weight index, wedge weight index); 0 marks the trivial weight."""
    pure = 0 if degree == d else degree
    wedge = degree - 1
    return pure, wedge


def _phi_from_norms(degree, d, pure_norm, wedge_norm, wd: ShiWeightData, zero_tol=ZERO_TOL):
    """phi_eps from sup norms of the two components (vectorised)."""
    pure_norm = np.asarray(pure_norm, dtype=float)
    wedge_norm = np.asarray(wedge_norm, dtype=float)
    eps = wd.eps0
    di = wd.delta_i[degree - 1]
    pw, ww = _components(degree, d)
    trivial = np.zeros_like(pure_norm)
    result = np.full(pure_norm.shape, np.inf)
    for weight, norm in ((pw, pure_norm), (ww, wedge_norm)):
        if weight == 0:
            trivial = np.maximum(trivial, norm)
            continue
        de = wd.delta_eta[weight - 1]
        with np.errstate(divide="ignore"):
            term = np.where(norm > zero_tol, eps ** (di / de) * norm ** (-1.0 / de), np.inf)
        result = np.minimum(result, term)
    return np.where(trivial > eps**di, 0.0, result)


def phi_epsilon(v: MonomialVector, wd: ShiWeightData, zero_tol=ZERO_TOL) -> float:
    """Shi's ``phi_eps`` of a monomial.

    0 when the trivial-weight component exceeds ``eps^{delta_i}``; otherwise
    the minimum over nonvanishing weight components of
    ``eps^{delta_i/delta_eta} ||pi_eta(v)||^{-1/delta_eta}`` (inf if none).
    """
    d = v.ambient - 1
    if d != wd.d:
        raise DimensionError("monomial ambient dimension does not match the weight data")
    pn = float(np.max(np.abs(v.pure_part))) if v.pure_part.size else 0.0
    wn = float(np.max(np.abs(v.wedge_part))) if v.wedge_part.size else 0.0
    return float(_phi_from_norms(v.degree, d, pn, wn, wd, zero_tol))


class AlphaEpsilon(NamedTuple):
    value: float
    certified: bool
    radius: float


def _alpha_eps_at_radius(red, wd: ShiWeightData, radius, budget, zero_tol):
    D = red.shape[0]
    d = D - 1
    ks = short_vectors(red, radius * math.sqrt(D), budget=budget)
    vecs = ks @ red.T
    vecs = vecs[np.max(np.abs(vecs), axis=1) <= radius * (1 + 1e-12)]
    best = 0.0
    if len(vecs) == 0:
        return best
    for degree in range(1, d + 1):
        if degree > len(vecs):
            break
        combos = np.array(list(itertools.combinations(range(len(vecs)), degree)))
        if len(combos) * math.comb(D, degree) > budget:
            raise BudgetExceeded(f"{len(combos)} degree-{degree} monomials exceed budget")
        pure_norm = np.zeros(len(combos))
        wedge_norm = np.zeros(len(combos))
        for S in itertools.combinations(range(D), degree):
            minors = np.linalg.det(vecs[combos][:, :, list(S)]) if degree > 1 else vecs[combos[:, 0], S[0]]
            if d in S:
                wedge_norm = np.maximum(wedge_norm, np.abs(minors))
            else:
                pure_norm = np.maximum(pure_norm, np.abs(minors))
        nonzero = np.maximum(pure_norm, wedge_norm) > zero_tol
        if not np.any(nonzero):
            continue
        phi = _phi_from_norms(degree, d, pure_norm[nonzero], wedge_norm[nonzero], wd, zero_tol)
        best = max(best, float(np.max(phi)))
    return best


def alpha_epsilon(basis, wd: ShiWeightData, radius: float, certify=True, budget=5_000_000, zero_tol=ZERO_TOL):
    """``max phi_eps`` over monomials of lattice vectors of sup norm <= radius.

    The true ``alpha_eps`` is at least the returned value.  With ``certify``
    the search is repeated at twice the radius and ``certified`` reports
    whether the value was unchanged.
    """
    b = np.asarray(basis, dtype=float)
    if b.shape != (wd.d + 1, wd.d + 1):
        raise DimensionError(f"basis must be {(wd.d + 1, wd.d + 1)}")
    red, _ = lll_reduce(b)
    value = _alpha_eps_at_radius(red, wd, radius, budget, zero_tol)
    if not certify:
        return AlphaEpsilon(value, False, radius)
    doubled = _alpha_eps_at_radius(red, wd, 2 * radius, budget, zero_tol)
    same = doubled == value or (math.isfinite(value) and abs(doubled - value) <= 1e-12 * max(1.0, abs(value)))
    return AlphaEpsilon(doubled, bool(same), 2 * radius)
