"""Fast oracle-equivalence and exact-identity checks."""

from __future__ import annotations

import math

import numpy as np

from .counting import (
    DioInstance,
    count_solutions_bruteforce,
    count_solutions_shells,
    headline_instance,
    theta_infty,
    variance_sigma2,
)
from .heights import has_vector_in_cylinder, zeta_kim
from .lattice import alpha_height, box_coefficients, random_unimodular_integer

__test__ = False


def random_instance(rng, m, n=1):
    vartheta = tuple(rng.uniform(0.3, 2.0, m))
    raw = rng.uniform(0.5, 1.5, m)
    w = tuple(raw / raw.sum() * n)
    xi = tuple(rng.random(m))
    boundary = "strict" if rng.random() < 0.5 else "closed"
    return DioInstance.create(vartheta, w, xi, n=n, boundary=boundary)


def check_count_oracle(trials=500, seed=11, max_T=1000):
    """Shell totals agree exactly with direct enumeration.  Returns mismatches."""
    rng = np.random.default_rng(seed)
    bad = []
    for k in range(trials):
        m = 1 if k % 2 == 0 else 2
        inst = random_instance(rng, m)
        theta = rng.random((m, 1))
        N = int(rng.integers(1, int(math.log(max_T)) + 1))
        shells = count_solutions_shells(inst, theta, N)
        brute = count_solutions_bruteforce(inst, theta, math.exp(N) * (1 - 1e-15))
        if shells.total != brute:
            bad.append((inst, theta, N, shells.total, brute))
    return bad


def zeta_definition(v, T):
    """Smallest N whose running minimum meets ``N^2 / T``, by a direct scan."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    N = 1
    while True:
        best = min(float(np.max(np.abs(q * v - np.round(q * v)))) for q in range(1, N + 1))
        if best <= N * N / T:
            return N
        N += 1


def coefficient_bound(basis, radius):
    """Every lattice vector of Euclidean norm <= radius has integer coordinates
    bounded by ``||basis^{-1}||_2 * radius``."""
    return int(math.floor(np.linalg.norm(np.linalg.inv(basis), 2) * radius * (1 + 1e-9))) + 1


def cylinder_oracle(basis, A, B, bound=None):
    D = basis.shape[0]
    if bound is None:
        bound = coefficient_bound(basis, math.sqrt((D - 1) * A * A + B * B))
    coeffs = box_coefficients(D, bound)
    coeffs = coeffs[np.any(coeffs != 0, axis=1)]
    vecs = coeffs @ basis.T
    ok = np.all(np.abs(vecs[:, :-1]) <= A, axis=1) & (np.abs(vecs[:, -1]) <= B)
    return bool(np.any(ok))


# Hermite constants: a unimodular lattice has a nonzero vector of length <= sqrt(gamma_d)
HERMITE = {2: 2 / math.sqrt(3), 3: 2 ** (1 / 3)}


def _min_primitive_length(basis):
    """Shortest nonzero vector by scanning a certified coefficient box, one
    slice of the first coefficient at a time.  A shortest vector is primitive."""
    d = basis.shape[0]
    radius = math.sqrt(HERMITE[d]) * abs(np.linalg.det(basis)) ** (1 / d)
    bound = coefficient_bound(basis, radius)
    rest = box_coefficients(d - 1, bound)
    best = math.inf
    for k0 in range(0, bound + 1):  # x and -x have equal length
        coeffs = np.concatenate([np.full((len(rest), 1), k0), rest], axis=1)
        if k0 == 0:
            coeffs = coeffs[np.any(coeffs != 0, axis=1)]
        lengths = np.linalg.norm(coeffs @ basis.T, axis=1)
        best = min(best, float(lengths.min()))
    return best


def alpha_oracle(basis):
    """``max 1/covol`` over primitive sublattices of a unimodular lattice, d <= 3."""
    d = basis.shape[0]
    best = max(1.0, 1.0 / _min_primitive_length(basis))
    if d == 3:
        # a primitive rank-2 sublattice has covolume equal to its primitive dual normal
        best = max(best, 1.0 / _min_primitive_length(np.linalg.inv(basis).T))
    return best


def random_conditioned_basis(rng, d, max_cond=1e3):
    while True:
        g = rng.normal(size=(d, d))
        det = np.linalg.det(g)
        if abs(det) < 1e-3:
            continue
        g = g / abs(det) ** (1.0 / d)
        if np.linalg.cond(g) <= max_cond:
            return g


def run_selftest(quick=True) -> list[tuple[str, bool, str]]:
    results = []
    bad = check_count_oracle(trials=60 if quick else 500)
    results.append(("shell counts equal brute-force counts", not bad, f"{len(bad)} mismatches"))

    inst = headline_instance()
    zeros = all(theta_infty(inst, s) == 0.0 for s in range(1, 6))
    close = abs(theta_infty(inst, 0) - variance_sigma2(inst)) <= 1e-6
    results.append(("theta_infty vanishes off zero and equals sigma^2 at zero", zeros and close,
                    f"theta_infty(0)={theta_infty(inst, 0)!r}, sigma^2={variance_sigma2(inst)!r}"))

    rng = np.random.default_rng(5)
    mism = 0
    for _ in range(20 if quick else 100):
        v = rng.random(int(rng.integers(1, 3)))
        T = float(rng.uniform(1, 2000 if quick else 10_000))
        mism += zeta_kim(v, T) != zeta_definition(v, T)
    results.append(("zeta scale matches the definition scan", mism == 0, f"{mism} mismatches"))

    mism = 0
    for _ in range(30 if quick else 200):
        D = int(rng.integers(2, 4))
        b = random_conditioned_basis(rng, D, 20.0)
        A, B = rng.uniform(0.2, 1.5), rng.uniform(0.0, 1.5)
        found = has_vector_in_cylinder(b, A, B) is not None
        mism += found != cylinder_oracle(b, A, B)
    results.append(("cylinder test matches exhaustive coefficients", mism == 0, f"{mism} mismatches"))

    mism = 0
    for k in range(10 if quick else 100):
        d = 2 + k % 2
        b = random_conditioned_basis(rng, d, 50.0) @ random_unimodular_integer(d, rng)
        a, o = alpha_height(b), alpha_oracle(b)
        mism += abs(a - o) > 1e-9 * o
    results.append(("alpha height matches primitive-sublattice scan", mism == 0, f"{mism} mismatches"))
    return results
