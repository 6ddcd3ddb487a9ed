"""Test functions on R^{m+n}, Siegel transforms and their truncations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from numpy.polynomial import Polynomial

from .errors import DimensionError
from .lattice import AffineLattice, alpha_height, enumerate_points_in_box

# degree-7 smoothstep: psi(0)=0, psi(1)=1, first three derivatives vanish at both ends
RAMP = Polynomial([0, 0, 0, 0, 35, -84, 70, -20])
KINDS = ("box_indicator_chi", "smoothed_box_f_eps", "radial_of_lambda1")


def ramp(u):
    """The monotone ramp psi: 0 on (-inf, 0], 1 on [1, inf)."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return RAMP(u)


@dataclass(frozen=True)
class TruncationSpec:
    L: float
    c: float = 2.0

    def __post_init__(self):
        if not self.L >= 1:
            raise ValueError(f"truncation level L must be >= 1, got {self.L}")
        if not self.c > 1:
            raise ValueError(f"truncation constant c must be > 1, got {self.c}")


def cutoff_eta(alpha, trunc: TruncationSpec):
    """``eta_L(alpha) = psi((log(cL) - log alpha) / (2 log c))``.

    Equal to 1 for ``alpha <= L/c`` and 0 for ``alpha >= cL``.
    """
    a = np.asarray(alpha, dtype=float)
    u = (math.log(trunc.c * trunc.L) - np.log(a)) / (2 * math.log(trunc.c))
    return ramp(u)


@dataclass(frozen=True)
class TestFunction:
    """Bounded compactly supported function on R^{m+n}.

    ``box_indicator_chi`` is the indicator of
    ``Omega_e = {1 <= ||y|| < e, |x_i| < vartheta_i ||y||^{-w_i}}``.
    ``smoothed_box_f_eps`` dominates it, equals 1 on it, and decays to 0
    through a polynomial ramp of width ``eps`` in ``||y||`` and in each
    ``|x_i|``.  ``radial_of_lambda1`` is the indicator of the sup-norm annulus
    ``r_lo <= ||x|| < r_hi``, a probe for short lattice vectors.
    """

    __test__ = False  # not a pytest class

    kind: str
    m: int
    n: int
    vartheta: tuple = ()
    weights: tuple = ()
    eps: float = 0.0
    radii: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown test function kind {self.kind!r}")
        object.__setattr__(self, "vartheta", tuple(float(v) for v in self.vartheta))
        object.__setattr__(self, "weights", tuple(float(v) for v in self.weights))
        if self.kind == "radial_of_lambda1":
            lo, hi = self.radii
            if not 0 <= lo < hi:
                raise ValueError("radial probe needs 0 <= r_lo < r_hi")
        else:
            if len(self.vartheta) != self.m or len(self.weights) != self.m:
                raise DimensionError("box test functions need m values of vartheta and weights")
        if self.kind == "smoothed_box_f_eps" and not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")

    @classmethod
    def chi(cls, instance):
        return cls("box_indicator_chi", instance.m, instance.n, instance.vartheta, instance.weights.expansion)

    @classmethod
    def f_eps(cls, instance, eps):
        return cls(
            "smoothed_box_f_eps", instance.m, instance.n, instance.vartheta, instance.weights.expansion, eps
        )

    @classmethod
    def radial(cls, m, n, r_lo, r_hi):
        return cls("radial_of_lambda1", m, n, radii=(float(r_lo), float(r_hi)))

    @property
    def d(self):
        return self.m + self.n

    def support_box(self):
        """Open box ``(lo, hi)`` containing the support."""
        if self.kind == "radial_of_lambda1":
            r = self.radii[1]
            return -np.full(self.d, r), np.full(self.d, r)
        pad = self.eps if self.kind == "smoothed_box_f_eps" else 0.0
        x = np.array(self.vartheta) + pad
        y = np.full(self.n, math.e + pad)
        hi = np.concatenate([x, y])
        return -hi, hi

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.d:
            raise DimensionError(f"points must have {self.d} coordinates")
        if self.kind == "radial_of_lambda1":
            r = np.max(np.abs(pts), axis=1)
            lo, hi = self.radii
            return ((r >= lo) & (r < hi)).astype(float)
        x = np.abs(pts[:, : self.m])
        r = np.max(np.abs(pts[:, self.m :]), axis=1)
        th = np.array(self.vartheta)
        w = np.array(self.weights)
        if self.kind == "box_indicator_chi":
            with np.errstate(divide="ignore"):
                a = th[None, :] * r[:, None] ** (-w[None, :])
            inside = (r >= 1.0) & (r < math.e) & np.all(x < a, axis=1)
            return inside.astype(float)
        eps = self.eps
        rc = np.clip(r, 1.0, math.e)
        a = th[None, :] * rc[:, None] ** (-w[None, :])
        gx = np.prod(1.0 - ramp((x - a) / eps), axis=1)
        hy = np.where(r < 1.0, ramp((r - (1.0 - eps)) / eps), 1.0 - ramp((r - math.e) / eps))
        return gx * hy

    def integral(self, power=1):
        """Closed-form ``int f^power`` over R^{m+n}."""
        if self.kind == "radial_of_lambda1":
            lo, hi = self.radii
            return (2 * hi) ** self.d - (2 * lo) ** self.d
        m, n = self.m, self.n
        th, w = self.vartheta, self.weights
        shell = n * 2**n  # d/dr of vol{||y|| <= r} = shell * r^{n-1}
        eps = self.eps if self.kind == "smoothed_box_f_eps" else 0.0
        if eps:
            tail = ((1 - RAMP) ** power).integ()
            x_pad = 2 * eps * (tail(1) - tail(0))  # int over the two x-ramps of (1-psi)^p
        else:
            x_pad = 0.0
        # middle region 1 <= ||y|| <= e: expand prod_i (2 th_i r^{-w_i} + x_pad)
        total = 0.0
        for mask in range(2**m):
            coef = 1.0
            expo = n
            for i in range(m):
                if mask >> i & 1:
                    coef *= 2 * th[i]
                    expo -= w[i]
                else:
                    coef *= x_pad
            if coef == 0.0:
                continue
            radial = 1.0 if abs(expo) < 1e-14 else math.expm1(expo) / expo
            total += coef * shell * radial
        if not eps:
            return total
        # ramps in ||y||: r = 1 - eps + eps u and r = e + eps u, u in [0, 1]
        k_in = math.prod(2 * t + x_pad for t in th)
        k_out = math.prod(2 * t * math.exp(-wi) + x_pad for t, wi in zip(th, w))
        inner = (RAMP**power) * Polynomial([1 - eps, eps]) ** (n - 1)
        outer = ((1 - RAMP) ** power) * Polynomial([math.e, eps]) ** (n - 1)
        inner_i = inner.integ()
        outer_i = outer.integ()
        total += k_in * shell * eps * (inner_i(1) - inner_i(0))
        total += k_out * shell * eps * (outer_i(1) - outer_i(0))
        return total


def siegel_transform(f: TestFunction, lattice: AffineLattice, budget=1_000_000) -> float:
    """``f_hat(Lambda) = sum_{x in Lambda} f(x)``."""
    if lattice.dim != f.d:
        raise DimensionError("test function and lattice dimensions differ")
    lo, hi = f.support_box()
    pts = enumerate_points_in_box(lattice, lo, hi, budget=budget)
    if len(pts) == 0:
        return 0.0
    return math.fsum(f(pts))


def truncated_siegel(f: TestFunction, lattice: AffineLattice, trunc: TruncationSpec, approximate=False) -> float:
    """``f_hat(Lambda) * eta_L(alpha(Lambda))``; skips enumeration where eta vanishes."""
    eta = float(cutoff_eta(alpha_height(lattice.basis, approximate=approximate), trunc))
    if eta == 0.0:
        return 0.0
    return siegel_transform(f, lattice) * eta


@njit(cache=True, nogil=True)
def _ramp_scalar(u):
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    u4 = u * u * u * u
    return u4 * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)))


@njit(cache=True, nogil=True)
def _box_value_2d(x, y, kind, th, w, eps):
    x = abs(x)
    r = abs(y)
    if kind == 0:
        if r < 1.0 or r >= math.e:
            return 0.0
        return 1.0 if x < th * r ** (-w) else 0.0
    rc = min(max(r, 1.0), math.e)
    gx = 1.0 - _ramp_scalar((x - th * rc ** (-w)) / eps)
    if r < 1.0:
        hy = _ramp_scalar((r - (1.0 - eps)) / eps)
    else:
        hy = 1.0 - _ramp_scalar((r - math.e) / eps)
    return gx * hy


@njit(cache=True, nogil=True)
def _truncated_kernel_2d(bases, shifts, kind, th, w, eps, hx, hy, logcl, two_logc, out, alphas):
    for k in range(bases.shape[0]):
        u0, u1 = bases[k, 0, 0], bases[k, 1, 0]
        v0, v1 = bases[k, 0, 1], bases[k, 1, 1]
        nu = u0 * u0 + u1 * u1
        nv = v0 * v0 + v1 * v1
        if nu > nv:
            u0, u1, v0, v1, nu, nv = v0, v1, u0, u1, nv, nu
        for _ in range(10000):
            q = round((u0 * v0 + u1 * v1) / nu)
            if q != 0:
                v0 -= q * u0
                v1 -= q * u1
                nv = v0 * v0 + v1 * v1
            if nv >= nu:
                break
            u0, u1, v0, v1, nu, nv = v0, v1, u0, u1, nv, nu
        alpha = max(1.0, 1.0 / math.sqrt(nu))
        alphas[k] = alpha
        eta = _ramp_scalar((logcl - math.log(alpha)) / two_logc)
        if eta == 0.0:
            out[k] = 0.0
            continue
        det = u0 * v1 - u1 * v0
        i00, i01, i10, i11 = v1 / det, -v0 / det, -u1 / det, u0 / det
        cx = -shifts[k, 0]
        cy = -shifts[k, 1]
        kc0 = i00 * cx + i01 * cy
        kc1 = i10 * cx + i11 * cy
        kh0 = abs(i00) * hx + abs(i01) * hy
        kh1 = abs(i10) * hx + abs(i11) * hy
        a_lo = math.ceil(kc0 - kh0 - 1e-9 * (1 + abs(kc0) + kh0))
        a_hi = math.floor(kc0 + kh0 + 1e-9 * (1 + abs(kc0) + kh0))
        b_lo = math.ceil(kc1 - kh1 - 1e-9 * (1 + abs(kc1) + kh1))
        b_hi = math.floor(kc1 + kh1 + 1e-9 * (1 + abs(kc1) + kh1))
        total = 0.0
        a = a_lo
        while a <= a_hi:
            b = b_lo
            while b <= b_hi:
                px = a * u0 + b * v0 + shifts[k, 0]
                py = a * u1 + b * v1 + shifts[k, 1]
                if abs(px) < hx and abs(py) < hy:
                    total += _box_value_2d(px, py, kind, th, w, eps)
                b += 1
            a += 1
        out[k] = eta * total


def truncated_siegel_batch_2d(f: TestFunction, bases, shifts, trunc: TruncationSpec):
    """Truncated transform of a box test function on many planar affine lattices.

    Returns ``(values, alphas)``.  ``bases`` has shape (S, 2, 2) with lattice
    vectors as columns; ``shifts`` has shape (S, 2).
    """
    if f.d != 2 or f.kind == "radial_of_lambda1":
        raise DimensionError("planar fast path needs a planar box test function")
    bases = np.ascontiguousarray(bases, dtype=float)
    shifts = np.ascontiguousarray(shifts, dtype=float)
    out = np.zeros(len(bases))
    alphas = np.zeros(len(bases))
    _, hi = f.support_box()
    kind = 0 if f.kind == "box_indicator_chi" else 1
    _truncated_kernel_2d(
        bases, shifts, kind, f.vartheta[0], f.weights[0], f.eps, hi[0], hi[1],
        math.log(trunc.c * trunc.L), 2 * math.log(trunc.c), out, alphas,
    )
    return out, alphas
