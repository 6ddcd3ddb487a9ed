"""Experiment orchestration.

Every experiment samples ``theta`` uniformly from ``[0, 1]^{m x n}``; sample
``k`` draws from ``seed_stream(master_seed, k, TAG_THETA)``, so sample sets of
different sizes share prefixes and results never depend on thread count.

Second-moment cookbook (``variance`` runs): for shells ``s`` in
``config.shells`` the record holds the sample mean of ``chi_hat(b^s
Lambda_theta)^2`` per shell and pooled over shells and samples.  The
reference is the affine Rogers identity for the indicator ``chi`` of
``Omega_e``, ``(int chi)^2 + int chi^2 = C^2 + C`` with ``C = vol(Omega_e)``,
since ``chi^2 = chi``.  No per-shell rescaling is applied: ``b^s`` preserves
volume, so the same reference applies to every shell.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import __version__
from .counting import (
    DioInstance,
    count_shells_batch,
    mean_shell,
    mean_total,
    normalized_batch,
    theta_infty,
    variance_sigma2,
)
from .errors import BudgetExceeded, ConfigError
from .heights import liouville_witness
from .lattice import AffineLattice, alpha_height, enumerate_points_in_box, gauss_alpha_2d, u_matrix
from .rng import seed_stream, uniform_block
from .siegel import TestFunction, TruncationSpec, cutoff_eta, truncated_siegel_batch_2d
from .stats import bootstrap_stderr, k_statistic, ks_distance

KINDS = ("clt", "mean_growth", "variance", "cumulant_decay", "equidist", "alpha_tail")
TAG_THETA = 1
TAG_QMC = 2
HIST_BINS = 40


@dataclass
class ExperimentConfig:
    """Validated description of one run.  ``scales`` holds N (counting
    kinds), t (equidist) or L (alpha_tail) values."""

    kind: str
    instance: DioInstance
    scales: tuple
    samples: int
    master_seed: int = 0
    trunc: TruncationSpec | None = None
    test_function: dict | None = None
    base_point: tuple | None = None
    multi_times: tuple = ()
    shells: tuple = ()
    kappa_hat: float = 2.0
    s_fixed: int | None = None
    liouville_E: float = 3.0
    liouville_Qmax: int = 10_000
    sampling: str = "uniform"
    ks_threshold: float = 0.15
    slope_tolerance: float = 0.10
    equidist_tolerance: float = 0.05
    tail_slope_max: float = -1.0
    second_moment_tolerance: float = 0.10
    threads: int = 1
    echo: dict = field(default_factory=dict)

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}", "kind")
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}", "samples")
        if not self.scales:
            raise ConfigError("at least one scale is required", "scales")
        if any(b <= a for a, b in zip(self.scales, self.scales[1:])):
            raise ConfigError(f"scales must be strictly increasing, got {list(self.scales)}", "scales")
        if self.kind in ("clt", "mean_growth", "variance", "cumulant_decay"):
            if any(int(N) != N or N < 1 for N in self.scales):
                raise ConfigError("N values must be positive integers", "N_list")
        if self.kind == "cumulant_decay" and self.samples < 5:
            raise ConfigError("cumulant estimates need at least 5 samples", "samples")
        if self.kind == "equidist":
            if any(t <= 0 for t in self.scales):
                raise ConfigError("t values must be positive", "t_list")
            if self.trunc is None:
                raise ConfigError("equidist needs a truncation spec", "trunc")
        if self.kind == "alpha_tail" and any(L < 1 for L in self.scales):
            raise ConfigError("L values must be >= 1", "L_list")
        if self.sampling not in ("uniform", "qmc"):
            raise ConfigError(f"unknown sampling mode {self.sampling!r}", "sampling")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1", "threads")
        if not self.echo:
            self.echo = self.to_echo()
        return self

    def to_echo(self) -> dict:
        """Plain-data view of every field, defaults included."""
        inst = self.instance
        scale_key = {"equidist": "t_list", "alpha_tail": "L_list"}.get(self.kind, "N_list")
        tf = dict(self.test_function) if self.test_function else None
        if self.kind == "equidist" and tf is None:
            tf = {"kind": "smoothed_box_f_eps", "eps": 0.05}
        bp = None
        if self.base_point is not None:
            g, v = self.base_point
            bp = {"g": np.asarray(g, dtype=float).tolist(), "v": np.asarray(v, dtype=float).tolist()}
        return {
            "kind": self.kind,
            "m": inst.m,
            "n": inst.n,
            "vartheta": list(inst.vartheta),
            "weights": list(inst.weights.w),
            "xi": list(inst.xi),
            "boundary": inst.boundary,
            scale_key: [float(x) if scale_key == "t_list" else x for x in self.scales],
            "samples": self.samples,
            "master_seed": self.master_seed,
            "trunc": {"L": self.trunc.L, "c": self.trunc.c} if self.trunc else None,
            "test_function": tf,
            "base_point": bp,
            "multi_times": [list(t) for t in self.multi_times],
            "shells": list(self.shells),
            "kappa_hat": self.kappa_hat,
            "s_fixed": self.s_fixed,
            "liouville_E": self.liouville_E,
            "liouville_Qmax": self.liouville_Qmax,
            "sampling": self.sampling,
            "ks_threshold": self.ks_threshold,
            "slope_tolerance": self.slope_tolerance,
            "equidist_tolerance": self.equidist_tolerance,
            "tail_slope_max": self.tail_slope_max,
            "second_moment_tolerance": self.second_moment_tolerance,
        }


@dataclass
class RunRecord:
    config: dict
    rows: list
    verdicts: dict
    extras: dict = field(default_factory=dict)
    annotations: list = field(default_factory=list)
    wall_clock: float = 0.0
    version: str = __version__

    def value(self, statistic, scale=None):
        for row in self.rows:
            if row["statistic"] == statistic and (scale is None or row["scale"] == scale):
                return row["value"]
        raise KeyError((statistic, scale))

    def series(self, statistic):
        """``(scales, values, stderrs)`` of one statistic in row order."""
        rows = [r for r in self.rows if r["statistic"] == statistic]
        return [r["scale"] for r in rows], [r["value"] for r in rows], [r["stderr"] for r in rows]


def _row(scale, statistic, value, stderr, samples):
    return {
        "scale": float(scale),
        "statistic": statistic,
        "value": float(value),
        "stderr": float(stderr),
        "samples": int(samples),
    }


# ---------------------------------------------------------------------------
# trend verdicts


def compute_D(t_list) -> float:
    """``min({t_i} U {|t_i - t_j| : i != j})``."""
    t = [float(x) for x in t_list]
    if not t:
        raise ValueError("need at least one time")
    if any(x <= 0 for x in t):
        raise ValueError("times must be positive")
    if len(set(t)) != len(t):
        raise ValueError(f"times must be pairwise distinct, got {t}")
    gaps = [abs(a - b) for i, a in enumerate(t) for b in t[i + 1 :]]
    return min(t + gaps)


def weakly_decreasing(values, stderrs) -> bool:
    """Nonincreasing up to one inversion no larger than the joint standard error."""
    ups = [i for i in range(1, len(values)) if values[i] > values[i - 1]]
    if not ups:
        return True
    if len(ups) > 1:
        return False
    i = ups[0]
    return values[i] - values[i - 1] <= math.hypot(stderrs[i], stderrs[i - 1])


def ols(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    residuals = y - (slope * x + intercept)
    return float(slope), float(intercept), [float(r) for r in residuals]


def recompute_verdicts(record: RunRecord) -> dict:
    """Re-derive every verdict of ``record`` from its stored rows and config."""
    cfg = record.config
    kind = cfg["kind"]
    v = {}
    if kind == "clt":
        _, ks, se = record.series("ks_theorem")
        v["ks_theorem_weakly_decreasing"] = weakly_decreasing(ks, se)
        v["ks_theorem_final_within_threshold"] = ks[-1] <= cfg["ks_threshold"]
    elif kind == "mean_growth":
        scales, means, ses = record.series("mean_count")
        _, refs, _ = record.series("mean_reference")
        C = variance_sigma2(_instance_from_echo(cfg))
        slope, _, _ = ols(scales, means)
        v["slope_within_tolerance"] = abs(slope - C) <= cfg["slope_tolerance"] * C
        v["means_within_3se"] = all(abs(a - b) <= 3 * s for a, b, s in zip(means, refs, ses))
    elif kind == "variance":
        if any(r["statistic"] == "second_moment_pooled" for r in record.rows):
            pooled = record.value("second_moment_pooled")
            ref = record.value("second_moment_reference")
            v["second_moment_within_tolerance"] = abs(pooled - ref) <= cfg["second_moment_tolerance"] * ref
        _, k2, se = record.series("k2_birkhoff")
        ref = record.value("theta_infty_0")
        v["k2_final_within_3se"] = abs(k2[-1] - ref) <= 3 * se[-1]
    elif kind == "cumulant_decay":
        _, k3, se3 = record.series("k3_birkhoff")
        _, k4, se4 = record.series("k4_birkhoff")
        v["k3_final_within_3se"] = abs(k3[-1]) <= 3 * se3[-1]
        v["k4_final_within_3se"] = abs(k4[-1]) <= 3 * se4[-1]
        v["abs_k3_weakly_decreasing"] = weakly_decreasing([abs(x) for x in k3], se3)
    elif kind == "equidist":
        _, err, se = record.series("abs_error")
        integral = record.value("integral_f")
        v["error_weakly_decreasing"] = weakly_decreasing(err, se)
        v["final_error_within_tolerance"] = err[-1] <= cfg["equidist_tolerance"] * integral
        multi = [r for r in record.rows if r["statistic"] == "multi_abs_error"]
        if len(multi) >= 2:
            lo = min(multi, key=lambda r: r["scale"])
            hi = max(multi, key=lambda r: r["scale"])
            v["multi_error_decreasing_in_D"] = hi["value"] <= lo["value"]
    elif kind == "alpha_tail":
        scales, frac, _ = record.series("exceedance_fraction")
        pts = [(math.log(L), math.log(f)) for L, f in zip(scales, frac) if f > 0]
        if len(pts) >= 2:
            slope, _, _ = ols(*zip(*pts))
            v["tail_slope_below_threshold"] = slope <= cfg["tail_slope_max"]
        else:
            v["tail_slope_below_threshold"] = False
        v["fractions_nonincreasing"] = all(b <= a for a, b in zip(frac, frac[1:]))
    return v


def _instance_from_echo(cfg) -> DioInstance:
    return DioInstance.create(cfg["vartheta"], cfg["weights"][: cfg["m"]], cfg["xi"], n=cfg["n"], boundary=cfg["boundary"])


# ---------------------------------------------------------------------------
# sampling and the shared count cache

_COUNT_CACHE: dict = {}


def sample_thetas(instance: DioInstance, samples: int, master_seed: int, mode="uniform") -> np.ndarray:
    width = instance.m * instance.n
    if mode == "qmc":
        engine = qmc.Sobol(d=width, scramble=True, seed=seed_stream(master_seed, 0, TAG_QMC))
        pts = engine.random(samples)
    else:
        pts = uniform_block(master_seed, 0, samples, width, TAG_THETA)
    return pts.reshape(samples, instance.m, instance.n)


def shell_counts(instance: DioInstance, N: int, samples: int, master_seed: int, threads: int = 1) -> np.ndarray:
    """Per-sample, per-shell counts (samples x N) shared by all counting kinds."""
    for (inst, n_max, s_count, seed), table in _COUNT_CACHE.items():
        if inst == instance and seed == master_seed and n_max >= N and s_count >= samples:
            return table[:samples, :N]
    thetas = sample_thetas(instance, samples, master_seed)
    table = count_shells_batch(instance, thetas, N, threads=threads)
    table.setflags(write=False)
    if len(_COUNT_CACHE) > 8:
        _COUNT_CACHE.clear()
    _COUNT_CACHE[(instance, N, samples, master_seed)] = table
    return table


def clear_cache():
    _COUNT_CACHE.clear()


# ---------------------------------------------------------------------------
# kinds


def _sem(x):
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0


def _run_clt(cfg, counts, rows, verdicts, extras):
    inst = cfg.instance
    C = variance_sigma2(inst)
    S = cfg.samples
    hist = {}
    for j, N in enumerate(cfg.scales):
        N = int(N)
        thm, bk = normalized_batch(counts, inst, N)
        ks_t = ks_distance(thm, C)
        ks_b = ks_distance(bk, C)
        se_t = bootstrap_stderr(thm, lambda x: ks_distance(x, C), cfg.master_seed, tag=100 + j)
        se_b = bootstrap_stderr(bk, lambda x: ks_distance(x, C), cfg.master_seed, tag=200 + j)
        totals = counts[:, :N].sum(axis=1)
        rows += [
            _row(N, "mean_count", totals.mean(), _sem(totals), S),
            _row(N, "mean_theorem", thm.mean(), _sem(thm), S),
            _row(N, "variance_theorem", np.var(thm, ddof=1) if S > 1 else 0.0, 0.0, S),
            _row(N, "ks_theorem", ks_t, se_t, S),
            _row(N, "ks_birkhoff", ks_b, se_b, S),
        ]
        edges = np.linspace(-4 * math.sqrt(C), 4 * math.sqrt(C), HIST_BINS + 1)
        h, _ = np.histogram(thm, bins=edges)
        hist[str(N)] = {"edges": [float(e) for e in edges], "counts": [int(c) for c in h]}
    extras["histograms_theorem_form"] = hist
    extras["variance_reference"] = C


def _run_mean_growth(cfg, counts, rows, verdicts, extras):
    inst = cfg.instance
    S = cfg.samples
    means = []
    for N in cfg.scales:
        N = int(N)
        totals = counts[:, :N].sum(axis=1)
        ref = mean_total(inst, N)
        means.append(float(totals.mean()))
        rows += [
            _row(N, "mean_count", totals.mean(), _sem(totals), S),
            _row(N, "mean_reference", ref, 0.0, S),
        ]
    slope, intercept, residuals = ols([float(N) for N in cfg.scales], means)
    extras["regression"] = {"slope": slope, "intercept": intercept, "residuals": residuals}
    extras["slope_reference"] = variance_sigma2(inst)


def _run_variance(cfg, counts, rows, verdicts, extras):
    inst = cfg.instance
    S = cfg.samples
    rows.append(_row(0, "theta_infty_0", theta_infty(inst, 0), 0.0, S))
    for j, N in enumerate(cfg.scales):
        N = int(N)
        _, bk = normalized_batch(counts, inst, N)
        est = k_statistic(bk, 2, seed=cfg.master_seed, tag=300 + j) if S > 2 else None
        rows.append(_row(N, "k2_birkhoff", est.value if est else 0.0, est.stderr if est else 0.0, S))
    if cfg.shells:
        C = variance_sigma2(inst)
        squares = []
        for s in cfg.shells:
            col = counts[:, int(s)].astype(float)
            sq = col * col
            squares.append(sq)
            rows += [
                _row(s, "shell_mean", col.mean(), _sem(col), S),
                _row(s, "shell_mean_reference", mean_shell(inst, int(s)), 0.0, S),
                _row(s, "second_moment_shell", sq.mean(), _sem(sq), S),
            ]
        pooled = np.concatenate(squares)
        # shells of one theta are dependent: the standard error is taken over per-theta averages
        per_theta = np.mean(np.stack(squares, axis=1), axis=1)
        rows += [
            _row(0, "second_moment_pooled", pooled.mean(), _sem(per_theta), S * len(cfg.shells)),
            _row(0, "second_moment_reference", C * C + C, 0.0, S),
        ]


def _run_cumulants(cfg, counts, rows, verdicts, extras):
    inst = cfg.instance
    S = cfg.samples
    for j, N in enumerate(cfg.scales):
        N = int(N)
        _, bk = normalized_batch(counts, inst, N)
        k3 = k_statistic(bk, 3, seed=cfg.master_seed, tag=400 + j)
        k4 = k_statistic(bk, 4, seed=cfg.master_seed, tag=500 + j)
        rows += [
            _row(N, "k3_birkhoff", k3.value, k3.stderr, S),
            _row(N, "k4_birkhoff", k4.value, k4.stderr, S),
        ]


class _OrbitEvaluator:
    """Truncated Siegel transform of f along ``a_t u(theta) (g Z^d + g v)``."""

    def __init__(self, cfg):
        inst = cfg.instance
        self.inst = inst
        self.trunc = cfg.trunc
        tf = cfg.test_function or {"kind": "smoothed_box_f_eps", "eps": 0.05}
        if tf["kind"] == "smoothed_box_f_eps":
            self.f = TestFunction.f_eps(inst, tf.get("eps", 0.05))
        elif tf["kind"] == "box_indicator_chi":
            self.f = TestFunction.chi(inst)
        else:
            lo, hi = tf.get("radii", (0.5, 1.0))
            self.f = TestFunction.radial(inst.m, inst.n, lo, hi)
        g, v = cfg.base_point if cfg.base_point is not None else (np.eye(inst.d), np.zeros(inst.d))
        self.g = np.asarray(g, dtype=float)
        self.gv = self.g @ np.asarray(v, dtype=float)
        self.logs = inst.weights.log_diagonal
        self.lo, self.hi = self.f.support_box()
        self.sup_f = 1.0

    def values(self, thetas, t):
        """``(F values, alpha values)`` for each theta."""
        scale = np.exp(t * self.logs)
        if self.inst.d == 2 and self.f.kind != "radial_of_lambda1":
            us = np.tile(np.eye(2), (len(thetas), 1, 1))
            us[:, 0, 1] = thetas.reshape(len(thetas))
            bases = scale[None, :, None] * (us @ self.g)
            return truncated_siegel_batch_2d(self.f, bases, (scale[None, :] * (us @ self.gv)), self.trunc)
        out = np.zeros(len(thetas))
        alphas = np.zeros(len(thetas))
        for k, th in enumerate(thetas):
            M = scale[:, None] * (u_matrix(th) @ self.g)
            a = gauss_alpha_2d(M) if self.inst.d == 2 else alpha_height(M, approximate=self.inst.d > 3)
            alphas[k] = a
            eta = float(cutoff_eta(a, self.trunc))
            if eta == 0.0:
                continue
            lat = AffineLattice(M, M @ np.linalg.solve(self.g, self.gv), check=False)
            pts = enumerate_points_in_box(lat, self.lo, self.hi)
            if len(pts):
                out[k] = eta * math.fsum(self.f(pts))
        return out, alphas


def _run_equidist(cfg, rows, verdicts, extras, annotations):
    inst = cfg.instance
    ev = _OrbitEvaluator(cfg)
    S = cfg.samples
    v = ev.gv if cfg.base_point is None else np.asarray(cfg.base_point[1], dtype=float)
    witness = liouville_witness(v, cfg.liouville_E, cfg.liouville_Qmax)
    if witness is not None:
        p, q = witness
        annotations.append(
            f"shift not certified non-Liouville: witness p={p.tolist()}, q={q} at E={cfg.liouville_E}"
        )
    thetas = sample_thetas(inst, S, cfg.master_seed, cfg.sampling)
    integral = ev.f.integral()
    rows.append(_row(0, "integral_f", integral, 0.0, S))
    times = sorted(set(float(t) for t in cfg.scales) | {float(t) for tup in cfg.multi_times for t in tup})
    cache = {}
    for t in times:
        cache[t] = _parallel_map(lambda block: ev.values(block, t), thetas, cfg.threads)
    for t in cfg.scales:
        vals, alphas = cache[float(t)]
        mean = math.fsum(vals) / S
        se = _sem(vals)
        allowance = math.fsum(ev.sup_f * alphas[alphas >= cfg.trunc.L / cfg.trunc.c]) / S
        rows += [
            _row(t, "mean_F", mean, se, S),
            _row(t, "abs_error", abs(mean - integral), se, S),
            _row(t, "relative_error", abs(mean - integral) / integral, se / integral, S),
            _row(t, "truncation_allowance", allowance, 0.0, S),
        ]
    for tup in cfg.multi_times:
        D = compute_D(tup)
        prod = np.ones(S)
        for t in tup:
            prod = prod * cache[float(t)][0]
        mean = math.fsum(prod) / S
        target = integral ** len(tup)
        rows.append(_row(D, "multi_abs_error", abs(mean - target), _sem(prod), S))
        extras.setdefault("multi_times", []).append({"times": [float(t) for t in tup], "D": D, "mean": mean})


def _run_alpha_tail(cfg, rows, verdicts, extras):
    inst = cfg.instance
    S = cfg.samples
    thetas = sample_thetas(inst, S, cfg.master_seed)
    logs = np.array(inst.weights.expansion + (-1.0,) * inst.n)
    for L in cfg.scales:
        s = cfg.s_fixed if cfg.s_fixed is not None else math.ceil(cfg.kappa_hat * math.log(L))
        scale = np.exp(s * logs)

        def block_alpha(block):
            out = np.empty(len(block))
            for k, th in enumerate(block):
                M = scale[:, None] * u_matrix(th)
                out[k] = gauss_alpha_2d(M) if inst.d == 2 else alpha_height(M, approximate=inst.d > 3)
            return (out,)

        (alphas,) = _parallel_map(block_alpha, thetas, cfg.threads)
        frac = float(np.mean(alphas >= L))
        rows += [
            _row(L, "exceedance_fraction", frac, math.sqrt(frac * (1 - frac) / S), S),
            _row(L, "flow_time", s, 0.0, S),
        ]


def _parallel_map(fn, items, threads):
    """Apply ``fn`` to contiguous blocks and concatenate each returned array in order."""
    blocks = np.array_split(np.arange(len(items)), max(1, min(threads, len(items))))
    if threads <= 1:
        parts = [fn(items[idx]) for idx in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda idx: fn(items[idx]), blocks))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))


def run_experiment(config: ExperimentConfig) -> RunRecord:
    cfg = config.validate()
    start = time.perf_counter()
    rows, verdicts, extras, annotations = [], {}, {}, []
    if cfg.instance.m < 2 and cfg.kind in ("clt", "cumulant_decay"):
        annotations.append("m < 2: outside the hypotheses of the central limit theorem")
    if cfg.kind in ("clt", "mean_growth", "variance", "cumulant_decay"):
        N_max = int(max(cfg.scales))
        if cfg.shells:
            N_max = max(N_max, int(max(cfg.shells)) + 1)
        if liouville_witness(cfg.instance.xi, cfg.liouville_E, cfg.liouville_Qmax) is not None:
            annotations.append("outside theorem hypotheses: xi has a Liouville witness")
        counts = shell_counts(cfg.instance, N_max, cfg.samples, cfg.master_seed, cfg.threads)
        runner = {
            "clt": _run_clt,
            "mean_growth": _run_mean_growth,
            "variance": _run_variance,
            "cumulant_decay": _run_cumulants,
        }[cfg.kind]
        runner(cfg, counts, rows, verdicts, extras)
    elif cfg.kind == "equidist":
        _run_equidist(cfg, rows, verdicts, extras, annotations)
    else:
        _run_alpha_tail(cfg, rows, verdicts, extras)
    record = RunRecord(dict(cfg.echo), rows, {}, extras, annotations)
    record.verdicts = recompute_verdicts(record)
    record.wall_clock = time.perf_counter() - start
    return record
