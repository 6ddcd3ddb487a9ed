"""Acceptance criteria.  Each test records one PASS/FAIL line, printed in the
terminal summary (see conftest.py), then asserts."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from dioclt import cli
from dioclt.config import parse_config
from dioclt.counting import headline_instance, mean_total, theta_infty, variance_sigma2
from dioclt.harness import clear_cache, ols, run_experiment, weakly_decreasing
from dioclt.heights import has_vector_in_cylinder, zeta_kim
from dioclt.lattice import alpha_height
from dioclt.selftest import (
    alpha_oracle,
    check_count_oracle,
    cylinder_oracle,
    random_conditioned_basis,
    zeta_definition,
)

ROOT = Path(__file__).resolve().parents[1]
ACC = ROOT / "configs" / "acceptance"
REPORT = []

pytestmark = pytest.mark.slow


def report(number, title, ok, detail):
    REPORT.append(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    assert ok, detail


def run(name):
    return run_experiment(parse_config(ACC / f"{name}.yaml", threads=1))


def test_criterion_01_oracle_equivalence():
    start = time.perf_counter()
    bad = check_count_oracle(trials=500, seed=2026, max_T=1000)
    elapsed = time.perf_counter() - start
    report(1, "shell counts equal brute force", not bad and elapsed < 60,
           f"{len(bad)} mismatches in 500 instances, {elapsed:.1f}s")


def test_criterion_02_variance_structure():
    inst = headline_instance()
    zeros = [theta_infty(inst, s) for s in range(1, 6)]
    t0, sigma2 = theta_infty(inst, 0), variance_sigma2(inst)
    ok = all(z == 0.0 for z in zeros) and abs(t0 - sigma2) <= 1e-6 and sigma2 == 8
    report(2, "variance structure", ok, f"theta_infty(1..5)={zeros}, theta_infty(0)={t0!r}, sigma^2={sigma2!r}")


def test_criterion_03_mean_growth():
    slope_rec = run("mean_growth_slope")
    scales, means, _ = slope_rec.series("mean_count")
    slope, _, _ = ols(scales, means)
    C = variance_sigma2(headline_instance())
    slope_ok = abs(slope - C) <= 0.10 * C
    ref_rec = run("mean_growth_reference")
    Ns, ms, ses = ref_rec.series("mean_count")
    inst = headline_instance()
    z = [(m - mean_total(inst, int(N))) / se for N, m, se in zip(Ns, ms, ses)]
    ref_ok = all(abs(x) <= 3 for x in z)
    report(3, "mean growth", slope_ok and ref_ok,
           f"slope {slope:.4f} vs {C}; z-scores vs exact means {[round(x, 2) for x in z]}")


def test_criterion_04_clt_trend():
    rec = run("clt_trend")
    _, ks, se = rec.series("ks_theorem")
    trend = weakly_decreasing(ks, se)
    final = ks[-1] <= 0.15
    report(4, "CLT trend", trend and final,
           f"KS {[round(k, 4) for k in ks]} (weakly decreasing: {trend}); final <= 0.15: {final}")


def test_criterion_05_cumulant_decay():
    rec = run("cumulant_decay")
    _, k3, se3 = rec.series("k3_birkhoff")
    _, k4, se4 = rec.series("k4_birkhoff")
    k3_ok = abs(k3[-1]) <= 3 * se3[-1]
    k4_ok = abs(k4[-1]) <= 3 * se4[-1]
    trend = weakly_decreasing([abs(x) for x in k3], se3)
    report(5, "cumulant decay", k3_ok and k4_ok and trend,
           f"k3 {k3[-1]:.3f} +- {se3[-1]:.3f}, k4 {k4[-1]:.3f} +- {se4[-1]:.3f}, "
           f"|k3| {[round(abs(x), 3) for x in k3]} weakly decreasing: {trend}")


def test_criterion_06_second_moment():
    rec = run("second_moment")
    pooled = rec.value("second_moment_pooled")
    se = [r["stderr"] for r in rec.rows if r["statistic"] == "second_moment_pooled"][0]
    ref = rec.value("second_moment_reference")
    report(6, "second moment", abs(pooled - ref) <= 0.10 * ref, f"{pooled:.3f} +- {se:.3f} vs {ref}")


def test_criterion_07_equidistribution():
    rec = run("equidist")
    _, err, se = rec.series("abs_error")
    integral = rec.value("integral_f")
    trend = weakly_decreasing(err, se)
    final = err[-1] <= 0.05 * integral
    multi = {r["scale"]: r["value"] for r in rec.rows if r["statistic"] == "multi_abs_error"}
    multi_ok = multi[2.0] <= multi[1.0]
    report(7, "equidistribution", trend and final and multi_ok,
           f"errors {[round(e, 4) for e in err]} (decreasing: {trend}, final {err[-1] / integral:.2%} of integral); "
           f"two-time error D=1 (2,3): {multi[1.0]:.4f}, D=2 (6,8): {multi[2.0]:.4f}")


def test_criterion_08_zeta_and_cylinder():
    rng = np.random.default_rng(2026)
    zeta_bad = 0
    for _ in range(100):
        v = rng.random(int(rng.integers(1, 3)))
        T = float(rng.uniform(1, 1e4))
        zeta_bad += zeta_kim(v, T) != zeta_definition(v, T)
    cyl_bad = 0
    for _ in range(200):
        D = int(rng.integers(2, 4))
        b = random_conditioned_basis(rng, D, 20.0)
        A, B = rng.uniform(0.2, 1.5), rng.uniform(0.0, 1.5)
        cyl_bad += (has_vector_in_cylinder(b, A, B) is not None) != cylinder_oracle(b, A, B)
    report(8, "zeta and cylinder diagnostics", zeta_bad == 0 and cyl_bad == 0,
           f"zeta mismatches {zeta_bad}/100, cylinder mismatches {cyl_bad}/200")


def spread_basis(rng, d, cond):
    """Determinant-one basis with prescribed condition number."""
    q1, _ = np.linalg.qr(rng.normal(size=(d, d)))
    q2, _ = np.linalg.qr(rng.normal(size=(d, d)))
    logs = np.linspace(0.5, -0.5, d) * math.log(cond)
    logs -= logs.mean()
    return q1 @ np.diag(np.exp(logs)) @ q2


def test_criterion_09_alpha_exact():
    rng = np.random.default_rng(2026)
    worst, conds = 0.0, []
    for k in range(100):
        d = 2 + k % 2
        if k % 4 < 2:
            b = random_conditioned_basis(rng, d, 1e3)
        else:
            b = spread_basis(rng, d, 10 ** rng.uniform(0, 3))
        conds.append(np.linalg.cond(b))
        a, o = alpha_height(b), alpha_oracle(b)
        worst = max(worst, abs(a - o) / o)
    report(9, "alpha exactness", worst <= 1e-9 and max(conds) <= 1e3 * (1 + 1e-9),
           f"max relative error {worst:.2e}, max condition number {max(conds):.1f}")


def test_criterion_10_alpha_tail():
    rec = run("alpha_tail")
    Ls, frac, _ = rec.series("exceedance_fraction")
    pts = [(math.log(L), math.log(f)) for L, f in zip(Ls, frac) if f > 0]
    slope = ols(*zip(*pts))[0] if len(pts) >= 2 else float("nan")
    report(10, "alpha tail", len(pts) >= 2 and slope <= -1.0,
           f"fractions {frac}, log-log slope {slope:.3f}")


def test_criterion_11_reproducibility(tmp_path):
    examples = sorted((ROOT / "configs" / "examples").glob("*.yaml"))
    bad = []
    for path in examples:
        golden = (ROOT / "configs" / "golden" / f"{path.stem}.csv").read_bytes()
        kind = path.read_text().split("kind:")[1].split()[0]
        for threads in (1, 4, 8):
            clear_cache()
            out = tmp_path / f"{path.stem}_{threads}"
            code = cli.main([cli.SUBCOMMAND_FOR_KIND[kind], "--config", str(path), "--out", str(out),
                             "--threads", str(threads)])
            if code != 0 or (out / f"{kind}.csv").read_bytes() != golden:
                bad.append(f"{path.stem}@{threads}")
    report(11, "golden reproducibility", not bad,
           f"{len(examples)} examples x 3 thread counts, mismatches: {bad or 'none'}")
