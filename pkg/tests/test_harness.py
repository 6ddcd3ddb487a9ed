import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dioclt.config import parse_config
from dioclt.errors import ConfigError
from dioclt.harness import (
    clear_cache,
    compute_D,
    ols,
    recompute_verdicts,
    run_experiment,
    sample_thetas,
    weakly_decreasing,
)
from dioclt.counting import headline_instance
from dioclt.rng import seed_stream

HEAD = {
    "m": 2,
    "n": 1,
    "weights": [0.5, 0.5],
    "xi": [0.41421356237309515, 0.7320508075688772],
}


def run(doc, threads=1):
    clear_cache()
    return run_experiment(parse_config(doc, threads=threads))


def test_compute_D_examples():
    assert compute_D([3]) == 3
    assert compute_D([3, 5, 9]) == 2
    with pytest.raises(ValueError):
        compute_D([2, 2])
    with pytest.raises(ValueError):
        compute_D([])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.1, 50), min_size=1, max_size=5, unique=True))
def test_compute_D_brute_force(ts):
    cands = list(ts) + [abs(a - b) for a, b in itertools.permutations(ts, 2)]
    assert compute_D(ts) == min(cands)


def test_weakly_decreasing_rule():
    assert weakly_decreasing([3, 2, 1], [0, 0, 0])
    assert weakly_decreasing([3, 3.1, 1], [0.1, 0.1, 0.1])
    assert not weakly_decreasing([3, 3.5, 1], [0.1, 0.1, 0.1])
    assert not weakly_decreasing([3, 3.05, 1, 1.05], [0.1] * 4)


def test_ols_exact_line():
    slope, intercept, res = ols([1, 2, 3, 4], [5, 7, 9, 11])
    assert slope == pytest.approx(2) and intercept == pytest.approx(3)
    assert max(abs(r) for r in res) < 1e-12


def test_zero_samples_rejected():
    with pytest.raises(ConfigError):
        parse_config({**HEAD, "kind": "clt", "N_list": [3], "samples": 0})


def test_theta_sampling_uses_per_sample_streams():
    th = sample_thetas(headline_instance(), 5, 42)
    for k in range(5):
        assert np.array_equal(th[k].reshape(-1), seed_stream(42, k, 1).random(2))


@pytest.mark.parametrize("kind", ["clt", "variance", "cumulant_decay", "mean_growth"])
def test_counting_kinds_thread_invariant(kind):
    doc = {**HEAD, "kind": kind, "N_list": [2, 4], "samples": 300, "master_seed": 3}
    a, b = run(doc, 1), run(doc, 4)
    assert a.rows == b.rows
    assert a.verdicts == b.verdicts


def test_equidist_thread_invariant():
    doc = {"kind": "equidist", "m": 1, "n": 1, "xi": [0.3], "t_list": [1, 2], "samples": 500,
           "multi_times": [[1, 2]], "master_seed": 5}
    assert run(doc, 1).rows == run(doc, 3).rows


def test_counting_kinds_share_means():
    base = {**HEAD, "N_list": [3, 5], "samples": 400, "master_seed": 11}
    clt = run({**base, "kind": "clt"})
    growth = run({**base, "kind": "mean_growth"})
    var = run({**base, "kind": "variance"})
    for N in (3.0, 5.0):
        assert clt.value("mean_count", N) == growth.value("mean_count", N)
    # variance of the Birkhoff form computed independently from the same samples
    assert var.value("k2_birkhoff", 5.0) > 0


def test_variance_shell_rows():
    doc = {**HEAD, "kind": "variance", "N_list": [3], "shells": [1, 2], "samples": 300}
    rec = run(doc)
    assert rec.value("second_moment_reference") == pytest.approx(72.0)
    assert "second_moment_within_tolerance" in rec.verdicts


def test_alpha_fractions_nonincreasing():
    doc = {"kind": "alpha_tail", "m": 1, "n": 1, "xi": [0.0], "L_list": [2, 4, 8], "samples": 2000}
    rec = run(doc)
    _, frac, _ = rec.series("exceedance_fraction")
    assert all(b <= a for a, b in zip(frac, frac[1:]))
    assert rec.verdicts["fractions_nonincreasing"]


def test_verdicts_recomputable():
    for doc in (
        {**HEAD, "kind": "clt", "N_list": [2, 4], "samples": 200},
        {**HEAD, "kind": "cumulant_decay", "N_list": [2, 4], "samples": 200},
        {"kind": "alpha_tail", "m": 1, "n": 1, "xi": [0.0], "L_list": [2, 4], "samples": 500},
    ):
        rec = run(doc)
        assert recompute_verdicts(rec) == rec.verdicts


def test_m1_annotation():
    doc = {"kind": "clt", "m": 1, "n": 1, "xi": [0.3], "N_list": [2], "samples": 50}
    assert any("m < 2" in a for a in run(doc).annotations)


def test_liouville_annotation():
    doc = {**HEAD, "xi": [0.5, 0.5], "kind": "clt", "N_list": [2], "samples": 50}
    assert any("Liouville" in a for a in run(doc).annotations)


def test_ks_rows_in_unit_interval():
    rec = run({**HEAD, "kind": "clt", "N_list": [2, 4], "samples": 300})
    for stat in ("ks_theorem", "ks_birkhoff"):
        _, vals, _ = rec.series(stat)
        assert all(0 <= v <= 1 for v in vals)
    assert rec.extras["variance_reference"] == 8.0
    hist = rec.extras["histograms_theorem_form"]["4"]
    assert len(hist["edges"]) == len(hist["counts"]) + 1
