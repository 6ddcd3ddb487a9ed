"""Configuration documents (YAML or JSON) and their validation.

Schema (all keys optional unless marked required):

``kind`` (required)
    clt | mean_growth | variance | cumulant_decay | equidist | alpha_tail.
``m``, ``n`` (required)
    Positive integers.
``vartheta``
    m positive reals.  Default all ones.
``weights``
    m expansion weights summing to n, or m + n weights whose last n
    entries are 1.  Default ``n/m`` each.
``xi`` (required)
    m reals.
``boundary``
    strict | closed.  Default strict.
``N_list`` / ``t_list`` / ``L_list`` (required, the one matching ``kind``)
    Strictly increasing scales.  N_list is used by the counting kinds,
    t_list by equidist and L_list by alpha_tail.
``samples`` (required)
    Positive integer.
``master_seed``
    Unsigned 64-bit integer.  Default 0.
``trunc``
    ``{L, c}`` with L >= 1 and c > 1.  Default ``{L: 50, c: 2}`` for equidist.
``test_function``
    ``{kind, eps, radii}``.  Default ``{kind: smoothed_box_f_eps, eps: 0.05}``.
``base_point``
    ``{g, v}``: a d x d matrix of determinant +-1 and a d-vector.  Default
    ``g = I`` and ``v = (xi, 0)``.
``multi_times``
    List of time tuples for the multi-time equidistribution variant.
``shells``
    Shell indices for the second-moment rows of a variance run.
``kappa_hat``, ``s_fixed``
    Flow time rule for alpha_tail: ``s = ceil(kappa_hat log L)`` unless
    ``s_fixed`` is given.  Default kappa_hat 2.
``liouville``
    ``{E, Qmax}`` for the Liouville-witness scan.  Default ``{E: 3, Qmax: 10000}``.
``sampling``
    uniform | qmc (qmc applies to equidist).  Default uniform.
``ks_threshold``, ``slope_tolerance``, ``equidist_tolerance``,
``tail_slope_max``, ``second_moment_tolerance``
    Verdict thresholds.  Defaults 0.15, 0.10, 0.05, -1.0, 0.10.
``output_path``
    Directory for results.  Default ``results``.
``threads``
    Positive integer or ``auto``.  ``auto`` reads ``DIOCLT_THREADS`` and
    falls back to the CPU count.
"""

from __future__ import annotations

import copy
import json
import math
import os
from pathlib import Path

import numpy as np
import yaml

from .counting import DioInstance
from .errors import ConfigError
from .harness import KINDS, ExperimentConfig
from .lattice import Weights
from .siegel import KINDS as TEST_FUNCTION_KINDS
from .siegel import TruncationSpec

THREADS_ENV = "DIOCLT_THREADS"
SCALE_KEYS = {"equidist": "t_list", "alpha_tail": "L_list"}
TOP_KEYS = {
    "kind", "m", "n", "vartheta", "weights", "xi", "boundary", "N_list", "t_list", "L_list",
    "samples", "master_seed", "trunc", "test_function", "base_point", "multi_times", "shells",
    "kappa_hat", "s_fixed", "liouville", "sampling", "ks_threshold", "slope_tolerance",
    "equidist_tolerance", "tail_slope_max", "second_moment_tolerance", "output_path", "threads",
}
NESTED_KEYS = {
    "trunc": {"L", "c"},
    "test_function": {"kind", "eps", "radii"},
    "base_point": {"g", "v"},
    "liouville": {"E", "Qmax"},
}
THRESHOLDS = {
    "ks_threshold": 0.15,
    "slope_tolerance": 0.10,
    "equidist_tolerance": 0.05,
    "tail_slope_max": -1.0,
    "second_moment_tolerance": 0.10,
}


def load_document(source) -> dict:
    """Parse a path or inline YAML/JSON text into a mapping."""
    if isinstance(source, dict):
        return copy.deepcopy(source)
    text = None
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and not source.lstrip().startswith("{")):
        path = Path(source)
        if path.exists():
            text = path.read_text(encoding="utf-8")
        elif isinstance(source, Path) or path.suffix in (".yaml", ".yml", ".json"):
            raise FileNotFoundError(f"config file not found: {path}")
    if text is None:
        text = str(source)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML/JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping")
    return doc


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``key=value`` strings; dotted keys reach into nested mappings."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        parts = key.strip().split(".")
        target = doc
        for p in parts[:-1]:
            target = target.setdefault(p, {})
            if not isinstance(target, dict):
                raise ConfigError("cannot override inside a non-mapping", key)
        target[parts[-1]] = value
    return doc


def resolve_threads(value, flag=None) -> int:
    if flag is not None:
        return _positive_int(flag, "threads")
    if value in (None, "auto"):
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                return _positive_int(int(env), THREADS_ENV)
            except ValueError as exc:
                raise ConfigError(f"must be a positive integer, got {env!r}", THREADS_ENV) from exc
        return os.cpu_count() or 1
    return _positive_int(value, "threads")


# ---------------------------------------------------------------------------
# typed field readers


def _is_int(x):
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def _positive_int(x, key):
    if not _is_int(x) or x < 1:
        raise ConfigError(f"must be a positive integer, got {x!r}", key)
    return int(x)


def _real(x, key):
    if isinstance(x, bool) or not isinstance(x, (int, float, np.integer, np.floating)):
        raise ConfigError(f"must be a number, got {x!r}", key)
    x = float(x)
    if not math.isfinite(x):
        raise ConfigError(f"must be finite, got {x!r}", key)
    return x


def _real_list(x, key, length=None):
    if not isinstance(x, (list, tuple)):
        raise ConfigError(f"must be a list, got {x!r}", key)
    if length is not None and len(x) != length:
        raise ConfigError(f"must have {length} entries, got {len(x)}", key)
    return [_real(v, f"{key}[{i}]") for i, v in enumerate(x)]


def _check_keys(doc, allowed, prefix=""):
    for k in doc:
        if k not in allowed:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(allowed))})", f"{prefix}{k}")


def _mapping(doc, key):
    value = doc.get(key)
    if value is None:
        return None
    if not isinstance(value, dict):
        raise ConfigError(f"must be a mapping, got {value!r}", key)
    _check_keys(value, NESTED_KEYS[key], prefix=f"{key}.")
    return value


def parse_instance(doc: dict) -> DioInstance:
    """Validate the problem keys shared by every kind."""
    for k in ("m", "n", "xi"):
        if k not in doc:
            raise ConfigError("required key missing", k)
    m = _positive_int(doc["m"], "m")
    n = _positive_int(doc["n"], "n")
    vartheta = _real_list(doc.get("vartheta", [1.0] * m), "vartheta", m)
    for i, v in enumerate(vartheta):
        if not v > 0:
            raise ConfigError(f"must be positive, got {v!r}", f"vartheta[{i}]")
    raw_w = doc.get("weights", [n / m] * m)
    if not isinstance(raw_w, (list, tuple)) or len(raw_w) not in (m, m + n):
        raise ConfigError(f"must list m={m} or m+n={m + n} weights", "weights")
    w = _real_list(raw_w, "weights")
    for i, v in enumerate(w):
        if not v > 0:
            raise ConfigError(f"must be positive, got {v!r}", f"weights[{i}]")
    for j in range(m, len(w)):
        if w[j] != 1.0:
            raise ConfigError(f"contraction weights must equal 1, got {w[j]!r}", f"weights[{j}]")
    total = math.fsum(w[:m])
    if abs(total - n) > 1e-12:
        raise ConfigError(f"expansion weights must sum to n={n}; computed sum is {total!r}", "weights")
    xi = _real_list(doc["xi"], "xi", m)
    boundary = doc.get("boundary", "strict")
    if boundary not in ("strict", "closed"):
        raise ConfigError(f"must be 'strict' or 'closed', got {boundary!r}", "boundary")
    return DioInstance(m, n, tuple(vartheta), Weights.clt(w[:m], n), tuple(xi), boundary)


def parse_config(source, overrides=(), threads=None, seed=None) -> ExperimentConfig:
    """Validated ExperimentConfig; ``config.echo`` lists every field, defaults included.

    ``threads`` and ``seed`` are command-line values that take precedence
    over the document.
    """
    doc = apply_overrides(load_document(source), overrides)
    _check_keys(doc, TOP_KEYS)
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"must be one of {', '.join(KINDS)}, got {kind!r}", "kind")
    inst = parse_instance(doc)
    d = inst.d

    scale_key = SCALE_KEYS.get(kind, "N_list")
    for other in ("N_list", "t_list", "L_list"):
        if other != scale_key and other in doc:
            raise ConfigError(f"not used by kind {kind!r} (expected {scale_key})", other)
    if scale_key not in doc:
        raise ConfigError("required key missing", scale_key)
    raw_scales = doc[scale_key]
    if not isinstance(raw_scales, (list, tuple)) or not raw_scales:
        raise ConfigError("must be a nonempty list", scale_key)
    if scale_key == "N_list":
        scales = tuple(_positive_int(x, f"N_list[{i}]") for i, x in enumerate(raw_scales))
    else:
        scales = tuple(_real_list(raw_scales, scale_key))
    for i in range(1, len(scales)):
        if scales[i] <= scales[i - 1]:
            raise ConfigError(f"must be strictly increasing, got {scales[i]!r} after {scales[i - 1]!r}", f"{scale_key}[{i}]")

    if "samples" not in doc:
        raise ConfigError("required key missing", "samples")
    samples = doc["samples"]
    if not _is_int(samples) or samples < 1:
        raise ConfigError(f"must be an integer >= 1, got {samples!r}", "samples")

    master_seed = seed if seed is not None else doc.get("master_seed", 0)
    if not _is_int(master_seed) or not 0 <= master_seed < 2**64:
        raise ConfigError(f"must be an unsigned 64-bit integer, got {master_seed!r}", "master_seed")

    trunc_doc = _mapping(doc, "trunc")
    trunc = None
    if trunc_doc is not None or kind == "equidist":
        trunc_doc = trunc_doc or {}
        L = _real(trunc_doc.get("L", 50.0), "trunc.L")
        c = _real(trunc_doc.get("c", 2.0), "trunc.c")
        if not L >= 1:
            raise ConfigError(f"must be >= 1, got {L!r}", "trunc.L")
        if not c > 1:
            raise ConfigError(f"must be > 1, got {c!r}", "trunc.c")
        trunc = TruncationSpec(L, c)

    tf_doc = _mapping(doc, "test_function")
    test_function = None
    if tf_doc is not None or kind == "equidist":
        tf_doc = tf_doc or {}
        tf_kind = tf_doc.get("kind", "smoothed_box_f_eps")
        if tf_kind not in TEST_FUNCTION_KINDS:
            raise ConfigError(f"must be one of {', '.join(TEST_FUNCTION_KINDS)}, got {tf_kind!r}", "test_function.kind")
        test_function = {"kind": tf_kind}
        if tf_kind == "smoothed_box_f_eps":
            eps = _real(tf_doc.get("eps", 0.05), "test_function.eps")
            if not 0 < eps < 1:
                raise ConfigError(f"must lie in (0, 1), got {eps!r}", "test_function.eps")
            test_function["eps"] = eps
        if tf_kind == "radial_of_lambda1":
            radii = _real_list(tf_doc.get("radii", [0.5, 1.0]), "test_function.radii", 2)
            if not 0 <= radii[0] < radii[1]:
                raise ConfigError(f"need 0 <= r_lo < r_hi, got {radii}", "test_function.radii")
            test_function["radii"] = radii

    bp_doc = _mapping(doc, "base_point")
    base_point = None
    if bp_doc is not None or kind == "equidist":
        bp_doc = bp_doc or {}
        g = bp_doc.get("g", np.eye(d).tolist())
        if not isinstance(g, (list, tuple)) or len(g) != d:
            raise ConfigError(f"must be a {d} x {d} matrix", "base_point.g")
        g = np.array([_real_list(row, f"base_point.g[{i}]", d) for i, row in enumerate(g)])
        det = float(np.linalg.det(g))
        if abs(abs(det) - 1.0) > 1e-9:
            raise ConfigError(f"determinant must be +-1, got {det!r}", "base_point.g")
        v = np.array(_real_list(bp_doc.get("v", list(inst.xi) + [0.0] * inst.n), "base_point.v", d))
        base_point = (g, v)

    multi = doc.get("multi_times", [])
    if not isinstance(multi, (list, tuple)):
        raise ConfigError("must be a list of time lists", "multi_times")
    multi_times = []
    for i, tup in enumerate(multi):
        ts = _real_list(tup, f"multi_times[{i}]")
        if len(ts) < 1 or any(t <= 0 for t in ts) or len(set(ts)) != len(ts):
            raise ConfigError(f"times must be positive and pairwise distinct, got {ts}", f"multi_times[{i}]")
        multi_times.append(tuple(ts))

    shells = doc.get("shells", [])
    if not isinstance(shells, (list, tuple)):
        raise ConfigError("must be a list", "shells")
    shells = tuple(int(s) for s in shells)
    for i, s in enumerate(doc.get("shells", [])):
        if not _is_int(s) or s < 0:
            raise ConfigError(f"must be a nonnegative integer, got {s!r}", f"shells[{i}]")

    kappa_hat = _real(doc.get("kappa_hat", 2.0), "kappa_hat")
    if not kappa_hat > 0:
        raise ConfigError(f"must be positive, got {kappa_hat!r}", "kappa_hat")
    s_fixed = doc.get("s_fixed")
    if s_fixed is not None and (not _is_int(s_fixed) or s_fixed < 0):
        raise ConfigError(f"must be a nonnegative integer, got {s_fixed!r}", "s_fixed")

    liou = _mapping(doc, "liouville") or {}
    E = _real(liou.get("E", 3.0), "liouville.E")
    Qmax = _positive_int(liou.get("Qmax", 10_000), "liouville.Qmax")

    sampling = doc.get("sampling", "uniform")
    if sampling not in ("uniform", "qmc"):
        raise ConfigError(f"must be 'uniform' or 'qmc', got {sampling!r}", "sampling")

    thresholds = {k: _real(doc.get(k, v), k) for k, v in THRESHOLDS.items()}
    threads_raw = doc.get("threads", "auto")
    n_threads = resolve_threads(threads_raw, threads)
    output_path = doc.get("output_path", "results")
    if not isinstance(output_path, str) or not output_path:
        raise ConfigError(f"must be a nonempty string, got {output_path!r}", "output_path")

    cfg = ExperimentConfig(
        kind=kind,
        instance=inst,
        scales=scales,
        samples=int(samples),
        master_seed=int(master_seed),
        trunc=trunc,
        test_function=test_function,
        base_point=base_point,
        multi_times=tuple(multi_times),
        shells=shells,
        kappa_hat=kappa_hat,
        s_fixed=None if s_fixed is None else int(s_fixed),
        liouville_E=E,
        liouville_Qmax=Qmax,
        sampling=sampling,
        threads=n_threads,
        **thresholds,
    )
    cfg.validate()
    cfg.echo["threads"] = threads_raw if threads is None else n_threads
    cfg.echo["output_path"] = output_path
    return cfg


def dump_echo(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.echo, indent=2, sort_keys=True)
