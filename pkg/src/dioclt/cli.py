"""Command-line front end.

Exit codes: 0 success, 1 selftest failure, 2 configuration error, 3 budget
exceeded, 4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .config import (
    NESTED_KEYS,
    apply_overrides,
    load_document,
    parse_config,
    parse_instance,
    resolve_threads,
)
from .counting import count_shells_batch, mean_shell, mean_total
from .errors import BudgetExceeded, ConfigError
from .harness import RunRecord, _row, run_experiment
from .heights import ShiWeightData, alpha_epsilon, liouville_witness, zeta_kim
from .io import write_results
from .lattice import Weights
from .rng import seed_stream
from .selftest import run_selftest

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_BUDGET, EXIT_IO = 0, 1, 2, 3, 4
EXPERIMENTS = {
    "clt": "clt",
    "mean-growth": "mean_growth",
    "variance": "variance",
    "cumulants": "cumulant_decay",
    "equidist": "equidist",
    "alpha-tail": "alpha_tail",
}
SUBCOMMAND_FOR_KIND = {**{v: k for k, v in EXPERIMENTS.items()}, "count": "count", "diagnose": "diagnose"}


def build_parser():
    parser = argparse.ArgumentParser(prog="dioclt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("count", *EXPERIMENTS, "diagnose", "selftest"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML or JSON configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--out", help="output directory (overrides output_path)")
        p.add_argument("--threads", type=int, help="worker threads (overrides DIOCLT_THREADS and the config)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        if name == "selftest":
            p.add_argument("--full", action="store_true", help="run the full-size oracle suites")
    return parser


def _document(args):
    doc = load_document(args.config) if args.config else {}
    return apply_overrides(doc, args.set)


def _print_rows(record: RunRecord):
    print(f"{'scale':>12}  {'statistic':<28}{'value':>22}{'stderr':>22}{'samples':>10}")
    for r in record.rows:
        print(f"{r['scale']:>12.6g}  {r['statistic']:<28}{r['value']:>22.12g}{r['stderr']:>22.6g}{r['samples']:>10d}")
    for k, v in record.verdicts.items():
        print(f"verdict {k}: {'PASS' if v else 'FAIL'}")
    for note in record.annotations:
        print(f"note: {note}")


def _finish(record, out_dir, stem):
    _print_rows(record)
    json_path, csv_path = write_results(record, Path(out_dir) / stem)
    print(f"wrote {json_path} and {csv_path}")


def cmd_experiment(args):
    doc = _document(args)
    kind = EXPERIMENTS[args.command]
    if doc.setdefault("kind", kind) != kind:
        raise ConfigError(f"subcommand {args.command!r} runs kind {kind!r}, config says {doc['kind']!r}", "kind")
    cfg = parse_config(doc, threads=args.threads, seed=args.seed)
    record = run_experiment(cfg)
    out = args.out or cfg.echo["output_path"]
    _finish(record, out, kind)
    return EXIT_OK


COUNT_KEYS = {"kind", "m", "n", "vartheta", "weights", "xi", "boundary", "theta", "N_list", "master_seed",
              "output_path", "threads"}


def cmd_count(args):
    """Per-shell and cumulative counts for one theta."""
    doc = _document(args)
    doc.setdefault("kind", "count")
    for k in doc:
        if k not in COUNT_KEYS:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(COUNT_KEYS))})", k)
    inst = parse_instance(doc)
    N_list = doc.get("N_list")
    if not isinstance(N_list, list) or not N_list or any(not isinstance(N, int) or N < 1 for N in N_list):
        raise ConfigError("must be a nonempty list of positive integers", "N_list")
    seed = args.seed if args.seed is not None else doc.get("master_seed", 0)
    if "theta" in doc:
        theta = np.array(doc["theta"], dtype=float).reshape(inst.m, inst.n)
    else:
        theta = seed_stream(seed, 0, 1).random(inst.m * inst.n).reshape(inst.m, inst.n)
    threads = resolve_threads(doc.get("threads", "auto"), args.threads)
    N_max = max(N_list)
    shells = count_shells_batch(inst, theta[None], N_max, threads=threads)[0]
    rows = [_row(s, "shell_count", shells[s], 0.0, 1) for s in range(N_max)]
    rows += [_row(s, "shell_mean_reference", mean_shell(inst, s), 0.0, 1) for s in range(N_max)]
    for N in N_list:
        rows.append(_row(N, "count", shells[:N].sum(), 0.0, 1))
        rows.append(_row(N, "mean_reference", mean_total(inst, N), 0.0, 1))
    echo = {"kind": "count", "m": inst.m, "n": inst.n, "vartheta": list(inst.vartheta),
            "weights": list(inst.weights.w), "xi": list(inst.xi), "boundary": inst.boundary,
            "theta": theta.tolist(), "N_list": N_list, "master_seed": seed}
    record = RunRecord(echo, rows, {})
    _finish(record, args.out or doc.get("output_path", "results"), "count")
    return EXIT_OK


DIAGNOSE_KEYS = {"kind", "v", "T_list", "liouville", "m", "n", "weights", "eps", "radius", "basis",
                 "output_path", "threads", "master_seed"}


def cmd_diagnose(args):
    """Kim's scale, a Liouville-witness scan and Shi's alpha_eps for one configuration."""
    doc = _document(args)
    doc.setdefault("kind", "diagnose")
    for k in doc:
        if k not in DIAGNOSE_KEYS:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(DIAGNOSE_KEYS))})", k)
    v = doc.get("v", [math.sqrt(2) - 1, math.sqrt(3) - 1])
    T_list = doc.get("T_list", [10, 100, 1000, 10000])
    if any(not isinstance(T, (int, float)) or T < 1 for T in T_list):
        raise ConfigError("T values must be >= 1", "T_list")
    liou = doc.get("liouville", {})
    unknown = set(liou) - NESTED_KEYS["liouville"]
    if unknown:
        raise ConfigError("unknown key", f"liouville.{sorted(unknown)[0]}")
    E, Qmax = float(liou.get("E", 3.0)), int(liou.get("Qmax", 10_000))
    m, n = int(doc.get("m", 1)), int(doc.get("n", 1))
    weights = Weights.clt(doc.get("weights", [n / m] * m)[:m], n)
    eps = float(doc.get("eps", 0.1))
    if not 0 < eps < 1:
        raise ConfigError(f"must lie in (0, 1), got {eps!r}", "eps")
    basis = np.array(doc.get("basis", np.eye(m + n + 1).tolist()), dtype=float)
    radius = float(doc.get("radius", 2.0))

    rows = []
    for T in T_list:
        rows.append(_row(T, "zeta", zeta_kim(v, float(T)), 0.0, 1))
    witness = liouville_witness(v, E, Qmax)
    rows.append(_row(E, "liouville_witness_q", witness[1] if witness else 0, 0.0, 1))
    ae = alpha_epsilon(basis, ShiWeightData.build(weights, eps), radius)
    rows.append(_row(eps, "alpha_eps", ae.value, 0.0, 1))
    rows.append(_row(eps, "alpha_eps_certified", float(ae.certified), 0.0, 1))
    echo = {"kind": "diagnose", "v": list(map(float, v)), "T_list": T_list, "liouville": {"E": E, "Qmax": Qmax},
            "m": m, "n": n, "weights": list(weights.w), "eps": eps, "radius": radius, "basis": basis.tolist()}
    record = RunRecord(echo, rows, {})
    if witness:
        record.annotations.append(f"Liouville witness p={witness[0].tolist()}, q={witness[1]}")
    else:
        record.annotations.append(f"no Liouville witness with q <= {Qmax} at E={E} (not a proof)")
    _finish(record, args.out or doc.get("output_path", "results"), "diagnose")
    return EXIT_OK


def cmd_selftest(args):
    results = run_selftest(quick=not args.full)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_SELFTEST


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"count": cmd_count, "diagnose": cmd_diagnose, "selftest": cmd_selftest}.get(args.command, cmd_experiment)
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
