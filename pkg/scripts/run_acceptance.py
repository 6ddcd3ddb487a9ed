"""Run every acceptance config and write its results under results/acceptance.

Usage: python3 scripts/run_acceptance.py [--threads K] [--out DIR]

The pass/fail judgement for each criterion lives in tests/test_acceptance.py;
this script produces the JSON/CSV records for inspection.
"""

import argparse
from pathlib import Path

import yaml

from dioclt.cli import SUBCOMMAND_FOR_KIND, main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--out", default=str(ROOT / "results" / "acceptance"))
    args = ap.parse_args()
    status = 0
    for path in sorted((ROOT / "configs" / "acceptance").glob("*.yaml")):
        kind = yaml.safe_load(path.read_text())["kind"]
        argv = [SUBCOMMAND_FOR_KIND[kind], "--config", str(path), "--out", str(Path(args.out) / path.stem)]
        if args.threads:
            argv += ["--threads", str(args.threads)]
        print(f"== {path.stem}")
        status = max(status, main(argv))
    raise SystemExit(status)
