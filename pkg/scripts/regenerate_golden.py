"""Rerun every example config and store its CSV as the golden copy.

Usage: python3 scripts/regenerate_golden.py [--threads K]
"""

import argparse
import shutil
import tempfile
from pathlib import Path

import yaml

from dioclt.cli import SUBCOMMAND_FOR_KIND, main

ROOT = Path(__file__).resolve().parents[1]


def run_example(path: Path, out_dir: Path, threads: int) -> Path:
    kind = yaml.safe_load(path.read_text())["kind"]
    code = main([SUBCOMMAND_FOR_KIND[kind], "--config", str(path), "--out", str(out_dir), "--threads", str(threads)])
    if code != 0:
        raise SystemExit(f"{path.name}: exit code {code}")
    return out_dir / f"{kind}.csv"


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    golden = ROOT / "configs" / "golden"
    golden.mkdir(parents=True, exist_ok=True)
    for cfg in sorted((ROOT / "configs" / "examples").glob("*.yaml")):
        with tempfile.TemporaryDirectory() as tmp:
            csv_path = run_example(cfg, Path(tmp), args.threads)
            shutil.copyfile(csv_path, golden / f"{cfg.stem}.csv")
            print(f"golden {cfg.stem}.csv")
