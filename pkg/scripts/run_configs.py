"""Solve every config in configs/ and print one summary line per run.

    python3 scripts/run_configs.py [--out out] [--oracle]
"""

import argparse
import sys
from pathlib import Path

from sdot.cli import main as sdot

ROOT = Path(__file__).resolve().parents[1]


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=ROOT / "out")
    ap.add_argument("--oracle", action="store_true", help="also run the exact comparison on the coarse grid")
    args = ap.parse_args()
    codes = {}
    for cfg in sorted((ROOT / "configs").glob("*.toml")):
        out = args.out / cfg.stem
        argv = ["solve", str(cfg), "--out", str(out), "--strict"]
        codes[cfg.stem] = sdot(argv)
        if args.oracle:
            codes[cfg.stem + " (oracle)"] = sdot(["oracle", str(cfg), "--out", str(out)])
    print()
    for name, code in codes.items():
        print(f"{name:32s} exit {code}")
    return max(codes.values(), default=0)


if __name__ == "__main__":
    sys.exit(run())
