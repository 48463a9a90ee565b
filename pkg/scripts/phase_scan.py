"""Phase diagram over (a/c, b/c) with the antiferroelectric decay condition marked.

    python scripts/phase_scan.py --points 81 --out runs/phase_scan.csv
"""
import argparse
from pathlib import Path

from sixvertex.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--min", type=float, default=0.05)
    ap.add_argument("--max", type=float, default=4.0)
    ap.add_argument("--points", type=int, default=81)
    ap.add_argument("--out", type=Path, default=Path("runs/phase_scan.json"))
    args = ap.parse_args()
    # the table lands next to the artifact as phase_scan.csv
    return cli_main(["phase-scan", f"min={args.min}", f"max={args.max}", f"points={args.points}", "--out", str(args.out)])


if __name__ == "__main__":
    raise SystemExit(main())
