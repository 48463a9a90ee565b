"""First time a chain started at the red ground state shows a green cross, across n.

Used to read the scale of the antiferroelectric bottleneck: mean escape times
grow geometrically in n.  Writes one CSV row per n.

    python scripts/afe_escape_times.py --c 8 --ns 3 4 5 6 7 8 --out runs/afe_escape.csv
"""
import argparse
import csv
import io
import time
from pathlib import Path

import numpy as np

from sixvertex.cli import atomic_write
from sixvertex.glauber import ChainState, first_cross_time
from sixvertex.lattice import Weights, ground_state_red


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--a", type=float, default=1.0)
    ap.add_argument("--b", type=float, default=1.0)
    ap.add_argument("--c", type=float, default=8.0)
    ap.add_argument("--ns", type=int, nargs="+", default=[3, 4, 5, 6, 7, 8])
    ap.add_argument("--chains", type=int, default=10)
    ap.add_argument("--budget", type=float, default=1e8)
    ap.add_argument("--seed", type=int, default=1000)
    ap.add_argument("--out", type=Path, default=Path("runs/afe_escape.csv"))
    args = ap.parse_args()

    w = Weights(args.a, args.b, args.c)
    rows = []
    for n in args.ns:
        t0 = time.time()
        ts = []
        for k in range(args.chains):
            st = ChainState.start(ground_state_red(n), w, args.seed, stream=k)
            ts.append(first_cross_time(st, int(args.budget), "green")[0])
        hit = np.array([t for t in ts if t is not None], dtype=float)
        row = {
            "n": n, "chains": args.chains, "escaped": int(hit.size), "budget": int(args.budget),
            "mean_escape": float(hit.mean()) if hit.size else "",
            "median_escape": float(np.median(hit)) if hit.size else "",
            # exponential fit: chance that one chain of 1e7 steps escapes
            "p_escape_1e7": float(1 - np.exp(-1e7 / hit.mean())) if hit.size == args.chains else "",
            "seconds": round(time.time() - t0, 1),
        }
        rows.append(row)
        print(row, flush=True)
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=list(rows[0]))
    wr.writeheader()
    wr.writerows(rows)
    atomic_write(args.out, buf.getvalue())


if __name__ == "__main__":
    main()
