"""Iteration counts against the certified bound as epsilon shrinks.

Four quadratic targets on the unit square; the grid is refined with epsilon so
that h <= delta.  Writes a CSV (default out/epsilon_sweep.csv).
"""

import argparse
import csv
import math
import time
from pathlib import Path

import numpy as np

from sdot.cost import QuadraticCost
from sdot.geometry import Rectangle, build_grid, normalize_measure
from sdot.partition import Problem, make_targets
from sdot.scheme import SchemeConfig, compute_delta, run_scheme

POINTS = [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]]
MASSES = [0.1, 0.2, 0.3, 0.4]


def sweep(epsilons, max_n):
    rows = []
    for eps in epsilons:
        delta = compute_delta(eps, len(MASSES), MASSES[0])
        n = math.ceil(1.0 / delta)
        if n > max_n:
            print(f"eps={eps:g}: needs n={n} > {max_n}, skipped")
            continue
        grid = build_grid(Rectangle((0, 0), (1, 1)), n)
        problem = Problem(QuadraticCost(), normalize_measure(grid, "1"), make_targets(POINTS, MASSES))
        t0 = time.perf_counter()
        r = run_scheme(problem, SchemeConfig(eps, resolution_factor=1.0))
        rows.append({
            "epsilon": eps, "n": n, "delta": delta,
            "outer_iterations": r.trace.outer_iterations,
            "updates": len(r.trace.steps),
            "mass_evaluations": r.trace.mass_evaluations,
            "n_eps_bound": r.bounds.n_eps_bound,
            "max_error": float(np.max(np.abs(r.masses - MASSES))),
            "seconds": round(time.perf_counter() - t0, 3),
        })
        print(", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in rows[-1].items()))
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epsilons", type=float, nargs="+", default=[0.08, 0.04, 0.02, 0.01, 0.005])
    ap.add_argument("--max-n", type=int, default=1000)
    ap.add_argument("--out", type=Path, default=Path("out/epsilon_sweep.csv"))
    args = ap.parse_args()
    rows = sweep(args.epsilons, args.max_n)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {args.out}")
