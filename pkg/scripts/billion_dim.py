"""Gap and per-evaluation time of REMBO (d=2, k=4) as the ambient dimension grows.

    python scripts/billion_dim.py --reps 10 --jobs 4
"""

import argparse

import numpy as np

from rembo.bench import BRANIN_EMBEDDED, ObjectiveSpec
from rembo.driver import RunConfig
from rembo.experiment import run_replications


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--budget", type=int, default=500)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    run = RunConfig(d=2, k=4, budget=args.budget)
    print("D,mean_gap,median_gap,sec_per_eval")
    for D in (25, 10 ** 4, 10 ** 6, 10 ** 9):
        res = run_replications(ObjectiveSpec(BRANIN_EMBEDDED, D=D), run, args.seed, args.reps, args.jobs)
        reps = [r.report for r in res if r.report is not None]
        gaps = np.array([r.final_gap for r in reps])
        per_eval = np.mean([r.wall_time for r in reps]) / args.budget
        print(f"{D},{gaps.mean():.3e},{np.median(gaps):.3e},{per_eval:.5f}", flush=True)


if __name__ == "__main__":
    main()
