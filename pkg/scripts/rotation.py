"""Final-gap distributions of REMBO on embedded Branin with and without a random rotation.

    python scripts/rotation.py --reps 50 --jobs 4
"""

import argparse

import numpy as np
from scipy import stats

from rembo.bench import BRANIN_EMBEDDED, BRANIN_ROTATED, ObjectiveSpec
from rembo.driver import RunConfig
from rembo.experiment import run_replications


def final_gaps(spec, run, args):
    res = run_replications(spec, run, args.seed, args.reps, args.jobs)
    return np.array([r.report.final_gap for r in res if r.report is not None])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--D", type=int, default=25)
    ap.add_argument("--rotation-seed", type=int, default=2024)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    run = RunConfig(d=2, k=4, budget=500)
    plain = final_gaps(ObjectiveSpec(BRANIN_EMBEDDED, D=args.D), run, args)
    rotated = final_gaps(ObjectiveSpec(BRANIN_ROTATED, D=args.D, rotation_seed=args.rotation_seed), run, args)
    ks = stats.ks_2samp(plain, rotated)
    for name, g in (("plain", plain), ("rotated", rotated)):
        print(f"{name:8s} median {np.median(g):.3e}  mean {g.mean():.3e}  max {g.max():.3e}")
    print(f"two-sample KS statistic {ks.statistic:.3f}, p = {ks.pvalue:.3f}")


if __name__ == "__main__":
    main()
