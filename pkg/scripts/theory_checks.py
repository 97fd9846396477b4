"""Monte-Carlo checks of the embedding theorems and the regret-decay probe.

    python scripts/theory_checks.py
"""

import argparse
import time

from rembo.theory import EffectiveSubspaceInstance, check_theorem1, check_theorem2, regret_decay_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials1", type=int, default=1000)
    ap.add_argument("--trials2", type=int, default=10_000)
    ap.add_argument("--probe-seeds", type=int, default=10)
    ap.add_argument("--skip-probe", action="store_true")
    args = ap.parse_args()

    t0 = time.perf_counter()
    for D in (10, 50):
        for de in (1, 2, 3):
            for d in range(de, 6):
                inst = EffectiveSubspaceInstance.random(D, de, seed=100 * D + de)
                rep = check_theorem1(inst, d, args.trials1, seed=D + de + d)
                print(f"theorem1 D={D} de={de} d={d}: {rep.successes}/{rep.trials} "
                      f"(degenerate {rep.degenerate})")
    print(f"  {time.perf_counter() - t0:.1f}s")

    inst = EffectiveSubspaceInstance.random(10, 2, seed=7, axis_aligned=True)
    for eps in (0.05, 0.1, 0.25, 0.5):
        rep = check_theorem2(inst, 2, eps, args.trials2, seed=11)
        print(f"theorem2 eps={eps}: frequency {rep.frequency:.4f}, threshold {rep.bound:.4f}, "
              f"{'pass' if rep.verdict else 'fail'}")

    if not args.skip_probe:
        for d, budget in ((1, 40), (2, 60)):
            res = regret_decay_probe(d, args.probe_seeds, budget)
            print(f"regret d={d} budget={budget}: slope {res.slope:.3f}, excluded {res.excluded}")


if __name__ == "__main__":
    main()
