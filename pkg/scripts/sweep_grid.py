"""Delivery probability against the number of Byzantine nodes on N x N grids.

Writes one CSV (both modes) and prints, per side length, the largest n_B whose
estimate stays at or above the threshold.

    python scripts/sweep_grid.py --sides 100 200 500 --nb-max 30 --trials 1000 --out sweep.csv
"""

import argparse
import sys

from trigcast.montecarlo import MODES, TrialConfig, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sides", type=int, nargs="+", default=[100, 200, 500])
    ap.add_argument("--nb-max", type=int, default=30)
    ap.add_argument("--nb-step", type=int, default=1)
    ap.add_argument("--hops", type=int, default=2)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threshold", type=float, default=0.99)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    configs = [
        TrialConfig("grid", n, nb, args.hops, args.trials, args.seed)
        for n in args.sides
        for nb in range(0, args.nb_max + 1, args.nb_step)
    ]
    rep = sweep(configs, workers=args.workers)
    text = rep.to_csv(MODES)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    for mode in MODES:
        best = rep.max_tolerated(args.threshold, mode)
        print(f"{mode}: max n_B with p_hat >= {args.threshold}: {best}", file=sys.stderr)


if __name__ == "__main__":
    main()
