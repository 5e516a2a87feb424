"""Random flooding campaign: false deliveries as a function of D - H.

For each hop bound, draw placements on small grids and tori, run every
built-in strategy under several scheduler seeds, and tabulate how many runs
end with a correct node delivering a forged payload, split by whether
D >= H + 2.

    python scripts/safety_campaign.py --placements 300 --seeds 5
"""

import argparse
import random
from collections import Counter

from trigcast import sim
from trigcast.analysis import is_safe, min_byzantine_distance
from trigcast.placement import Placement
from trigcast.protocol import ProtocolParams
from trigcast.topology import make_grid, make_torus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--placements", type=int, default=300)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    runs: Counter = Counter()
    bad: Counter = Counter()
    for _ in range(args.placements):
        hops = rng.choice((1, 2, 3))
        params = ProtocolParams(hops)
        N = rng.randint(4, 8)
        t = make_grid(N) if rng.random() < 0.5 else make_torus(N)
        byz = frozenset(rng.sample(range(t.n), rng.randint(2, 4)))
        source = rng.choice([v for v in t.nodes() if v not in byz])
        pl = Placement(t, source, byz)
        key = (hops, is_safe(params, min_byzantine_distance(t, byz)))
        for strategy in sim.STRATEGIES:
            for seed in range(args.seeds):
                script = sim.make_strategy(strategy, pl, params, seed)
                tr = sim.run_execution(pl, params, sim.Scheduler("random", seed), script, record=False)
                runs[key] += 1
                bad[key] += not sim.check_safety(tr, pl).safe
    print("H  D>=H+2  runs  false-delivery runs")
    for key in sorted(runs):
        print(f"{key[0]}  {str(key[1]):7}  {runs[key]:5}  {bad[key]}")


if __name__ == "__main__":
    main()
