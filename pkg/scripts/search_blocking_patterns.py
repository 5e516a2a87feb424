"""Enumerate small D = 4 Byzantine sets around a torus source that stop the closure.

Candidates are sets of 2..k nodes within ``--radius`` hops (L1 offsets) of the
source with minimum pairwise distance exactly 4.  Hits are reduced modulo the
eight lattice symmetries, and a hit is reported as minimal when no proper
subset is also a hit.

    python scripts/search_blocking_patterns.py --n 13 --max-size 5
"""

import argparse
import itertools
import time

from trigcast.analysis import BLOCKING_PATTERNS, fast_closure
from trigcast.placement import Placement
from trigcast.protocol import ProtocolParams
from trigcast.topology import make_torus

SYMMETRIES = [
    lambda a, b: (a, b), lambda a, b: (-a, b), lambda a, b: (a, -b), lambda a, b: (-a, -b),
    lambda a, b: (b, a), lambda a, b: (-b, a), lambda a, b: (b, -a), lambda a, b: (-b, -a),
]


def l1(a, b):
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def canon(offsets):
    return min(tuple(sorted(f(*o) for o in offsets)) for f in SYMMETRIES)


def candidate_sets(radius, max_size):
    offs = [(di, dj) for di in range(-radius, radius + 1) for dj in range(-radius, radius + 1)
            if (di, dj) != (0, 0) and abs(di) + abs(dj) <= radius]

    def grow(chosen, start):
        if len(chosen) >= 2:
            yield chosen
        if len(chosen) == max_size:
            return
        for k in range(start, len(offs)):
            if all(l1(offs[k], c) >= 4 for c in chosen):
                yield from grow(chosen + [offs[k]], k + 1)

    for s in grow([], 0):
        if min(l1(a, b) for a, b in itertools.combinations(s, 2)) == 4:
            yield s


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=13, help="torus side (large enough to avoid wraparound effects)")
    ap.add_argument("--radius", type=int, default=4)
    ap.add_argument("--max-size", type=int, default=5)
    args = ap.parse_args()

    t = make_torus(args.n)
    src = t.node_at(args.n // 2 + 1, args.n // 2 + 1)
    params = ProtocolParams(2)
    start = time.perf_counter()
    hits: dict = {}
    checked = 0
    for offs in candidate_sets(args.radius, args.max_size):
        checked += 1
        pl = Placement(t, src, frozenset(t.offset(src, *o) for o in offs))
        rs = fast_closure(pl, params)
        if len(rs) < len(pl.correct_nodes()):
            hits.setdefault(canon(offs), len(rs))
    minimal = {
        c: size for c, size in hits.items()
        if not any(canon(sub) in hits for r in range(2, len(c)) for sub in itertools.combinations(c, r))
    }
    print(f"{checked} candidate sets, {len(hits)} blocking classes, {len(minimal)} minimal "
          f"({time.perf_counter() - start:.1f}s)")
    known = {canon(p): name for name, p in BLOCKING_PATTERNS.items()}
    for c, size in sorted(minimal.items(), key=lambda kv: kv[1]):
        print(f"  {c}  closure size {size}  {known.get(c, '')}")


if __name__ == "__main__":
    main()
