"""Adversary-independent analysis of a placement.

* minimum pairwise Byzantine distance ``D`` and the safety test ``D >= H + 2``;
* the reliable-set closure: start from the source and its correct neighbours,
  then add any correct ``p`` that has a neighbour ``q`` in the set and a
  correct simple path of at most ``H`` hops to another set member, the path
  avoiding ``q``;
* torus checks (full coverage when ``D >= 5``, the ``D = 4`` blocking
  pattern, proof-by-exhaustion replays) and the grid sub-grid variant.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._kernels import closure_mask
from .placement import Placement
from .protocol import ProtocolParams
from .topology import (
    INF,
    InvalidParameter,
    Topology,
    bfs_distances,
    exists_bounded_correct_path,
    make_grid,
    make_torus,
)


class UnsafePlacement(ValueError):
    """Closure requested on a placement where false deliveries are possible."""


# -- distances & safety ------------------------------------------------------


def min_byzantine_distance(t: Topology, byzantine: Iterable[int]) -> float:
    byz = sorted(set(t.check_node(b) for b in byzantine))
    if len(byz) < 2:
        return INF
    if t.kind in ("grid", "torus"):
        return min(t.metric_distance(a, b) for a, b in itertools.combinations(byz, 2))
    best = INF
    for k, a in enumerate(byz[:-1]):
        dist = bfs_distances(t, a)
        best = min(best, min(dist[b] for b in byz[k + 1 :]))
    return best


def is_safe(params: ProtocolParams, D: float) -> bool:
    return D >= params.hops + 2


# -- closure -----------------------------------------------------------------


def default_seed(placement: Placement) -> set[int]:
    t = placement.topology
    return {placement.source} | {w for w in t.adj[placement.source] if placement.is_correct(w)}


def reliable_set_closure(
    placement: Placement,
    params: ProtocolParams,
    *,
    seed: Iterable[int] | None = None,
    allowed: Iterable[int] | None = None,
    rng: random.Random | None = None,
    allow_unsafe: bool = False,
) -> set[int]:
    """Least fixed point of the node-by-node extension rule (pure Python).

    ``seed`` replaces the default starting set.  ``allowed`` confines paths
    and new members to a window, which can only shrink the result.  ``rng``
    shuffles the candidate order each round; the fixed point does not depend
    on it.
    """
    t = placement.topology
    if not allow_unsafe:
        D = min_byzantine_distance(t, placement.byzantine)
        if not is_safe(params, D):
            raise UnsafePlacement(f"D={D} < H+2={params.hops + 2}; pass allow_unsafe=True to explore")
    blocked = set(placement.byzantine)
    if allowed is not None:
        allowed = set(allowed)
        blocked |= set(t.nodes()) - allowed
    S = set(default_seed(placement) if seed is None else seed)
    S -= set(placement.byzantine)
    H = params.hops
    while True:
        frontier = sorted({w for v in S for w in t.adj[v]} - S - blocked)
        if rng is not None:
            rng.shuffle(frontier)
        grew = False
        for p in frontier:
            for q in t.adj[p]:
                if q in S and exists_bounded_correct_path(t, blocked, p, S, H, excluded=q):
                    S.add(p)
                    grew = True
                    break
        if not grew:
            return S


def closure_array(
    placement: Placement,
    params: ProtocolParams,
    *,
    seed: Iterable[int] | None = None,
    allowed: Iterable[int] | None = None,
    target: int = -1,
) -> np.ndarray:
    """Compiled closure; returns a 0/1 membership array.  No safety check."""
    t = placement.topology
    indptr, indices = t.csr
    blocked = np.zeros(t.n, dtype=np.uint8)
    if placement.byzantine:
        blocked[list(placement.byzantine)] = 1
    if allowed is not None:
        keep = np.zeros(t.n, dtype=bool)
        keep[list(allowed)] = True
        blocked[~keep] = 1
    seeds = sorted(default_seed(placement) if seed is None else seed)
    seeds = np.array([s for s in seeds if not blocked[s]], dtype=np.int64)
    return closure_mask(indptr, indices, blocked, seeds, params.hops, target)


def fast_closure(placement: Placement, params: ProtocolParams, **kw) -> set[int]:
    return set(np.flatnonzero(closure_array(placement, params, **kw)).tolist())


@dataclass(frozen=True)
class PlacementAnalysis:
    D: float
    safe: bool
    reliable_set: frozenset
    correct_count: int
    excluded: tuple = ()

    @property
    def coverage(self) -> float:
        return len(self.reliable_set) / self.correct_count

    def to_json(self, t: Topology | None = None) -> dict:
        label = (lambda v: list(t.label(v)) if t is not None and t.side else v)
        return {
            "D": "inf" if math.isinf(self.D) else int(self.D),
            "safe": self.safe,
            "reliableSetSize": len(self.reliable_set),
            "coverage": self.coverage,
            "excludedNodes": [label(v) for v in self.excluded],
        }


def analyze_placement(placement: Placement, params: ProtocolParams) -> PlacementAnalysis:
    t = placement.topology
    D = min_byzantine_distance(t, placement.byzantine)
    rs = frozenset(fast_closure(placement, params))
    correct = placement.correct_nodes()
    return PlacementAnalysis(
        D=D,
        safe=is_safe(params, D),
        reliable_set=rs,
        correct_count=len(correct),
        excluded=tuple(v for v in correct if v not in rs),
    )


# -- torus liveness ------------------------------------------------------------


@dataclass(frozen=True)
class CoverageVerdict:
    covered: bool
    counterexample: int | None = None
    missing: tuple = ()

    def __bool__(self):
        return self.covered


def verify_torus_theorem(
    N: int,
    byzantine: Iterable[int],
    source: int,
    params: ProtocolParams = ProtocolParams(2),
    enforce: bool = True,
) -> CoverageVerdict:
    """Does the closure reach every correct node of an ``N x N`` torus?

    With ``enforce`` the ``H = 2`` / ``D >= 5`` preconditions are checked;
    switch it off to look for counterexamples outside them.
    """
    t = make_torus(N)
    byz = frozenset(byzantine)
    if enforce:
        if params.hops != 2:
            raise InvalidParameter("the torus check is stated for H = 2")
        D = min_byzantine_distance(t, byz)
        if D < 5:
            raise InvalidParameter(f"Byzantine nodes too close: D={D} < 5")
    placement = Placement(t, source, byz)
    rs = fast_closure(placement, params)
    missing = tuple(v for v in placement.correct_nodes() if v not in rs)
    # report a node on the closure's frontier: that is where the blocking shows
    frontier = [v for v in missing if any(w in rs for w in t.adj[v])]
    witness = (frontier or missing or (None,))[0]
    return CoverageVerdict(not missing, witness, missing)


def admissible_byzantine_sets(
    t: Topology, min_distance: int, candidates: Sequence[int] | None = None, exclude: Iterable[int] = ()
):
    """All Byzantine sets over ``candidates`` whose pairwise distance is ``>= min_distance``
    (the empty set included)."""
    pool = [v for v in (t.nodes() if candidates is None else candidates) if v not in set(exclude)]
    dist = {a: bfs_distances(t, a) for a in pool}

    def grow(chosen, start):
        yield frozenset(chosen)
        for k in range(start, len(pool)):
            v = pool[k]
            if all(dist[v][c] >= min_distance for c in chosen):
                yield from grow(chosen + [v], k + 1)

    yield from grow([], 0)


@dataclass(frozen=True)
class NeighborhoodCase:
    shape: str
    byzantine: frozenset
    seed: frozenset
    covered: bool
    missing: tuple = ()


def _window(side: int) -> Topology:
    return make_grid(side)


def exhaustive_neighborhood_check(
    shape: str, params: ProtocolParams = ProtocolParams(2), min_distance: int = 5, n: int | None = None
) -> list[NeighborhoodCase]:
    """Replay the exhaustion steps of the torus argument with the closure.

    ``torus``: every ``n x n`` torus with ``n <= 5`` (all sizes 3..5 when ``n``
    is omitted), every admissible Byzantine set, every correct source; the
    whole torus must be covered.

    ``grid3x3``: a Byzantine-free 3x3 window around the next path node; the
    seed is an edge-middle node (the previous path node) plus one of its
    window neighbours, both already delivering.  Paths are confined to the
    window, so success here implies success in any torus.

    ``grid5x5``: two families on a 5x5 window.  Base case: source at the
    centre, every admissible Byzantine set in the window, the centre 3x3 must
    be covered.  Byzantine step: one Byzantine node at the centre and every
    adjacent correct pair as seed; every correct window node must be covered.
    """
    if params.hops != 2:
        raise InvalidParameter("exhaustion is only meaningful for H = 2")
    cases: list[NeighborhoodCase] = []
    if shape == "torus":
        sizes = [n] if n is not None else [3, 4, 5]
        for N in sizes:
            if not 3 <= N <= 5:
                raise InvalidParameter("exhaustive torus check covers 3x3 .. 5x5")
            t = make_torus(N)
            for byz in admissible_byzantine_sets(t, min_distance):
                for s in t.nodes():
                    if s in byz:
                        continue
                    pl = Placement(t, s, byz)
                    rs = fast_closure(pl, params)
                    missing = tuple(v for v in pl.correct_nodes() if v not in rs)
                    cases.append(NeighborhoodCase(f"torus{N}", byz, frozenset({s}), not missing, missing))
    elif shape == "grid3x3":
        w = _window(3)
        centre = w.node_at(2, 2)
        for p_prev in w.adj[centre]:
            for q in w.adj[p_prev]:
                seed = frozenset({p_prev, q})
                pl = Placement(w, p_prev)
                rs = fast_closure(pl, params, seed=seed)
                missing = tuple(v for v in w.nodes() if v not in rs)
                cases.append(NeighborhoodCase("grid3x3", frozenset(), seed, not missing, missing))
    elif shape == "grid5x5":
        w = _window(5)
        centre = w.node_at(3, 3)
        inner = [w.offset(centre, di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1)]
        for byz in admissible_byzantine_sets(w, min_distance, exclude=[centre]):
            pl = Placement(w, centre, byz)
            rs = fast_closure(pl, params)
            missing = tuple(v for v in inner if v not in byz and v not in rs)
            cases.append(NeighborhoodCase("grid5x5-base", byz, frozenset({centre}), not missing, missing))
        byz = frozenset({centre})
        for a, b in w.edges():
            if centre in (a, b):
                continue
            pl = Placement(w, a, byz)
            rs = fast_closure(pl, params, seed={a, b})
            missing = tuple(v for v in pl.correct_nodes() if v not in rs)
            cases.append(NeighborhoodCase("grid5x5-byzantine", byz, frozenset({a, b}), not missing, missing))
    else:
        raise InvalidParameter(f"unknown shape {shape!r}")
    return cases


# -- the D = 4 blocking pattern -----------------------------------------------

# Byzantine offsets (di, dj) around the source.  Four nodes two hops from a
# centre on the axes: pairwise distance 4, and the 3x3 block around the centre
# is sealed.  Up to symmetry these are the only minimal D = 4 sets of at most
# five nodes within six hops of the source that stop the closure (found by
# enumeration, see scripts/search_blocking_patterns.py); the second is the
# same ring with the source moved next to the centre.
BLOCKING_PATTERNS: dict[str, tuple[tuple[int, int], ...]] = {
    "axis-ring": ((-2, 0), (2, 0), (0, -2), (0, 2)),
    "shifted-source": ((1, 0), (-3, 0), (-1, -2), (-1, 2)),
}


@dataclass(frozen=True)
class BlockingVerdict:
    N: int
    pattern: str
    D: float
    source: int
    type1: frozenset
    type2: frozenset
    closure: frozenset
    blocked_structurally: bool
    type2_outside_closure: bool
    type1_in_closure: bool

    @property
    def confirmed(self) -> bool:
        return (
            self.D == 4
            and self.blocked_structurally
            and self.type2_outside_closure
            and self.type1_in_closure
            and bool(self.type2)
        )


def blocking_placement(N: int, pattern: str = "axis-ring") -> Placement:
    if N < 8:
        raise InvalidParameter("the blocking pattern needs a torus with N >= 8")
    t = make_torus(N)
    src = t.node_at(N // 2, N // 2)
    byz = frozenset(t.offset(src, di, dj) for di, dj in BLOCKING_PATTERNS[pattern])
    return Placement(t, src, byz)


def check_figure3_blocking(N: int, pattern: str = "axis-ring") -> BlockingVerdict:
    """Structural check of the ``D = 4`` counterexample on an ``N x N`` torus.

    Type-1 nodes are the correct nodes that deliver besides the source;
    type-2 nodes are their correct neighbours outside that set.  Each type-2
    node ``p`` with type-1 neighbour ``q`` must lack any correct path of at
    most 2 hops to another delivering node that avoids ``q``.
    """
    params = ProtocolParams(2)
    pl = blocking_placement(N, pattern)
    t = pl.topology
    D = min_byzantine_distance(t, pl.byzantine)
    rs = frozenset(reliable_set_closure(pl, params, allow_unsafe=True))
    type1 = rs - {pl.source}
    type2 = frozenset(
        w for v in type1 for w in t.adj[v] if pl.is_correct(w) and w not in rs
    )
    delivering = type1 | {pl.source}
    blocked = all(
        not exists_bounded_correct_path(t, pl.byzantine, p, delivering, 2, excluded=q)
        for p in type2
        for q in t.adj[p]
        if q in type1
    )
    source_nbrs = frozenset(w for w in t.adj[pl.source] if pl.is_correct(w))
    return BlockingVerdict(
        N=N,
        pattern=pattern,
        D=D,
        source=pl.source,
        type1=type1,
        type2=type2,
        closure=rs,
        blocked_structurally=blocked,
        type2_outside_closure=not (type2 & rs),
        type1_in_closure=source_nbrs <= rs and type1 <= rs,
    )


# -- grid sub-grid ---------------------------------------------------------------


def subgrid_nodes(t: Topology) -> list[int]:
    N = t.side
    return [t.node_at(i, j) for i in range(4, N - 3) for j in range(4, N - 3)]


def check_subgrid_reliability(
    N: int,
    byzantine: Iterable[int],
    source: int,
    params: ProtocolParams = ProtocolParams(2),
) -> CoverageVerdict:
    """Closure on the full ``N x N`` grid must cover every correct node ``(i, j)``
    with ``4 <= i, j <= N - 4``."""
    if N - 7 < 3:
        raise InvalidParameter(f"sub-grid 4..{N - 4} is degenerate; need N >= 10")
    if params.hops != 2:
        raise InvalidParameter("the sub-grid check is stated for H = 2")
    t = make_grid(N)
    byz = frozenset(byzantine)
    sub = subgrid_nodes(t)
    if source not in sub:
        raise InvalidParameter("source must lie inside the sub-grid")
    D = min_byzantine_distance(t, byz)
    if D < 5:
        raise InvalidParameter(f"Byzantine nodes too close: D={D} < 5")
    pl = Placement(t, source, byz)
    rs = fast_closure(pl, params)
    missing = tuple(v for v in sub if v not in byz and v not in rs)
    return CoverageVerdict(not missing, missing[0] if missing else None, missing)
