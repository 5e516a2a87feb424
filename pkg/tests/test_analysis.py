import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_safe_placement
from trigcast.analysis import (
    BLOCKING_PATTERNS,
    UnsafePlacement,
    admissible_byzantine_sets,
    analyze_placement,
    check_figure3_blocking,
    check_subgrid_reliability,
    exhaustive_neighborhood_check,
    fast_closure,
    blocking_placement,
    is_safe,
    min_byzantine_distance,
    reliable_set_closure,
    verify_torus_theorem,
)
from trigcast.placement import Placement
from trigcast.protocol import ProtocolParams
from trigcast.topology import INF, InvalidParameter, make_grid, make_torus, path_graph

H2 = ProtocolParams(2)


def test_min_distance_examples():
    g = make_grid(9)
    assert min_byzantine_distance(g, {g.node_at(5, 5)}) == INF
    assert min_byzantine_distance(g, set()) == INF
    assert min_byzantine_distance(g, {g.node_at(1, 1), g.node_at(3, 3)}) == 4
    t = make_torus(8)
    # pairwise BFS oracle (networkx), frozen
    assert min_byzantine_distance(t, {t.node_at(1, 1), t.node_at(8, 8), t.node_at(4, 4)}) == 2


def test_min_distance_on_custom_graph_uses_bfs():
    assert min_byzantine_distance(path_graph(6), {0, 3, 5}) == 2


def test_is_safe():
    assert is_safe(H2, 4)
    assert not is_safe(H2, 3)
    assert is_safe(ProtocolParams(5), math.inf)


def test_closure_examples():
    g = make_grid(3)
    assert reliable_set_closure(Placement(g, g.node_at(2, 2)), H2) == set(g.nodes())
    # exhaustive path enumeration, frozen: p2 only reaches S through p1
    assert reliable_set_closure(Placement(path_graph(4), 0), H2) == {0, 1}
    t = make_torus(9)
    for b in (0, 40, 77):
        src = (b + 13) % t.n
        rs = reliable_set_closure(Placement(t, src, frozenset({b})), H2)
        assert len(rs) == 80


def test_closure_refuses_unsafe_placements():
    pl = blocking_placement(8)
    with pytest.raises(UnsafePlacement):
        reliable_set_closure(pl, ProtocolParams(3))
    assert reliable_set_closure(pl, ProtocolParams(3), allow_unsafe=True)


@given(st.integers(0, 10**6), st.integers(1, 3))
@settings(max_examples=40)
def test_closure_invariants(seed, hops):
    rng = random.Random(seed)
    params = ProtocolParams(hops)
    pl = random_safe_placement(rng, rng.choice(["grid", "torus"]), rng.randint(4, 9), rng.randint(0, 5), hops + 2)
    rs = reliable_set_closure(pl, params)
    assert not rs & pl.byzantine
    t = pl.topology
    assert {pl.source} | {w for w in t.adj[pl.source] if pl.is_correct(w)} <= rs
    assert rs == fast_closure(pl, params)
    # order of examination does not matter
    assert rs == reliable_set_closure(pl, params, rng=random.Random(seed + 1))
    rep = analyze_placement(pl, params)
    assert rep.safe == is_safe(params, rep.D)
    assert rep.reliable_set == rs
    assert 0 < rep.coverage <= 1


@given(st.integers(0, 10**6))
@settings(max_examples=30)
def test_fewer_byzantine_never_shrinks_closure(seed):
    rng = random.Random(seed)
    pl = random_safe_placement(rng, "grid", rng.randint(5, 9), rng.randint(1, 5), 4)
    rs = fast_closure(pl, H2)
    drop = rng.choice(sorted(pl.byzantine))
    smaller = Placement(pl.topology, pl.source, pl.byzantine - {drop})
    assert rs <= fast_closure(smaller, H2)


def test_analysis_report_format():
    t = make_torus(9)
    rep = analyze_placement(Placement(t, 0), H2).to_json(t)
    assert rep == {"D": "inf", "safe": True, "reliableSetSize": 81, "coverage": 1.0, "excludedNodes": []}


def test_torus_coverage_examples():
    t9 = make_torus(9)
    for src in range(1, t9.n, 7):
        assert verify_torus_theorem(9, {0}, src)
    t8 = make_torus(8)
    a, b = t8.node_at(1, 1), t8.node_at(3, 4)
    assert min_byzantine_distance(t8, {a, b}) == 5
    for src in t8.nodes():
        if src not in (a, b):
            assert verify_torus_theorem(8, {a, b}, src)


def test_torus_coverage_preconditions():
    t = make_torus(8)
    with pytest.raises(InvalidParameter):
        verify_torus_theorem(8, {t.node_at(1, 1), t.node_at(1, 5)}, 9)
    with pytest.raises(InvalidParameter):
        verify_torus_theorem(8, {0}, 9, ProtocolParams(3))


def test_blocking_configuration_gives_type2_counterexample():
    pl = blocking_placement(8)
    v = verify_torus_theorem(8, pl.byzantine, pl.source, enforce=False)
    assert not v.covered
    assert v.counterexample in check_figure3_blocking(8).type2


@pytest.mark.parametrize("pattern", sorted(BLOCKING_PATTERNS))
@pytest.mark.parametrize("N", [8, 9, 12])
def test_blocking_pattern(pattern, N):
    v = check_figure3_blocking(N, pattern)
    assert v.D == 4
    assert v.confirmed
    assert len(v.type1) == 8 and len(v.type2) == 8


@pytest.mark.parametrize("pattern", sorted(BLOCKING_PATTERNS))
def test_blocking_needs_every_byzantine_node(pattern):
    pl = blocking_placement(10, pattern)
    for b in pl.byzantine:
        rest = pl.byzantine - {b}
        # every pair in the ring is 4 apart, so D stays 4; coverage is back anyway
        assert min_byzantine_distance(pl.topology, rest) == 4
        assert verify_torus_theorem(10, rest, pl.source, enforce=False)
    for b in pl.byzantine:
        assert verify_torus_theorem(10, {b}, pl.source)


def test_blocking_pattern_needs_room():
    with pytest.raises(InvalidParameter):
        check_figure3_blocking(7)


def test_admissible_sets_count():
    g = make_grid(3)
    singles = [s for s in admissible_byzantine_sets(g, 5) if len(s) == 1]
    assert len(singles) == 9


@pytest.mark.parametrize("shape", ["torus", "grid3x3", "grid5x5"])
def test_exhaustive_checks_cover(shape):
    cases = exhaustive_neighborhood_check(shape, H2)
    assert cases
    assert all(c.covered for c in cases), [c for c in cases if not c.covered][:3]


def test_exhaustive_check_only_for_h2():
    with pytest.raises(InvalidParameter):
        exhaustive_neighborhood_check("torus", ProtocolParams(3))


def test_subgrid():
    t = make_grid(15)
    centre = t.node_at(8, 8)
    assert check_subgrid_reliability(15, {t.node_at(7, 9)}, centre)
    assert check_subgrid_reliability(15, set(), centre)
    with pytest.raises(InvalidParameter):
        check_subgrid_reliability(9, set(), make_grid(9).node_at(5, 5))
    with pytest.raises(InvalidParameter):
        check_subgrid_reliability(15, set(), t.node_at(1, 1))


@given(st.integers(0, 10**6))
@settings(max_examples=20)
def test_subgrid_random(seed):
    rng = random.Random(seed)
    N = rng.randint(10, 16)
    t = make_grid(N)
    pl = random_safe_placement(rng, "grid", N, rng.randint(0, 4), 5)
    inner = [t.node_at(i, j) for i in range(4, N - 3) for j in range(4, N - 3) if t.node_at(i, j) not in pl.byzantine]
    assert check_subgrid_reliability(N, pl.byzantine, rng.choice(inner))
