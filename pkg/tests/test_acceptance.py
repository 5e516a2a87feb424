"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the ``acceptance`` section of the
pytest summary) before asserting.  Set ``TRIGCAST_SLOW=1`` to also run the
strict-mode cutoff sweep on the 500 x 500 grid.
"""

import os
import random
import subprocess
import sys
import time

import pytest

from conftest import random_safe_placement, record_acceptance
from trigcast import sim
from trigcast.analysis import (
    BLOCKING_PATTERNS,
    check_figure3_blocking,
    exhaustive_neighborhood_check,
    fast_closure,
    blocking_placement,
    min_byzantine_distance,
    reliable_set_closure,
    verify_torus_theorem,
)
from trigcast.montecarlo import TrialConfig, estimate, exact_probability, sweep
from trigcast.protocol import ProtocolParams
from trigcast.sim import FORGED, Scheduler, check_safety, replay_theorem2_attack, run_execution
from trigcast.topology import make_grid, make_torus

H2 = ProtocolParams(2)


def verdict(number, title, ok, detail, started):
    record_acceptance(number, title, ok, f"{detail}; {time.perf_counter() - started:.1f}s")
    assert ok, detail


def spread_byzantine(t, rng, count, min_d):
    """Greedy random Byzantine set with pairwise distance >= ``min_d``."""
    order = list(t.nodes())
    rng.shuffle(order)
    chosen = []
    for v in order:
        if len(chosen) == count:
            break
        if all(t.metric_distance(v, c) >= min_d for c in chosen):
            chosen.append(v)
    return frozenset(chosen)


def test_criterion_1_safety_when_far_apart():
    t0 = time.perf_counter()
    rng = random.Random(2024)
    instances = runs = 0
    violations = []
    for _ in range(500):
        hops = rng.choice((1, 2, 3))
        kind = rng.choice(("grid", "torus"))
        N = rng.randint(hops + 4, hops + 7)
        pl = random_safe_placement(rng, kind, N, rng.randint(2, 4), hops + 2)
        params = ProtocolParams(hops)
        assert min_byzantine_distance(pl.topology, pl.byzantine) >= hops + 2
        for seed in range(5):
            script = sim.flood(pl, params, seed=rng.randrange(2**31))
            tr = run_execution(pl, params, Scheduler("random", seed), script, record=False)
            runs += 1
            if not tr.quiescent or not check_safety(tr, pl).safe:
                violations.append((kind, N, hops, sorted(pl.byzantine), seed))
        instances += 1
    ok = not violations and instances >= 500 and time.perf_counter() - t0 < 120
    verdict(1, "no false delivery when D >= H+2", ok,
            f"{instances} instances, {runs} flooded runs, {len(violations)} violations", t0)


def test_criterion_2_tightness_replay():
    t0 = time.perf_counter()
    hits = {}
    for hops in (1, 2, 3, 4):
        pl, _, tr = replay_theorem2_attack(hops)
        v = check_safety(tr, pl)
        hits[hops] = (v.node, v.payload) == (1, FORGED)
    elapsed = time.perf_counter() - t0
    verdict(2, "D = H+1 collusion makes p1 deliver the forgery", all(hits.values()) and elapsed < 1,
            f"H -> violated at p1: {hits}", t0)


def test_criterion_3_torus_coverage():
    t0 = time.perf_counter()
    exhaustive = [c for shape in ("torus", "grid3x3", "grid5x5") for c in exhaustive_neighborhood_check(shape, H2)]
    bad = [c for c in exhaustive if not c.covered]
    rng = random.Random(7)
    sampled = 0
    for N in range(6, 13):
        t = make_torus(N)
        for _ in range(200):
            byz = spread_byzantine(t, rng, rng.randint(1, max(1, N * N // 16)), 5)
            source = rng.choice([v for v in t.nodes() if v not in byz])
            if not verify_torus_theorem(N, byz, source):
                bad.append((N, sorted(byz), source))
            sampled += 1
    ok = not bad and time.perf_counter() - t0 < 300
    verdict(3, "torus with D >= 5 is fully covered", ok,
            f"{len(exhaustive)} exhaustive cases, {sampled} sampled placements on N=6..12, {len(bad)} uncovered", t0)


def test_criterion_4_blocking_pattern():
    t0 = time.perf_counter()
    problems = []
    for pattern in sorted(BLOCKING_PATTERNS):
        for N in range(8, 13):
            v = check_figure3_blocking(N, pattern)
            if not v.confirmed:
                problems.append((pattern, N, "structure"))
                continue
            pl = blocking_placement(N, pattern)
            for seed in range(10):
                tr = run_execution(pl, H2, Scheduler("random", seed), sim.silent(), record=False)
                got = tr.delivered_authentic(pl.payload)
                if got & v.type2 or not v.type1 <= got:
                    problems.append((pattern, N, seed))
    ok = not problems and time.perf_counter() - t0 < 60
    verdict(4, "D = 4 pattern blocks type-2 nodes", ok,
            f"{len(BLOCKING_PATTERNS)} patterns x N=8..12 x 10 seeds, problems: {problems[:3]}", t0)


def test_criterion_5_closure_soundness():
    t0 = time.perf_counter()
    rng = random.Random(55)
    misses = []
    runs = 0
    for k in range(200):
        hops = rng.choice((1, 2, 3))
        params = ProtocolParams(hops)
        pl = random_safe_placement(rng, rng.choice(("grid", "torus")), rng.randint(hops + 3, hops + 6),
                                   rng.randint(1, 4), hops + 2)
        rs = fast_closure(pl, params)
        for strategy in sim.STRATEGIES:
            for seed in range(3):
                script = sim.make_strategy(strategy, pl, params, seed)
                tr = run_execution(pl, params, Scheduler("random", seed), script, record=False)
                runs += 1
                missing = rs - tr.delivered_authentic(pl.payload)
                if missing or not tr.quiescent:
                    misses.append((k, strategy, seed, sorted(missing)))
    ok = not misses and time.perf_counter() - t0 < 300
    verdict(5, "closure members always deliver", ok, f"200 placements, {runs} runs, {len(misses)} misses", t0)


def test_criterion_6_order_independence():
    t0 = time.perf_counter()
    rng = random.Random(6)
    differing = 0
    for _ in range(20):
        hops = rng.choice((1, 2, 3))
        params = ProtocolParams(hops)
        pl = random_safe_placement(rng, rng.choice(("grid", "torus")), rng.randint(6, 12), rng.randint(0, 6), hops + 2)
        sets = {frozenset(reliable_set_closure(pl, params, rng=random.Random(rng.random()))) for _ in range(10)}
        sets.add(frozenset(fast_closure(pl, params)))
        differing += len(sets) != 1
    ok = differing == 0 and time.perf_counter() - t0 < 30
    verdict(6, "closure is order independent", ok, f"20 placements x 10 orders, {differing} disagreements", t0)


def test_criterion_7_estimator_vs_enumeration():
    t0 = time.perf_counter()
    g = make_grid(10)
    inside = {}
    exact = {}
    for nb in (1, 2):
        exact[nb] = exact_probability(g, nb, H2)
        hits = 0
        for rep in range(20):
            e = estimate(TrialConfig("grid", 10, nb, 2, trials=2000, seed=1000 * nb + rep)).paper
            hits += e.ci_lo <= exact[nb] <= e.ci_hi
        inside[nb] = hits
    ok = all(h >= 18 for h in inside.values()) and time.perf_counter() - t0 < 600
    verdict(7, "Monte Carlo interval contains the exact value", ok,
            "exact " + ", ".join(f"P({nb})={exact[nb]:.6f} inside {inside[nb]}/20" for nb in (1, 2)), t0)


def test_criterion_8_headline_and_surrogate():
    t0 = time.perf_counter()
    head = estimate(TrialConfig("grid", 500, 14, 2, trials=1000, seed=14))
    headline_ok = head.paper.p_hat >= 0.985 and head.strict.p_hat >= 0.985

    rep = sweep([TrialConfig("grid", 200, nb, 2, trials=1000, seed=200) for nb in range(0, 31, 5)])
    ests = [r.paper for r in rep.reports]
    strict = [r.strict for r in rep.reports]
    starts_at_one = ests[0].p_hat == 1.0 and strict[0].p_hat == 1.0
    # non-increasing within sampling noise: each point below the previous upper bound
    trend = all(b.p_hat <= a.ci_hi for a, b in zip(ests, ests[1:])) and all(
        b.p_hat <= a.ci_hi for a, b in zip(strict, strict[1:])
    )
    # larger grids tolerate more failures (visible in strict mode)
    sizes = sweep([TrialConfig("grid", n, nb, 2, trials=1000, seed=300) for n in (100, 200) for nb in range(0, 13)])
    best = sizes.max_tolerated(0.99, "strict")
    larger = best[200] is not None and (best[100] or 0) < best[200]
    ok = headline_ok and starts_at_one and trend and larger
    verdict(8, "N=500, n_B=14 reaches p >= 0.985; surrogate sweep trends", ok,
            f"N=500 p_hat paper={head.paper.p_hat:.3f} strict={head.strict.p_hat:.3f}; "
            f"N=200 paper {[round(e.p_hat, 3) for e in ests]} strict {[round(e.p_hat, 3) for e in strict]}; "
            f"strict max n_B at 0.99: {best}", t0)


@pytest.mark.slow
@pytest.mark.skipif(not os.environ.get("TRIGCAST_SLOW"), reason="set TRIGCAST_SLOW=1")
def test_strict_cutoff_near_fourteen():
    rep = sweep([TrialConfig("grid", 500, nb, 2, trials=2000, seed=500) for nb in range(8, 21, 2)])
    best = rep.max_tolerated(0.99, "strict")[500]
    print("strict max n_B on N=500:", best, [round(r.strict.p_hat, 4) for r in rep.reports])
    assert 10 <= best <= 18


def _cli(*argv):
    return subprocess.run([sys.executable, "-m", "trigcast", *argv], capture_output=True, text=True)


def test_criterion_9_determinism(tmp_path):
    t0 = time.perf_counter()
    topo = tmp_path / "topo.json"
    trace = tmp_path / "trace.jsonl"
    commands = {
        "gen-topology": (["gen-topology", "--topology", "torus", "--n", "8", "--out", str(topo)], [topo]),
        "analyze": (["analyze", "--topology", f"file:{topo}", "--nb", "3", "--seed", "4"], []),
        "simulate": (["simulate", "--topology", "torus", "--n", "9", "--nb", "3", "--seed", "4",
                      "--strategy", "flood", "--out", str(trace)], [trace]),
        "replay": (["replay", str(trace)], []),
        "montecarlo": (["montecarlo", "--n", "30", "--nb", "0..10:5", "--trials", "200", "--seed", "9"], []),
    }
    differing = []
    for name, (argv, files) in commands.items():
        outputs = []
        for _ in range(2):
            res = _cli(*argv)
            outputs.append((res.returncode, res.stdout, res.stderr, [f.read_bytes() for f in files]))
        if outputs[0] != outputs[1] or outputs[0][0] not in (0, 1):
            differing.append(name)
    ok = not differing and time.perf_counter() - t0 < 60
    verdict(9, "every subcommand is byte-for-byte repeatable", ok,
            f"{len(commands)} subcommands run twice, differing: {differing}", t0)
