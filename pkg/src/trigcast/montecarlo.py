"""Monte Carlo estimate of the probability that a correct node delivers.

One trial: draw ``n_B`` Byzantine nodes uniformly without replacement, a
source uniformly among the correct nodes, a target uniformly among the other
correct nodes; the trial succeeds when the target is in the reliable-set
closure.  That gives a lower bound on the delivery probability.  ``strict``
mode also counts placements with ``D < H + 2`` as failures.

Trial ``k`` of a run with master seed ``s`` draws from
``numpy.random.default_rng([s, k])``, so reports do not depend on worker count
or execution order.
"""

from __future__ import annotations

import csv
import io
import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import binomtest

from ._kernels import closure_mask
from .analysis import closure_array, is_safe, min_byzantine_distance
from .placement import Placement
from .protocol import ProtocolParams
from .topology import InvalidParameter, Topology, make_grid, make_torus

MODES = ("paper", "strict")
CSV_COLUMNS = ("N", "n_B", "H", "trials", "successes", "p_hat", "ci_lo", "ci_hi", "mode", "seed")


class InvalidConfig(ValueError):
    pass


@lru_cache(maxsize=8)
def lattice(kind: str, n: int) -> Topology:
    if kind == "grid":
        return make_grid(n)
    if kind == "torus":
        return make_torus(n)
    raise InvalidConfig(f"Monte Carlo runs on grid or torus, not {kind!r}")


@dataclass(frozen=True)
class TrialConfig:
    kind: str = "grid"
    n: int = 100
    n_byz: int = 0
    hops: int = 2
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidConfig("need at least one trial")
        if self.hops < 1:
            raise InvalidConfig("hop bound must be >= 1")
        try:
            nodes = lattice(self.kind, self.n).n
        except InvalidParameter as exc:
            raise InvalidConfig(str(exc)) from exc
        if not 0 <= self.n_byz <= nodes - 2:
            raise InvalidConfig(f"n_B={self.n_byz} leaves no room for a source and a target among {nodes} nodes")

    @property
    def topology(self) -> Topology:
        return lattice(self.kind, self.n)


@dataclass(frozen=True)
class TrialResult:
    success: bool
    safe: bool
    source: int
    target: int
    byzantine: tuple
    D: float

    @property
    def strict_success(self) -> bool:
        return self.success and self.safe


def sample_placement(t: Topology, n_byz: int, rng: np.random.Generator) -> tuple[Placement, int]:
    if not 0 <= n_byz <= t.n - 2:
        raise InvalidConfig(f"cannot place {n_byz} Byzantine nodes on {t.n} nodes")
    byz = frozenset(int(b) for b in rng.choice(t.n, size=n_byz, replace=False))
    source = int(rng.integers(t.n))
    while source in byz:
        source = int(rng.integers(t.n))
    target = int(rng.integers(t.n))
    while target in byz or target == source:
        target = int(rng.integers(t.n))
    return Placement(t, source, byz), target


def run_trial(t: Topology, n_byz: int, params: ProtocolParams, seed) -> TrialResult:
    rng = np.random.default_rng(seed)
    placement, target = sample_placement(t, n_byz, rng)
    inside = closure_array(placement, params, target=target)
    D = min_byzantine_distance(t, placement.byzantine)
    return TrialResult(
        success=bool(inside[target]),
        safe=is_safe(params, D),
        source=placement.source,
        target=target,
        byzantine=tuple(sorted(placement.byzantine)),
        D=D,
    )


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class Estimate:
    successes: int
    trials: int
    p_hat: float
    ci_lo: float
    ci_hi: float

    @classmethod
    def of(cls, successes: int, trials: int) -> "Estimate":
        lo, hi = wilson_interval(successes, trials)
        p = successes / trials
        # the Wilson bounds bracket p_hat mathematically; clip float noise
        return cls(successes, trials, p, min(lo, p), max(hi, p))


@dataclass(frozen=True)
class EstimateReport:
    config: TrialConfig
    paper: Estimate
    strict: Estimate
    wall_time: float = field(default=0.0, compare=False)

    def by_mode(self, mode: str) -> Estimate:
        if mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}")
        return getattr(self, mode)

    def row(self, mode: str = "paper") -> dict:
        e = self.by_mode(mode)
        c = self.config
        return {
            "N": c.n,
            "n_B": c.n_byz,
            "H": c.hops,
            "trials": e.trials,
            "successes": e.successes,
            "p_hat": f"{e.p_hat:.6f}",
            "ci_lo": f"{e.ci_lo:.6f}",
            "ci_hi": f"{e.ci_hi:.6f}",
            "mode": mode,
            "seed": c.seed,
        }


def _run_chunk(args) -> tuple[int, int]:
    kind, n, n_byz, hops, seed, start, stop = args
    t = lattice(kind, n)
    params = ProtocolParams(hops)
    ok = strict = 0
    for k in range(start, stop):
        r = run_trial(t, n_byz, params, [seed, k])
        ok += r.success
        strict += r.strict_success
    return ok, strict


def estimate(config: TrialConfig, workers: int = 1) -> EstimateReport:
    start = time.perf_counter()
    c = config
    if workers <= 1:
        ok, strict = _run_chunk((c.kind, c.n, c.n_byz, c.hops, c.seed, 0, c.trials))
    else:
        bounds = np.linspace(0, c.trials, workers + 1).astype(int)
        chunks = [(c.kind, c.n, c.n_byz, c.hops, c.seed, int(a), int(b)) for a, b in zip(bounds, bounds[1:])]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_chunk, chunks))
        ok = sum(p[0] for p in parts)
        strict = sum(p[1] for p in parts)
    return EstimateReport(
        c,
        Estimate.of(ok, c.trials),
        Estimate.of(strict, c.trials),
        wall_time=time.perf_counter() - start,
    )


@dataclass
class SweepReport:
    reports: list

    def to_csv(self, modes=("paper",)) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.reports:
            for mode in modes:
                w.writerow(r.row(mode))
        return buf.getvalue()

    def max_tolerated(self, threshold: float = 0.99, mode: str = "paper", use_ci: bool = False) -> dict:
        """Per side length, the largest swept ``n_B`` such that it and every smaller
        swept ``n_B`` reach ``threshold`` (point estimate, or the interval's lower
        end with ``use_ci``).  ``None`` when even the smallest fails."""
        out: dict = {}
        for n in sorted({r.config.n for r in self.reports}):
            best = None
            for r in sorted((r for r in self.reports if r.config.n == n), key=lambda r: r.config.n_byz):
                e = r.by_mode(mode)
                if (e.ci_lo if use_ci else e.p_hat) < threshold:
                    break
                best = r.config.n_byz
            out[n] = best
        return out


def sweep(configs, workers: int = 1) -> SweepReport:
    configs = list(configs)
    if not configs:
        raise InvalidConfig("empty sweep")
    return SweepReport([estimate(c, workers) for c in configs])


def exact_probability(t: Topology, n_byz: int, params: ProtocolParams, mode: str = "paper") -> float:
    """Success probability of one trial by full enumeration of (Byzantine set, source, target).

    Every Byzantine set, source and target is equally likely under the
    sampling scheme, so the probability is a plain average.  Feasible for
    small graphs and ``n_byz <= 2``.
    """
    if mode not in MODES:
        raise InvalidConfig(f"mode must be one of {MODES}")
    indptr, indices = t.csr
    total = 0.0
    count = 0
    for byz in itertools.combinations(range(t.n), n_byz):
        safe = is_safe(params, min_byzantine_distance(t, byz))
        blocked = np.zeros(t.n, dtype=np.uint8)
        blocked[list(byz)] = 1
        correct = [v for v in range(t.n) if not blocked[v]]
        for s in correct:
            if mode == "strict" and not safe:
                hits = 0
            else:
                seeds = np.array([s] + [w for w in t.adj[s] if not blocked[w]], dtype=np.int64)
                inside = closure_mask(indptr, indices, blocked, seeds, params.hops, -1)
                hits = int(inside.sum()) - 1  # targets exclude the source
            total += hits / (len(correct) - 1)
            count += 1
    return total / count
