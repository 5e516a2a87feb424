import random

import pytest
from hypothesis import HealthCheck, settings

from trigcast import Placement, make_grid, make_torus, min_byzantine_distance

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.load_profile("default")


def random_safe_placement(rng: random.Random, kind: str, N: int, n_byz: int, min_d: int, tries: int = 500):
    """Rejection-sample a placement whose Byzantine nodes are pairwise >= ``min_d`` apart."""
    t = make_grid(N) if kind == "grid" else make_torus(N)
    for _ in range(tries):
        byz = frozenset(rng.sample(range(t.n), n_byz))
        if min_byzantine_distance(t, byz) >= min_d:
            source = rng.choice([v for v in t.nodes() if v not in byz])
            return Placement(t, source, byz)
    # fall back to fewer Byzantine nodes rather than loop forever
    return random_safe_placement(rng, kind, N, n_byz - 1, min_d, tries) if n_byz > 1 else Placement(
        t, rng.randrange(t.n)
    )


@pytest.fixture
def grid7():
    return make_grid(7)


@pytest.fixture
def torus8():
    return make_torus(8)


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
