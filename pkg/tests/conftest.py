from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from flowberg.harmonic import make_harmonic
from flowberg.kernel import KernelEvaluator
from flowberg.measure import LevelWeight, canonical_flow
from flowberg.tree import homogeneous

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def canonical(q=2, top=0, depth=4, k=2, mode="exact"):
    t = homogeneous(q, top, depth)
    m = canonical_flow(t, mode)
    return t, m, LevelWeight.exponential(k, mode)


@pytest.fixture
def q2():
    """Homogeneous binary window with levels 0..-2."""
    return canonical(2, 0, 2, 2)


@pytest.fixture
def q2_ev(q2):
    _, m, sig = q2
    return KernelEvaluator(m, sig)


@pytest.fixture
def example_harmonic(q2):
    """The q=2, depth-2 harmonic function with leaves (1, 0, 0, 0)."""
    t, m, _ = q2
    leaves = t.by_level[t.bot]
    return make_harmonic(m, {w: Fraction(int(i == 0)) for i, w in enumerate(leaves)})


ACCEPTANCE: dict = {}


def record(cid: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE[cid] = (ok, detail)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {cid:2d}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {cid:2d}: {detail}")
