from fractions import Fraction

import pytest

from flowberg.errors import PreconditionError
from flowberg.functions import inner
from flowberg.harmonic import laplacian, make_harmonic, random_harmonic
from flowberg.kernel import (KernelEvaluator, hormander_check, kernel_rooted, project, projection_function, psi,
                             psi_function, psi_norm_closed, psi_orthogonality, psi_pairing, reproduce,
                             rooted_constant, section_laplacian, selfadjoint_check, size_condition,
                             size_condition_direct)
from flowberg.measure import LevelWeight, random_flow
from flowberg.tree import TreeGenSpec, build_tree

from conftest import canonical


def series_oracle(m, sig, x, y, terms=80):
    """Defining series of K(x, y) summed directly: walk up from x, test membership of y."""
    t = m.tree
    path, masses = [x], [m.values[x]]
    while t.parent[path[-1]] >= 0:
        path.append(t.parent[path[-1]])
        masses.append(m.values[path[-1]])
    depth = len(path) - 1
    for j in range(1, terms + 2):
        masses.append(m.chain_mass(j))

    def below(n, v):  # is v in the sector of p^n(x)?
        return n >= depth or v in t.sector(path[n])

    total = 0
    for n in range(terms):
        if not below(n + 1, y) or (n + 1 <= depth and y == path[n + 1]):
            continue
        if below(n, y):
            val = 1 / masses[n] - 1 / masses[n + 1]
        else:
            val = -1 / masses[n + 1]
        total += val / sig.S(t.levels[x] + n)
    return total


def test_spot_values():
    t, m, sig = canonical(2, 1, 3, 2)
    ev = KernelEvaluator(m, sig)
    a, b = t.by_level[0][:2]
    assert t.parent[a] == t.parent[b]
    assert ev.kernel(a, a) == Fraction(1, 3)
    assert ev.kernel(a, b) == Fraction(-1, 6)
    assert ev.kernel(a, t.parent[a]) == Fraction(1, 12)
    assert ev.certified_error == 0


@pytest.mark.parametrize("q,k", [(2, 2), (3, 3), (2, 3)])
def test_closed_form_matches_series(q, k):
    t, m, sig = canonical(q, 1, 3, k)
    ev = KernelEvaluator(m, sig)
    eps = Fraction(1, 10 ** 20)
    for x in range(0, t.n, 3):
        for y in range(t.n):
            assert abs(ev.kernel(x, y) - series_oracle(m, sig, x, y)) < eps


def test_random_flow_matches_series():
    t = build_tree(TreeGenSpec("random", 0, -3, min_deg=2, max_deg=3, seed=3))
    m = random_flow(t, 1)
    sig = LevelWeight.exponential(3)
    ev = KernelEvaluator(m, sig)
    for x in range(t.n):
        for y in range(0, t.n, 2):
            assert abs(ev.kernel(x, y) - series_oracle(m, sig, x, y)) < Fraction(1, 10 ** 15)


def test_truncated_chain_certificate():
    t, m, _ = canonical(2, 0, 2, 2)
    tab = LevelWeight.tabulated({0: 1, 1: 2}, lower_ratio=Fraction(1, 2), upper_ratio=2)
    ev = KernelEvaluator(m, tab)
    exact = KernelEvaluator(m, LevelWeight.exponential(2))
    assert ev.certified_error > 0
    for x in range(t.n):
        assert abs(ev.kernel(x, 0) - exact.kernel(x, 0)) <= ev.certified_error


def test_termwise_within_bound():
    t, m, sig = canonical(2, 0, 3, 2)
    ev = KernelEvaluator(m, sig)
    for x, y in [(0, 0), (1, 5), (3, 4), (7, 14)]:
        partial, bound = ev.kernel_termwise(x, y, 40)
        assert abs(partial - ev.kernel(x, y)) <= bound


def test_psi_examples():
    t, m, _ = canonical(2, 1, 2, 2)
    v = t.apex
    z, s = t.children[v]
    x = t.children[z][0]
    assert m.values[v] == 2 and m.values[z] == 1
    assert psi(t, m, v, z, x) == Fraction(1, 2)
    assert psi(t, m, v, z, t.children[s][0]) == Fraction(-1, 2)
    assert psi(t, m, z, x, s) == 0


def test_psi_pairing_example(q2, example_harmonic):
    t, m, sig = q2
    x = t.by_level[-1][0]
    lhs, rhs = psi_pairing(example_harmonic, x, sig)
    assert lhs == rhs == sig.S(-1) * (Fraction(1, 2) - Fraction(1, 4))
    scaled = make_harmonic(m, {w: 3 * example_harmonic.values[w] for w in t.leaves})
    assert psi_pairing(scaled, x, sig) == (3 * lhs, 3 * rhs)


def test_psi_pairing_constant(q2):
    t, m, sig = q2
    f = make_harmonic(m, {w: 5 for w in t.leaves})
    assert psi_pairing(f, t.by_level[-2][0], sig) == (0, 0)


def test_psi_orthogonality_and_norm():
    t, m, sig = canonical(2, 0, 3, 2)
    v = t.leaves[0]
    for j in range(8):
        own = inner(psi_function(m, v, j), psi_function(m, v, j), m, sig)
        assert own == psi_norm_closed(m, sig, v, j)
        for k in range(j):
            assert psi_orthogonality(m, sig, v, j, k) == 0
    w = t.leaves[-1]
    assert [psi_norm_closed(m, sig, w, j) for j in range(5)] == [psi_norm_closed(m, sig, v, j) for j in range(5)]


def test_project_examples():
    t, m, sig = canonical(2, 1, 3, 2)
    ev = KernelEvaluator(m, sig)
    z = t.by_level[-1][1]
    out = project(ev, {z: 1})
    for x in range(t.n):
        assert out[x] == ev.kernel(x, z) * m.values[z] * sig.sigma(-1)
    assert set(project(ev, {})) == {0}
    x = t.by_level[0][0]
    assert project(ev, {x: 1}, x) == Fraction(1, 3)


def test_reproduce_examples():
    t, m, sig = canonical(2, 0, 4, 2)
    ev = KernelEvaluator(m, sig)
    zero = make_harmonic(m, {w: 0 for w in t.leaves})
    assert reproduce(ev, zero, 3) == (0, 0)
    ones = make_harmonic(m, {w: 1 for w in t.leaves})
    assert all(reproduce(ev, ones, v) == (1, 1) for v in range(t.n))
    f, g = random_harmonic(m, 1), random_harmonic(m, 2)
    h = make_harmonic(m, {w: 2 * f.values[w] - 3 * g.values[w] for w in t.leaves})
    for v in range(0, t.n, 4):
        rf, rg, rh = reproduce(ev, f, v), reproduce(ev, g, v), reproduce(ev, h, v)
        assert rh == tuple(2 * a - 3 * b for a, b in zip(rf, rg))
        assert rf[0] == rf[1]


def test_hormander():
    t, m, sig = canonical(2, 0, 4, 2)
    ev = KernelEvaluator(m, sig)
    u = t.by_level[-2][1]
    assert hormander_check(ev, u, u, u)
    members = list(t.sector(u))
    assert hormander_check(ev, u, members[0], members[-1])
    with pytest.raises(PreconditionError):
        hormander_check(ev, u, 0, u)


@pytest.mark.parametrize("q,k", [(2, 2), (3, 3)])
def test_size_condition(q, k):
    t, m, sig = canonical(q, 0, 3, k)
    ev = KernelEvaluator(m, sig)
    for u in range(t.n):
        val = size_condition(ev, u)
        assert val <= 3
        for x in t.sector(u):
            assert size_condition(ev, u, x) == val
            assert size_condition_direct(ev, u, x) == val


def test_selfadjoint_examples():
    t, m, sig = canonical(2, 0, 3, 2)
    ev = KernelEvaluator(m, sig)
    mu = [m.values[x] * sig.sigma(t.levels[x]) for x in range(t.n)]
    z = 5
    assert selfadjoint_check(ev, {z: 1}, {z: 1}) == (ev.kernel(z, z) * mu[z] ** 2,) * 2
    x, y = 2, 12
    expected = ev.kernel(x, y) * mu[x] * mu[y]
    assert selfadjoint_check(ev, {x: 1}, {y: 1}) == (expected, expected)


def test_kernel_sections_are_harmonic():
    t, m, sig = canonical(3, 0, 3, 2)
    ev = KernelEvaluator(m, sig)
    for v in range(t.n):
        assert set(section_laplacian(ev, v)) == {0}
    pf = projection_function(ev, {4: 1, 9: -2})
    for x in t.internal:
        assert laplacian(pf, x, m) == 0


def test_rooted():
    t, m, _ = canonical(2, 0, 5, 4)
    sig = LevelWeight.exponential(4)
    # sum over levels of 2**n vertices of mass 2**-n and weight 4**-n
    brute = sum(Fraction(1, 4) ** n for n in range(200))
    assert abs(1 / rooted_constant(m, sig) - brute) < Fraction(1, 10 ** 100)
    assert rooted_constant(m, sig) == Fraction(3, 4)
    ev = KernelEvaluator(m, sig, rooted=True)
    assert ev.kernel(0, 0) == Fraction(3, 4)
    for x in range(0, t.n, 5):
        for y in range(0, t.n, 3):
            assert ev.kernel(x, y) == kernel_rooted(m, sig, x, y) == kernel_rooted(m, sig, y, x)
    f = make_harmonic(m, {w: i % 3 for i, w in enumerate(t.leaves)})
    lhs, rhs = reproduce(ev, f)
    assert lhs == rhs
