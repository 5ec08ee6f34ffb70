"""Property-based checks of the structural identities on random windows."""

import math
from fractions import Fraction

from hypothesis import assume, given, strategies as st

from flowberg.harmonic import flow_invariance_check, laplacian, make_harmonic
from flowberg.kernel import KernelEvaluator, psi_orthogonality, psi_pairing, reproduce, section_laplacian
from flowberg.measure import LevelWeight, canonical_flow, doubling_constants, random_flow, sector_mass
from flowberg.toeplitz import (GrowthData, ToeplitzParams, apply_U, apply_V, necessary_conditions,
                               sufficient_conditions)
from flowberg.tree import TreeGenSpec, build_tree, homogeneous, level_population

small_int = st.integers(-5, 5)


@st.composite
def trees(draw, max_depth=3):
    top = draw(st.integers(-2, 2))
    depth = draw(st.integers(1, max_depth))
    lo = draw(st.integers(2, 3))
    hi = draw(st.integers(lo, 3))
    seed = draw(st.integers(0, 2 ** 32))
    return build_tree(TreeGenSpec("random", top, top - depth, min_deg=lo, max_deg=hi, seed=seed))


@st.composite
def measures(draw, max_depth=3):
    t = draw(trees(max_depth))
    return random_flow(t, draw(st.integers(0, 2 ** 32)))


weights = st.sampled_from([2, 3, Fraction(3, 2), 4]).map(LevelWeight.exponential)


@st.composite
def harmonics(draw, m):
    data = {w: draw(small_int) for w in m.tree.leaves}
    return make_harmonic(m, data)


# -- tree -----------------------------------------------------------------


@given(trees(), st.data())
def test_confluent_level(t, data):
    x = data.draw(st.integers(0, t.n - 1))
    y = data.draw(st.integers(0, t.n - 1))
    w = t.confluent(x, y)
    assert t.levels[w] >= max(t.levels[x], t.levels[y])
    above = t.in_sector(x, y) or t.in_sector(y, x)
    assert (t.levels[w] == max(t.levels[x], t.levels[y])) == above


@given(trees())
def test_sector_sizes_and_levels(t):
    for x in range(t.n):
        assert t.size[x] == 1 + sum(t.size[c] for c in t.children[x])
    assert sum(level_population(t).values()) == t.n


# -- measure ----------------------------------------------------------------


@given(measures())
def test_flow_telescopes(m):
    t = m.tree
    for x in range(t.n):
        for n in range(t.levels[x] - t.bot + 1):
            assert sum(m.values[y] for y in t.descendants_at_depth(x, n)) == m.values[x]


@given(measures(), weights)
def test_sector_mass_recursion(m, sig):
    t = m.tree
    for x in t.internal:
        rhs = m.values[x] * sig.sigma(t.levels[x]) + sum(sector_mass(c, m, sig) for c in t.children[x])
        assert sector_mass(x, m, sig) == rhs


@given(weights, st.integers(-20, 20))
def test_weight_sum_increments(sig, n):
    assert sig.S(n) - sig.S(n - 1) == sig.sigma(n)


@given(st.integers(2, 5), st.integers(1, 4))
def test_homogeneous_doubling(q, depth):
    dc = doubling_constants(canonical_flow(homogeneous(q, 0, depth)))
    assert (dc.C_m, dc.D_m) == (q, Fraction(1, q))


# -- harmonic ------------------------------------------------------------------


@given(measures(), st.data())
def test_harmonic_and_linear(m, data):
    t = m.tree
    f = data.draw(harmonics(m))
    g = data.draw(harmonics(m))
    a, b = data.draw(small_int), data.draw(small_int)
    h = make_harmonic(m, {w: a * f.values[w] + b * g.values[w] for w in t.leaves})
    for x in range(t.n):
        assert h.values[x] == a * f.values[x] + b * g.values[x]
    assert h.c0 == a * f.c0 + b * g.c0
    for x in t.internal:
        assert laplacian(f, x, m) == 0
        for n in range(t.levels[x] - t.bot + 1):
            lhs, rhs = flow_invariance_check(f, x, n)
            assert lhs == rhs


# -- kernel --------------------------------------------------------------------


@given(measures(), weights)
def test_kernel_symmetry_and_classes(m, sig):
    ev = KernelEvaluator(m, sig)
    t = m.tree
    seen = {}
    for x in range(t.n):
        row = ev.kernel_row(x)
        for y in range(t.n):
            assert row[y] == ev.kernel(y, x)
            w = t.confluent(x, y)
            key = (w, w in (x, y))
            assert seen.setdefault(key, row[y]) == row[y]


@given(measures(max_depth=2), weights)
def test_kernel_sections_harmonic(m, sig):
    ev = KernelEvaluator(m, sig)
    for v in range(m.tree.n):
        assert all(val == 0 for val in section_laplacian(ev, v))


@given(measures(), weights, st.data())
def test_pairing_and_reproducing(m, sig, data):
    f = data.draw(harmonics(m))
    ev = KernelEvaluator(m, sig)
    lhs, rhs = reproduce(ev, f)
    assert lhs == list(rhs)
    for x in range(1, m.tree.n):
        a, b = psi_pairing(f, x, sig)
        assert a == b


@given(measures(max_depth=2), weights, st.integers(0, 6), st.integers(0, 6))
def test_psi_orthogonal(m, sig, j, k):
    assume(j != k)
    assert psi_orthogonality(m, sig, m.tree.leaves[-1], j, k) == 0


@given(st.integers(2, 3), st.sampled_from([2.0, 3.0, 1.5]), st.integers(1, 6))
def test_float_tail_certificate(q, k, N):
    """Truncated chain sums stay within the telescoping bound of the closed form."""
    t = homogeneous(q, 0, 2)
    m = canonical_flow(t, "float")
    ev = KernelEvaluator(m, LevelWeight.exponential(k, "float"))
    partial, bound = ev.kernel_termwise(0, 0, N)
    assert abs(partial - ev.kernel(0, 0)) <= bound * (1 + 1e-12)


# -- toeplitz ------------------------------------------------------------------

exps = st.integers(-1, 3)


@given(st.integers(2, 4), exps, exps, st.integers(-2, 5), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_nec_ii_equals_suf_2_under_ratio_condition(q, a, b, d, p):
    c = a + b
    assume(c > 1)
    pr = ToeplitzParams.from_exponents(q, a, b, c, d, p)
    g = GrowthData(float(q), float(q))
    _, nii = necessary_conditions(pr, float(q), 1 / q, g)
    _, s2 = sufficient_conditions(pr, float(q), 1 / q, g)
    # for p = 1 condition 2) is stated for k_a k_d rather than k_d
    scale = pr.k_a if p == 1 else 1.0
    assert math.isclose(nii.lhs, s2.lhs / scale, rel_tol=1e-12)
    assert math.isclose(nii.rhs, s2.rhs / scale, rel_tol=1e-12)
    assert nii.holds == s2.holds


@given(st.data())
def test_apply_linear_and_monotone(data):
    t = homogeneous(2, 1, 3)
    m = canonical_flow(t)
    ev = KernelEvaluator(m, LevelWeight.exponential(4))
    pr = ToeplitzParams.from_exponents(2, data.draw(exps), data.draw(exps), 3, data.draw(exps), 2)
    idx = st.integers(0, t.n - 1)
    f = data.draw(st.dictionaries(idx, small_int, max_size=4))
    g = data.draw(st.dictionaries(idx, small_int, max_size=4))
    fg = {y: f.get(y, 0) + g.get(y, 0) for y in set(f) | set(g)}
    uf, ug, ufg = apply_U(pr, ev, f), apply_U(pr, ev, g), apply_U(pr, ev, fg)
    assert ufg == [a + b for a, b in zip(uf, ug)]
    lo = {y: abs(v) for y, v in f.items()}
    hi = {y: v + abs(g.get(y, 0)) for y, v in lo.items()}
    assert all(a <= b for a, b in zip(apply_V(pr, ev, lo), apply_V(pr, ev, hi)))
