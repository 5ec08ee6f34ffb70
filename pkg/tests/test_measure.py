from fractions import Fraction

import pytest

from flowberg.errors import AssumptionViolation, CannotCertify, ConfigurationError
from flowberg.functions import TreeFunction
from flowberg.measure import (AmbientChain, FlowMeasure, LevelWeight, assumption_ii_check, canonical_flow,
                              carleson_check, chain_block_mass, doubling_constants, lemexp2_ratio, lp_norm,
                              random_flow, sector_mass, validate_flow, weight_sum)
from flowberg.tree import TreeGenSpec, build_tree, homogeneous

from conftest import canonical


def geometric_oracle(k, top, terms=200):
    """Brute partial sum of k**j for j <= top; the remainder is below k**(top-terms)."""
    return sum(Fraction(k) ** j for j in range(top - terms, top + 1))


def test_canonical_levels():
    t = homogeneous(2, 2, 4)
    m = canonical_flow(t)
    for x in range(t.n):
        assert m.values[x] == Fraction(2) ** t.levels[x]
    for x in t.internal:
        assert sum(m.values[c] for c in t.children[x]) == m.values[x]


def test_canonical_normalises_outside_level_zero():
    t = homogeneous(3, -2, 2)
    m = canonical_flow(t)
    assert m.values[t.apex] == Fraction(1, 9)
    t = homogeneous(2, 5, 2)
    assert canonical_flow(t).values[t.apex] == 32


def test_random_flow_valid_and_deterministic():
    t = build_tree(TreeGenSpec("random", 0, -4, min_deg=2, max_deg=3, seed=5))
    a = random_flow(t, 9)
    b = random_flow(t, 9)
    assert a.values == b.values
    validate_flow(a)
    lo, hi = Fraction(1, 4), Fraction(3, 4)
    for x in t.internal:
        for c in t.children[x]:
            assert lo <= a.values[c] / a.values[x] <= hi


def test_random_flow_equal_split_is_canonical():
    t = homogeneous(2, 0, 4)
    m = random_flow(t, 1, (Fraction(1, 2), Fraction(1, 2)), chain_ratio=2)
    assert m.values == canonical_flow(t).values


def test_validate_flow_rejects_broken_mass():
    t = homogeneous(2, 0, 1)
    with pytest.raises(ConfigurationError):
        FlowMeasure(t, (Fraction(1), Fraction(1, 2), Fraction(1, 3)), AmbientChain.geometric(2))


def test_weight_sum_examples():
    t = homogeneous(2, 1, 1)
    x0 = t.by_level[0][0]
    assert weight_sum(0, x0, LevelWeight.exponential(2), t) == 2
    assert weight_sum(0, t.apex, LevelWeight.exponential(3), t) == Fraction(9, 2)
    for k in (2, 3, Fraction(5, 2)):
        for top in (-3, 0, 4):
            exact = LevelWeight.exponential(k).S(top)
            assert 0 <= exact - geometric_oracle(k, top) < Fraction(k) ** (top - 199)


def test_weight_sum_monotone():
    sig = LevelWeight.exponential(3)
    t = homogeneous(2, 0, 2)
    vals = [weight_sum(n, t.leaves[0], sig, t) for n in range(6)]
    assert vals == sorted(vals)


def test_sector_mass_examples():
    t, m, sig = canonical(2, 1, 2, 2)
    x0 = t.by_level[0][0]
    assert sector_mass(x0, m, sig) == 2
    assert sector_mass(t.apex, m, sig) == 8
    assert sector_mass(x0, m, sig, strict=True) == 1


def test_chain_block_mass():
    t, m, sig = canonical(2, 0, 2, 2)
    # O_1 sits on levels <= 0 below c_1: (m_1 - m_0) S(0)
    assert chain_block_mass(m, sig, 1) == (2 - 1) * 2
    assert chain_block_mass(m, sig, 2) == (4 - 2) * 4


@pytest.mark.parametrize("q", [2, 3])
def test_doubling_homogeneous(q):
    _, m, _ = canonical(q, 0, 3)
    dc = doubling_constants(m)
    assert dc.C_m == q and dc.D_m == Fraction(1, q)


def test_doubling_random_below_one():
    t = build_tree(TreeGenSpec("random", 0, -3, min_deg=2, max_deg=4, seed=2))
    assert doubling_constants(random_flow(t, 4)).D_m < 1


def test_assumption_ii_example():
    _, m, sig = canonical(2, 0, 2, 2)
    res = assumption_ii_check(sig, m)
    assert res.converges
    assert res.total == Fraction(4, 3)


def test_constant_weight_rejected():
    with pytest.raises(AssumptionViolation):
        LevelWeight.exponential(1)
    with pytest.raises(AssumptionViolation):
        LevelWeight.tabulated([1, 1], lower_ratio=1, upper_ratio=1)


def test_lp_norm_examples():
    t, m, sig = canonical(2, 0, 2, 2)
    z = t.by_level[-1][0]
    d = {z: Fraction(1)}
    assert lp_norm(d, 1, m, sig) == m.values[z] * sig.sigma(-1)
    assert lp_norm(d, 2, m, sig) ** 2 == pytest.approx(float(m.values[z] * sig.sigma(-1)))
    assert lp_norm({}, 2, m, sig) == 0
    t0, m0, sig0 = canonical(2, 0, 0, 2)
    c = Fraction(-3)
    f = TreeFunction((c,), {t0.apex: c})
    assert lp_norm(f, 1, m0, sig0) == 2 * abs(c)


@pytest.mark.parametrize("k,expected", [(2, 2), (4, Fraction(4, 3)), (3, Fraction(3, 2))])
def test_lemexp2_p1(k, expected):
    t, m, _ = canonical(2, 0, 3, k)
    for y in range(t.n):
        assert lemexp2_ratio(m, y, k, 1).ratio == expected


def test_lemexp2_ratio_at_least_one():
    t, m, _ = canonical(2, 0, 3, 2)
    for y in range(t.n):
        assert lemexp2_ratio(m, y, Fraction(3, 2), 2).ratio >= 1


def test_carleson():
    assert not carleson_check(LevelWeight.exponential(2))
    finite = LevelWeight.tabulated([1, 2, 1], start=-1, lower_ratio=0, upper_ratio=0)
    assert carleson_check(finite)
    two_sided = LevelWeight.tabulated({0: 1}, lower_ratio=Fraction(1, 2), upper_ratio=Fraction(1, 2))
    assert carleson_check(two_sided)
    assert two_sided.total() == 3
    with pytest.raises(CannotCertify):
        carleson_check(LevelWeight.tabulated([1], lower_ratio=Fraction(1, 2)))


def test_tabulated_matches_exponential():
    e = LevelWeight.exponential(2)
    tab = LevelWeight.tabulated({-1: Fraction(1, 2), 0: 1, 1: 2}, lower_ratio=Fraction(1, 2), upper_ratio=2)
    for n in range(-6, 6):
        assert tab.sigma(n) == e.sigma(n)
        assert tab.S(n) == e.S(n)


def test_weight_json_round_trip():
    tab = LevelWeight.tabulated([3, 1], start=2, lower_ratio=Fraction(1, 3), upper_ratio=None)
    assert LevelWeight.from_dict(tab.to_dict()) == tab
    with pytest.raises(ConfigurationError):
        LevelWeight.from_dict({"kind": "nope"})


def test_float_mode_agrees():
    t = homogeneous(2, 0, 3)
    ex = canonical_flow(t, "exact")
    fl = canonical_flow(t, "float")
    assert [float(v) for v in ex.values] == list(fl.values)
