from fractions import Fraction

import pytest

from flowberg.errors import UnsupportedFunction
from flowberg.functions import TreeFunction, as_tree_function, inner, integrate, lp_norm, lp_norm_p

from conftest import canonical


def brute_integral(t, m, sig, f, depth_below=40, chain_levels=40):
    """Sum f m sigma level by level: window, then leaf sectors and chain/blocks out to finite depth."""
    total = sum(f.values[x] * m.values[x] * sig.sigma(t.levels[x]) for x in range(t.n))
    for w, c in f.tail.items():
        # equal split below a leaf: level l-j carries mass m(w) in total
        total += sum(c * m.values[w] * sig.sigma(t.levels[w] - j) for j in range(1, depth_below))
    for n, c in f.chain.items():
        total += c * m.chain_mass(n) * sig.sigma(t.top + n)
    for n, c in f.blocks.items():
        block = m.chain_mass(n) - m.chain_mass(n - 1)
        total += sum(c * block * sig.sigma(t.top + n - j) for j in range(1, chain_levels))
    return total


def test_integrate_matches_brute():
    t, m, sig = canonical(2, 1, 3, 2)
    f = TreeFunction(tuple(Fraction(x % 4 - 1) for x in range(t.n)),
                     {w: Fraction(1, 2) for w in t.leaves[::2]}, {1: 3, 2: -1}, {1: 2, 3: 1})
    exact = integrate(f, m, sig)
    assert abs(exact - brute_integral(t, m, sig, f)) < Fraction(1, 10 ** 9)


def test_finite_and_dict_inputs_agree():
    t, m, sig = canonical(2, 0, 2, 2)
    d = {1: 2, 4: Fraction(-1, 3)}
    f = as_tree_function(d, t.n)
    assert integrate(d, m, sig) == integrate(f, m, sig)
    assert f == TreeFunction.finite(t.n, d)


def test_inner_symmetric_and_bilinear():
    t, m, sig = canonical(2, 0, 2, 2)
    f = {0: 1, 3: 2}
    g = {3: 5, 6: -1}
    assert inner(f, g, m, sig) == inner(g, f, m, sig) == 10 * m.values[3] * sig.sigma(-2)


def test_lp_norm_integer_p_exact():
    t, m, sig = canonical(2, 0, 2, 2)
    f = {2: 3}
    mu = m.values[2] * sig.sigma(-2)
    assert lp_norm_p(f, 2, m, sig) == 9 * mu
    assert lp_norm(f, 3, m, sig) == pytest.approx(float(27 * mu) ** (1 / 3))


def test_algebra():
    a = TreeFunction((1, 2), {1: 3})
    b = TreeFunction((2, 0), {1: 1, 0: 4})
    assert (a + b).values == (3, 2) and dict((a + b).tail) == {1: 4, 0: 4}
    assert (a * b).values == (2, 0) and dict((a * b).tail) == {1: 3}
    assert a.scale(2).tail[1] == 6
