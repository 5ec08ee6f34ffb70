"""The forward Laplacian and globally harmonic functions generated from leaf data.

A harmonic function is built from its values on the bottom level: upward
averaging fixes the window, each leaf's value is continued as a constant on
the sector below it, every ancestor of the apex gets the value 0, and the
sibling block ``O_1`` under ``p(apex)`` carries the constant ``c0`` that
restores harmonicity at ``p(apex)``.  The result is harmonic on the entire
tree and its tails are finitely described.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Mapping

from .errors import AssumptionViolation, ConfigurationError, PreconditionError
from .functions import TreeFunction
from .measure import FlowMeasure
from .scalars import EXACT, parse_scalar
from .tree import SplitMix64


@dataclass(frozen=True)
class HarmonicFunction:
    measure: FlowMeasure
    values: tuple
    c0: object

    def __call__(self, x: int):
        return self.values[x]

    @property
    def tree(self):
        return self.measure.tree

    def as_tree_function(self) -> TreeFunction:
        t = self.tree
        return TreeFunction(self.values, {w: self.values[w] for w in t.leaves}, {}, {1: self.c0})

    def extended(self, n: int):
        """Value at ``p^n(apex)``; zero for every ``n >= 1``."""
        return self.values[0] if n == 0 else 0 * self.c0

    def to_dict(self) -> dict:
        from .scalars import to_json_scalar
        return {"values": {str(x): to_json_scalar(v) for x, v in enumerate(self.values)},
                "c0": to_json_scalar(self.c0)}

    @classmethod
    def from_dict(cls, data: Mapping, m: FlowMeasure) -> "HarmonicFunction":
        vals = data["values"]
        values = tuple(parse_scalar(vals[str(x)], m.mode) for x in range(m.tree.n))
        f = cls(m, values, parse_scalar(data["c0"], m.mode))
        for x in m.tree.internal:
            if laplacian(f, x, m) != 0 and m.exact:
                raise ConfigurationError(f"function is not harmonic at {x}")
        return f


def _value(f, x):
    if callable(f):
        return f(x)
    return f[x]


def laplacian(f, x: int, m: FlowMeasure):
    """``f(x) - sum_{y in s(x)} f(y) m(y)/m(x)``.

    At a leaf the successors lie below the window, so ``f`` must carry a
    sector model there (a :class:`HarmonicFunction`, or a :class:`TreeFunction`
    with a tail constant on that leaf).
    """
    t = m.tree
    kids = t.children[x]
    if not kids:
        if isinstance(f, HarmonicFunction):
            return f.values[x] - f.values[x]
        if isinstance(f, TreeFunction) and x in f.tail:
            return f.values[x] - f.tail[x]
        raise PreconditionError(f"Laplacian undefined at leaf {x} without a sector model")
    mx = m.values[x]
    acc = _value(f, x) * mx
    for y in kids:
        acc -= _value(f, y) * m.values[y]
    return acc / mx


def make_harmonic(m: FlowMeasure, bottom_values: Mapping[int, object]) -> HarmonicFunction:
    """The harmonic function with the given values on the leaves."""
    t = m.tree
    missing = [w for w in t.leaves if w not in bottom_values]
    if missing:
        raise ConfigurationError(f"missing leaf values for {missing[:5]}")
    vals = [None] * t.n
    for w in t.leaves:
        vals[w] = parse_scalar(bottom_values[w], m.mode)
    # children have larger ids than parents, so a reverse sweep is bottom-up
    for x in reversed(t.internal):
        acc = 0 * m.values[x]
        for y in t.children[x]:
            acc += vals[y] * m.values[y]
        vals[x] = acc / m.values[x]
    m0, m1 = m.m0, m.chain_mass(1)
    if not m1 > m0:
        raise AssumptionViolation("upward extension needs m(p(apex)) > m(apex)")
    c0 = -vals[0] * m0 / (m1 - m0)
    return HarmonicFunction(m, tuple(vals), c0)


def random_harmonic(m: FlowMeasure, seed: int, lo: int = -5, hi: int = 5) -> HarmonicFunction:
    """Harmonic function with integer leaf data drawn uniformly from ``[lo, hi]``."""
    rng = SplitMix64(seed)
    return make_harmonic(m, {w: rng.randint(lo, hi) for w in m.tree.leaves})


def flow_invariance_check(f: HarmonicFunction, x: int, n: int):
    """``(sum_{y in s_n(x)} f(y) m(y), f(x) m(x))``."""
    m = f.measure
    t = m.tree
    if n < 0 or n > t.levels[x] - t.bot:
        raise PreconditionError(f"s_{n}({x}) leaves the window")
    lhs = 0 * m.m0
    for y in t.descendants_at_depth(x, n):
        lhs += f.values[y] * m.values[y]
    return lhs, f.values[x] * m.values[x]


def gradient(f, x: int, m: FlowMeasure | None = None):
    """``f(x) - f(p(x))``; at the apex the upward extension supplies ``f(p(apex)) = 0``."""
    if isinstance(f, HarmonicFunction):
        t = f.tree
        par = t.parent[x]
        return f.values[x] - (f.values[par] if par >= 0 else f.extended(1))
    if m is None:
        raise PreconditionError("a measure (for the tree) is needed for plain functions")
    par = m.tree.parent[x]
    if par < 0:
        raise PreconditionError("gradient at the apex needs an upward extension")
    return _value(f, x) - _value(f, par)


def triviality_partial_sums(f, x: int, p, sigma_tilde: Callable[[int], object],
                            m: FlowMeasure) -> Iterator:
    """Yields ``|f(x)|^p m(x) sum_{n=0}^{N} sigma_tilde(level(x) - n)`` for ``N = 0, 1, ...``."""
    fx = _value(f, x)
    if fx == 0:
        raise PreconditionError("the lower bound is vacuous when f(x) = 0")
    lead = abs(fx) ** p * m.values[x]
    lv = m.tree.levels[x]
    acc = 0 * lead
    n = 0
    while True:
        acc += sigma_tilde(lv - n)
        yield lead * acc
        n += 1


def triviality_lowerbound(f, x: int, p, sigma_tilde: Callable[[int], object], N: int,
                          m: FlowMeasure | None = None) -> list:
    """The partial lower bounds for ``N' = 0..N``."""
    if m is None:
        m = f.measure
    gen = triviality_partial_sums(f, x, p, sigma_tilde, m)
    return [next(gen) for _ in range(N + 1)]


def first_exceeding(f, x: int, p, sigma_tilde, threshold, max_n: int,
                    m: FlowMeasure | None = None) -> int | None:
    """Smallest ``N <= max_n`` whose partial lower bound exceeds ``threshold``."""
    if m is None:
        m = f.measure
    for n, s in enumerate(triviality_partial_sums(f, x, p, sigma_tilde, m)):
        if s > threshold:
            return n
        if n >= max_n:
            return None
