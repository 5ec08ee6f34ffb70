"""Functions on the whole tree with finitely describable tails.

A :class:`TreeFunction` is given by

* ``values``: one value per window vertex;
* ``tail``: for some leaves ``w`` a constant taken on the strict sector below
  ``w`` (missing leaves mean zero there);
* ``chain``: values at ``p^n(apex)`` for ``n >= 1``;
* ``blocks``: constants on ``O_n``, the part of the strict sector below
  ``p^n(apex)`` not containing the apex's own sector (``n >= 1``).

Every region is a level set of the representation, so products, powers and
integrals against ``m * sigma`` act region by region with closed-form masses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

from .errors import UnsupportedFunction


@dataclass(frozen=True)
class TreeFunction:
    values: tuple
    tail: Mapping[int, object] = field(default_factory=dict)
    chain: Mapping[int, object] = field(default_factory=dict)
    blocks: Mapping[int, object] = field(default_factory=dict)

    @classmethod
    def finite(cls, n: int, support: Mapping[int, object], zero=0) -> "TreeFunction":
        vals = [zero] * n
        for x, v in support.items():
            vals[x] = v
        return cls(tuple(vals))

    def __call__(self, x: int):
        return self.values[x]

    def map(self, fn: Callable) -> "TreeFunction":
        return TreeFunction(tuple(fn(v) for v in self.values),
                            {k: fn(v) for k, v in self.tail.items()},
                            {k: fn(v) for k, v in self.chain.items()},
                            {k: fn(v) for k, v in self.blocks.items()})

    def __mul__(self, other: "TreeFunction") -> "TreeFunction":
        def both(a, b):
            return {k: a[k] * b[k] for k in a.keys() & b.keys()}
        return TreeFunction(tuple(u * v for u, v in zip(self.values, other.values)),
                            both(self.tail, other.tail), both(self.chain, other.chain),
                            both(self.blocks, other.blocks))

    def __add__(self, other: "TreeFunction") -> "TreeFunction":
        def union(a, b):
            return {k: a.get(k, 0) + b.get(k, 0) for k in a.keys() | b.keys()}
        return TreeFunction(tuple(u + v for u, v in zip(self.values, other.values)),
                            union(self.tail, other.tail), union(self.chain, other.chain),
                            union(self.blocks, other.blocks))

    def scale(self, c) -> "TreeFunction":
        return self.map(lambda v: c * v)


def as_tree_function(f, n: int) -> TreeFunction:
    if isinstance(f, TreeFunction):
        return f
    if hasattr(f, "as_tree_function"):
        return f.as_tree_function()
    if isinstance(f, Mapping):
        return TreeFunction.finite(n, f)
    if isinstance(f, (list, tuple)) and len(f) == n:
        return TreeFunction(tuple(f))
    raise UnsupportedFunction(f"cannot represent {type(f).__name__} with finite tails")


def integrate(f, m, sigma) -> object:
    """``sum_x f(x) m(x) sigma(level(x))`` over the whole tree."""
    t = m.tree
    f = as_tree_function(f, t.n)
    levels = t.levels
    total = 0 * m.m0
    for x, v in enumerate(f.values):
        if v:
            total += v * m.values[x] * sigma.sigma(levels[x])
    for w, v in f.tail.items():
        if v:
            if t.children[w]:
                raise UnsupportedFunction(f"tail constant attached to internal vertex {w}")
            total += v * m.values[w] * sigma.S(levels[w] - 1)
    for n, v in f.chain.items():
        if v:
            total += v * m.chain_mass(n) * sigma.sigma(t.top + n)
    for n, v in f.blocks.items():
        if v:
            total += v * (m.chain_mass(n) - m.chain_mass(n - 1)) * sigma.S(t.top + n - 1)
    return total


def inner(f, g, m, sigma):
    """``<f, g>`` in ``L^2(m.sigma)`` (real-valued functions)."""
    n = m.tree.n
    return integrate(as_tree_function(f, n) * as_tree_function(g, n), m, sigma)


def lp_norm_p(f, p, m, sigma):
    """``||f||_p ** p``; exact whenever ``p`` is an integer and ``f`` is rational."""
    f = as_tree_function(f, m.tree.n)
    if p == int(p):
        pw = int(p)
        return integrate(f.map(lambda v: abs(v) ** pw), m, sigma)
    return integrate(f.map(lambda v: abs(float(v)) ** p), m, sigma)


def lp_norm(f, p, m, sigma):
    """``||f||_{L^p(m.sigma)}`` over the full tree."""
    if p < 1:
        raise ValueError("p must be >= 1")
    s = lp_norm_p(f, p, m, sigma)
    if p == 1:
        return s
    return float(s) ** (1.0 / p)
