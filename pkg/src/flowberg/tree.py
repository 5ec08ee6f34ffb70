"""Finite windows onto trees with a root at infinity.

A :class:`TruncatedTree` holds the vertices of a tree whose levels lie in
``[bot, top]``.  The apex is the unique vertex at level ``top``; every leaf
sits at level ``bot``.  Everything below a leaf and above the apex is modelled
analytically elsewhere (see :mod:`flowberg.measure`), never enumerated.

Vertex ids are dense and assigned in depth-first preorder with children in
ascending id order, so the sector below ``x`` is the contiguous id range
``range(x, x + size[x])``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError

MODES = ("general", "section3")
KINDS = ("homogeneous", "radial", "random")


class SplitMix64:
    """64-bit SplitMix generator (Steele, Lea & Flood), used for every seeded draw.

    The stream is fully specified by the seed so that trees and measures can be
    regenerated bit-for-bit by any implementation of the same recurrence.
    """

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def randint(self, lo: int, hi: int) -> int:
        """Integer in ``[lo, hi]`` by multiply-shift (bias below 2**-40 for small spans)."""
        span = hi - lo + 1
        return lo + ((self.next_u64() * span) >> 64)

    def unit_dyadic(self, bits: int = 32) -> int:
        """Top ``bits`` bits of the next draw, i.e. a numerator over ``2**bits``."""
        return self.next_u64() >> (64 - bits)


@dataclass(frozen=True)
class TreeGenSpec:
    """Recipe for a truncated tree.

    ``kind`` is one of ``homogeneous`` (every internal vertex has ``q``
    children), ``radial`` (``branching[i]`` children for vertices at level
    ``top - i``) or ``random`` (child counts uniform in ``[min_deg, max_deg]``
    drawn from a SplitMix64 stream in preorder).
    """

    kind: str
    top: int
    bot: int
    q: int | None = None
    branching: tuple[int, ...] | None = None
    below_q: int | None = None
    min_deg: int | None = None
    max_deg: int | None = None
    seed: int | None = None
    mode: str = "section3"

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown tree kind {self.kind!r}")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.top < self.bot:
            raise ConfigurationError("top level must not lie below bottom level")
        lowest = 2 if self.mode == "section3" else 1
        if self.kind == "homogeneous":
            if self.q is None or self.q < lowest:
                raise ConfigurationError(f"homogeneous trees need q >= {lowest}")
        elif self.kind == "radial":
            if self.branching is None or len(self.branching) != self.top - self.bot:
                raise ConfigurationError("radial trees need one branching number per internal level")
            if min(self.branching, default=lowest) < lowest:
                raise ConfigurationError(f"radial branching numbers must be >= {lowest}")
        else:
            if self.min_deg is None or self.max_deg is None or self.seed is None:
                raise ConfigurationError("random trees need min_deg, max_deg and seed")
            if self.min_deg < lowest or self.max_deg < self.min_deg:
                raise ConfigurationError(f"need {lowest} <= min_deg <= max_deg")
        if self.below_q is not None and self.below_q < 1:
            raise ConfigurationError("below_q must be positive")

    @property
    def depth(self) -> int:
        return self.top - self.bot


@dataclass(frozen=True)
class Vertex:
    id: int
    level: int
    parent: int | None
    children: tuple[int, ...]


@dataclass(frozen=True)
class TruncatedTree:
    levels: tuple[int, ...]
    parent: tuple[int, ...]  # -1 for the apex
    children: tuple[tuple[int, ...], ...]
    top: int
    bot: int
    mode: str = "general"
    below_branching: int | None = None
    spec: TreeGenSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        _check_structure(self)

    # -- basic accessors -------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.levels)

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def apex(self) -> int:
        return 0

    @property
    def depth(self) -> int:
        return self.top - self.bot

    def vertex(self, x: int) -> Vertex:
        p = self.parent[x]
        return Vertex(x, self.levels[x], None if p < 0 else p, self.children[x])

    def vertices(self) -> Iterator[Vertex]:
        return (self.vertex(x) for x in range(self.n))

    def is_leaf(self, x: int) -> bool:
        return not self.children[x]

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        return tuple(x for x in range(self.n) if not self.children[x])

    @cached_property
    def internal(self) -> tuple[int, ...]:
        return tuple(x for x in range(self.n) if self.children[x])

    @cached_property
    def size(self) -> tuple[int, ...]:
        size = [1] * self.n
        for x in reversed(range(self.n)):
            p = self.parent[x]
            if p >= 0:
                size[p] += size[x]
        return tuple(size)

    @cached_property
    def by_level(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {lv: [] for lv in range(self.bot, self.top + 1)}
        for x, lv in enumerate(self.levels):
            out[lv].append(x)
        return {lv: tuple(v) for lv, v in out.items()}

    @cached_property
    def level_array(self) -> np.ndarray:
        return np.asarray(self.levels, dtype=np.int64)

    @cached_property
    def size_array(self) -> np.ndarray:
        return np.asarray(self.size, dtype=np.int64)

    # -- combinatorics ---------------------------------------------------
    def in_sector(self, x: int, a: int) -> bool:
        """True iff ``x`` lies at or below ``a``."""
        return a <= x < a + self.size[a]

    def sector(self, x: int) -> range:
        return range(x, x + self.size[x])

    def ancestors(self, x: int) -> list[int]:
        """``[x, p(x), ..., apex]``."""
        out = [x]
        while self.parent[out[-1]] >= 0:
            out.append(self.parent[out[-1]])
        return out

    def ancestor(self, x: int, n: int) -> int:
        """``p^n(x)`` inside the window; ``n`` must not exceed ``top - level(x)``."""
        if n > self.top - self.levels[x]:
            raise IndexError("ancestor lies above the apex")
        for _ in range(n):
            x = self.parent[x]
        return x

    def confluent(self, x: int, y: int) -> int:
        """Minimum-level vertex lying above both ``x`` and ``y``."""
        lx, ly = self.levels[x], self.levels[y]
        par = self.parent
        while lx < ly:
            x = par[x]
            lx += 1
        while ly < lx:
            y = par[y]
            ly += 1
        while x != y:
            x, y = par[x], par[y]
        return x

    def one_above_other(self, x: int, y: int) -> bool:
        return self.in_sector(x, y) or self.in_sector(y, x)

    def child_toward(self, v: int, x: int) -> int:
        """The child of ``v`` whose sector contains ``x`` (``x`` strictly below ``v``)."""
        for c in self.children[v]:
            if self.in_sector(x, c):
                return c
        raise ValueError(f"{x} is not strictly below {v}")

    def descendants_at_depth(self, x: int, n: int) -> list[int]:
        """``s_n(x)`` within the window."""
        layer = [x]
        for _ in range(n):
            layer = [c for y in layer for c in self.children[y]]
        return layer

    # -- serialisation ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "levels": {"top": self.top, "bot": self.bot},
            "vertices": [
                {"id": x, "level": self.levels[x],
                 "parent": None if self.parent[x] < 0 else self.parent[x],
                 "children": list(self.children[x])}
                for x in range(self.n)
            ],
            "mode": self.mode,
            "below_branching": self.below_branching,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TruncatedTree":
        try:
            top = int(data["levels"]["top"])
            bot = int(data["levels"]["bot"])
            verts = sorted(data["vertices"], key=lambda v: int(v["id"]))
            levels = tuple(int(v["level"]) for v in verts)
            parent = tuple(-1 if v["parent"] is None else int(v["parent"]) for v in verts)
            children = tuple(tuple(int(c) for c in v["children"]) for v in verts)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed tree JSON: {exc}") from exc
        if [int(v["id"]) for v in verts] != list(range(len(verts))):
            raise ConfigurationError("vertex ids must be dense 0..N-1")
        return cls(levels, parent, children, top, bot,
                   mode=data.get("mode", "general"),
                   below_branching=data.get("below_branching"))


def _check_structure(t: TruncatedTree) -> None:
    n = len(t.levels)
    if n == 0:
        raise ConfigurationError("empty tree")
    if not (len(t.parent) == len(t.children) == n):
        raise ConfigurationError("inconsistent array lengths")
    if t.mode not in MODES:
        raise ConfigurationError(f"unknown mode {t.mode!r}")
    if t.parent[0] != -1 or t.levels[0] != t.top:
        raise ConfigurationError("vertex 0 must be the apex at the top level")
    # preorder check doubles as the connectivity check: walking the children
    # lists depth-first from the apex must enumerate 0..N-1 in order.
    expected = 0
    stack = [0]
    while stack:
        x = stack.pop()
        if x != expected:
            raise ConfigurationError("vertex ids must follow depth-first preorder with ascending children")
        expected += 1
        kids = t.children[x]
        if list(kids) != sorted(kids):
            raise ConfigurationError(f"children of {x} are not in ascending order")
        for c in kids:
            if not (0 <= c < n) or t.parent[c] != x:
                raise ConfigurationError(f"parent/children mismatch at edge {x}->{c}")
            if t.levels[c] != t.levels[x] - 1:
                raise ConfigurationError(f"level must drop by one along edge {x}->{c}")
        stack.extend(reversed(kids))
    if expected != n:
        raise ConfigurationError("tree is not connected")
    for x in range(n):
        if not t.children[x] and t.levels[x] != t.bot:
            raise ConfigurationError(f"leaf {x} is not at the bottom level")
        if t.mode == "section3" and t.children[x] and len(t.children[x]) < 2:
            raise ConfigurationError(f"vertex {x} has fewer than two successors")
    if set(t.levels) != set(range(t.bot, t.top + 1)):
        raise ConfigurationError("every level of the window must be populated")


def build_tree(spec: TreeGenSpec) -> TruncatedTree:
    spec.validate()
    levels: list[int] = []
    parent: list[int] = []
    children: list[list[int]] = []
    rng = SplitMix64(spec.seed) if spec.kind == "random" else None

    def branching(level: int) -> int:
        if spec.kind == "homogeneous":
            return spec.q
        if spec.kind == "radial":
            return spec.branching[spec.top - level]
        return rng.randint(spec.min_deg, spec.max_deg)

    # explicit stack: (level, parent id)
    stack = [(spec.top, -1)]
    while stack:
        level, par = stack.pop()
        x = len(levels)
        levels.append(level)
        parent.append(par)
        children.append([])
        if par >= 0:
            children[par].append(x)
        if level > spec.bot:
            stack.extend([(level - 1, x)] * branching(level))

    below = spec.below_q
    if below is None and spec.kind == "homogeneous":
        below = spec.q
    return TruncatedTree(tuple(levels), tuple(parent), tuple(tuple(c) for c in children),
                         spec.top, spec.bot, mode=spec.mode, below_branching=below, spec=spec)


def homogeneous(q: int, top: int, depth: int, mode: str = "section3") -> TruncatedTree:
    return build_tree(TreeGenSpec("homogeneous", top, top - depth, q=q, mode=mode))


def level_population(t: TruncatedTree) -> dict[int, int]:
    return {lv: len(xs) for lv, xs in t.by_level.items()}


def confluent(t: TruncatedTree, x: int, y: int) -> int:
    return t.confluent(x, y)


def sector(t: TruncatedTree, x: int) -> range:
    return t.sector(x)


def ancestors(t: TruncatedTree, x: int) -> list[int]:
    return t.ancestors(x)


def stratified_sample(t: TruncatedTree, per_level: int, seed: int) -> list[int]:
    """Up to ``per_level`` vertices from every level, drawn without replacement."""
    rng = SplitMix64(seed)
    out: list[int] = []
    for lv in range(t.top, t.bot - 1, -1):
        pool = list(t.by_level[lv])
        for i in range(min(per_level, len(pool))):
            j = rng.randint(i, len(pool) - 1)
            pool[i], pool[j] = pool[j], pool[i]
        out.extend(sorted(pool[:per_level]))
    return out


def sample_pairs(vertices: Sequence[int]) -> Iterator[tuple[int, int]]:
    for i, x in enumerate(vertices):
        for y in vertices[i:]:
            yield x, y
