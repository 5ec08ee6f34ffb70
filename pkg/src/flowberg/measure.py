"""Flow measures, level weights and the closed-form sums built from them.

Everything that lives outside the finite window is handled here analytically:

* below each leaf ``w`` the flow measure is either left unspecified (only
  sector totals are used, which the flow identity fixes) or modelled as an
  equal split into ``below_branching`` children per vertex;
* above the apex the ambient chain ``m_n = m(p^n(apex))`` is geometric or
  tabulated with a geometric tail.  When the chain ratio equals the
  below-window branching the sibling sectors hanging off the chain are taken
  to be equal-split copies as well ("homogeneous ambient").
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

from .errors import AssumptionViolation, CannotCertify, ConfigurationError, PreconditionError
from .scalars import EXACT, FLOAT, Scalar, normalize_mode, parse_scalar, power, to_json_scalar
from .tree import SplitMix64, TruncatedTree

INF = math.inf


# ---------------------------------------------------------------------------
# level weights


@dataclass(frozen=True)
class LevelWeight:
    """A weight ``sigma(n)`` depending on the level only.

    ``exponential``: ``sigma(n) = base**n`` with ``base > 1``.

    ``tabulated``: explicit values on levels ``start .. start+len(values)-1``,
    continued geometrically by ``lower_ratio`` (mandatory, ``< 1``) going down
    and by ``upper_ratio`` going up.  ``upper_ratio=None`` records that no rule
    is known; any quantity needing those levels raises :class:`CannotCertify`.
    """

    kind: str
    base: Scalar | None = None
    start: int = 0
    values: tuple = ()
    lower_ratio: Scalar | None = None
    upper_ratio: Scalar | None = None
    mode: str = EXACT

    def __post_init__(self):
        if self.kind == "exponential":
            if self.base is None or not self.base > 1:
                raise AssumptionViolation("exponential weight needs base k > 1 for a summable lower tail")
        elif self.kind == "tabulated":
            if not self.values:
                raise ConfigurationError("tabulated weight needs at least one value")
            if any(v < 0 for v in self.values):
                raise ConfigurationError("weight values must be nonnegative")
            if self.lower_ratio is None:
                raise AssumptionViolation("tabulated weight needs a geometric lower-tail ratio")
            if not 0 <= self.lower_ratio < 1:
                raise AssumptionViolation("lower-tail ratio must lie in [0, 1) for a summable lower tail")
            if self.upper_ratio is not None and self.upper_ratio < 0:
                raise ConfigurationError("upper-tail ratio must be nonnegative")
        else:
            raise ConfigurationError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def exponential(cls, k, mode: str | None = None) -> "LevelWeight":
        mode = normalize_mode(mode)
        return cls("exponential", base=parse_scalar(k, mode), mode=mode)

    @classmethod
    def tabulated(cls, table: Mapping[int, object] | Sequence, *, start: int | None = None,
                  lower_ratio, upper_ratio=None, mode: str | None = None) -> "LevelWeight":
        mode = normalize_mode(mode)
        if isinstance(table, Mapping):
            levels = sorted(int(k) for k in table)
            if levels != list(range(levels[0], levels[-1] + 1)):
                raise ConfigurationError("tabulated levels must be contiguous")
            start = levels[0]
            vals = tuple(parse_scalar(table[k] if k in table else table[str(k)], mode) for k in levels)
        else:
            vals = tuple(parse_scalar(v, mode) for v in table)
            start = 0 if start is None else start
        up = None if upper_ratio is None else parse_scalar(upper_ratio, mode)
        return cls("tabulated", start=start, values=vals,
                   lower_ratio=parse_scalar(lower_ratio, mode), upper_ratio=up, mode=mode)

    @property
    def end(self) -> int:
        return self.start + len(self.values) - 1

    @cached_property
    def _prefix(self) -> tuple:
        out, acc = [], self._zero
        for v in self.values:
            acc = acc + v
            out.append(acc)
        return tuple(out)

    @property
    def _zero(self):
        return Fraction(0) if self.mode == EXACT else 0.0

    @property
    def _one(self):
        return Fraction(1) if self.mode == EXACT else 1.0

    def __call__(self, n: int) -> Scalar:
        return self.sigma(n)

    def sigma(self, n: int) -> Scalar:
        if self.kind == "exponential":
            return power(self.base, n)
        if n < self.start:
            return self.values[0] * power(self.lower_ratio, self.start - n)
        if n <= self.end:
            return self.values[n - self.start]
        if self.upper_ratio is None:
            raise CannotCertify(f"no upper-tail rule for the weight at level {n}")
        return self.values[-1] * power(self.upper_ratio, n - self.end)

    def S(self, level: int) -> Scalar:
        """``sum_{j <= level} sigma(j)`` in closed form."""
        if self.kind == "exponential":
            k = self.base
            return power(k, level + 1) / (k - 1)
        t = self.lower_ratio
        v0 = self.values[0]
        if level < self.start:
            return v0 * power(t, self.start - level) / (1 - t)
        below = v0 * t / (1 - t)
        if level <= self.end:
            return below + self._prefix[level - self.start]
        u = self.upper_ratio
        if u is None:
            raise CannotCertify(f"no upper-tail rule for the weight beyond level {self.end}")
        j = level - self.end
        if u == 1:
            up = self.values[-1] * j
        else:
            up = self.values[-1] * u * (1 - power(u, j)) / (1 - u)
        return below + self._prefix[-1] + up

    def total(self) -> Scalar:
        """``sum_n sigma(n)`` over all integers (``inf`` when divergent)."""
        if self.kind == "exponential":
            return INF
        u = self.upper_ratio
        if u is None:
            raise CannotCertify("no upper-tail rule for the weight")
        last = self.values[-1]
        if last == 0 or u == 0:
            return self.S(self.end)
        if u >= 1:
            return INF
        return self.S(self.end) + last * u / (1 - u)

    def geometric_above(self) -> tuple[int, Scalar] | None:
        """``(L, u)`` with ``sigma(n+1) = u*sigma(n)`` for all ``n >= L``, if known."""
        if self.kind == "exponential":
            return (-(10 ** 9), self.base)
        if self.upper_ratio is None:
            return None
        return (self.end, self.upper_ratio)

    def to_dict(self) -> dict:
        if self.kind == "exponential":
            return {"kind": "exponential", "base": to_json_scalar(self.base)}
        return {"kind": "tabulated", "start": self.start,
                "values": [to_json_scalar(v) for v in self.values],
                "lower_ratio": to_json_scalar(self.lower_ratio),
                "upper_ratio": None if self.upper_ratio is None else to_json_scalar(self.upper_ratio)}

    @classmethod
    def from_dict(cls, data: Mapping, mode: str | None = None) -> "LevelWeight":
        kind = data.get("kind")
        if kind == "exponential":
            return cls.exponential(data["base"], mode)
        if kind == "tabulated":
            return cls.tabulated(data["values"], start=int(data.get("start", 0)),
                                 lower_ratio=data["lower_ratio"],
                                 upper_ratio=data.get("upper_ratio"), mode=mode)
        raise ConfigurationError(f"unknown weight kind {kind!r}")


def weight_sum(n: int, x: int, sigma: LevelWeight, tree: TruncatedTree) -> Scalar:
    """``S_{n,x}(sigma)``."""
    return sigma.S(tree.levels[x] + n)


def carleson_check(sigma: LevelWeight) -> bool:
    """True iff ``sigma`` is summable over all of Z."""
    return sigma.total() != INF


# ---------------------------------------------------------------------------
# flow measures


@dataclass(frozen=True)
class AmbientChain:
    """Masses ``m_n`` of the ancestors of the apex, ``m_0 = m(apex)``."""

    kind: str
    ratio: Scalar
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("geometric", "tabulated"):
            raise ConfigurationError(f"unknown chain kind {self.kind!r}")
        if self.ratio < 1:
            raise ConfigurationError("chain ratio must be >= 1 (masses are nondecreasing upwards)")
        if self.kind == "tabulated":
            if not self.table:
                raise ConfigurationError("tabulated chain needs m_0")
            if any(b < a for a, b in zip(self.table, self.table[1:])):
                raise ConfigurationError("chain masses must be nondecreasing")

    @classmethod
    def geometric(cls, r, mode: str | None = None) -> "AmbientChain":
        return cls("geometric", parse_scalar(r, normalize_mode(mode)))

    def mass(self, n: int, m0: Scalar) -> Scalar:
        if self.kind == "geometric":
            return m0 * power(self.ratio, n)
        if n < len(self.table):
            return self.table[n]
        return self.table[-1] * power(self.ratio, n - len(self.table) + 1)

    @property
    def geometric_from(self) -> int:
        """First ``n`` from which ``m_{n+1} = ratio * m_n`` holds."""
        return 0 if self.kind == "geometric" else len(self.table) - 1

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "ratio": to_json_scalar(self.ratio)}
        if self.kind == "tabulated":
            d["table"] = [to_json_scalar(v) for v in self.table]
        return d

    @classmethod
    def from_dict(cls, data: Mapping, mode: str) -> "AmbientChain":
        table = tuple(parse_scalar(v, mode) for v in data.get("table", ()))
        return cls(data.get("kind", "geometric"), parse_scalar(data["ratio"], mode), table)


@dataclass(frozen=True)
class FlowMeasure:
    tree: TruncatedTree
    values: tuple
    chain: AmbientChain
    mode: str = EXACT
    below_branching: int | None = None
    rtol: float = 1e-12

    def __post_init__(self):
        validate_flow(self)

    def __call__(self, x: int) -> Scalar:
        return self.values[x]

    @property
    def exact(self) -> bool:
        return self.mode == EXACT

    @property
    def m0(self) -> Scalar:
        return self.values[self.tree.apex]

    def chain_mass(self, n: int) -> Scalar:
        """``m(p^n(apex))``; ``n = 0`` is the apex itself."""
        if n == 0:
            return self.m0
        return self.chain.mass(n, self.m0)

    @property
    def homogeneous_ambient(self) -> bool:
        """Sibling sectors along the chain are equal-split copies of branching ``below_branching``."""
        return (self.chain.kind == "geometric" and self.below_branching is not None
                and self.chain.ratio == self.below_branching)

    @cached_property
    def array(self):
        import numpy as np
        return np.asarray([float(v) for v in self.values])

    def to_dict(self, sigma: LevelWeight | None = None) -> dict:
        d = {"m": {str(x): to_json_scalar(v) for x, v in enumerate(self.values)},
             "chain": self.chain.to_dict(),
             "mode": self.mode,
             "below_branching": self.below_branching}
        if sigma is not None:
            d["sigma"] = sigma.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: Mapping, tree: TruncatedTree, mode: str | None = None) -> "FlowMeasure":
        mode = normalize_mode(mode or data.get("mode"))
        try:
            raw = data["m"]
            values = tuple(parse_scalar(raw[str(x)] if str(x) in raw else raw[x], mode)
                           for x in range(tree.n))
            chain = AmbientChain.from_dict(data["chain"], mode)
        except KeyError as exc:
            raise ConfigurationError(f"measure JSON is missing {exc}") from exc
        return cls(tree, values, chain, mode, data.get("below_branching"))


def validate_flow(m: FlowMeasure) -> None:
    t = m.tree
    if len(m.values) != t.n:
        raise ConfigurationError("one mass per vertex required")
    if any(not v > 0 for v in m.values):
        raise ConfigurationError("flow measure must be positive")
    for x in t.internal:
        total = sum((m.values[c] for c in t.children[x]), m.values[x] * 0)
        if m.exact:
            ok = total == m.values[x]
        else:
            ok = abs(total - m.values[x]) <= m.rtol * abs(m.values[x])
        if not ok:
            raise ConfigurationError(f"mass preservation fails at vertex {x}")
    ch = m.chain
    if ch.kind == "tabulated" and ch.table[0] != m.m0:
        raise ConfigurationError("tabulated chain must start at m(apex)")
    if t.mode == "section3":
        strict = (ch.ratio > 1 and (ch.kind == "geometric"
                  or all(b > a for a, b in zip(ch.table, ch.table[1:]))))
        if not strict:
            raise ConfigurationError("chain must be strictly increasing in section3 mode")


def _level_branching(t: TruncatedTree) -> dict[int, int]:
    """Branching number per level for radial trees (levels bot+1 .. top)."""
    out: dict[int, int] = {}
    for lv in range(t.bot + 1, t.top + 1):
        counts = {len(t.children[x]) for x in t.by_level[lv]}
        if len(counts) != 1:
            raise ConfigurationError("canonical flow needs a radial tree (branching constant per level)")
        out[lv] = counts.pop()
    return out


def canonical_flow(t: TruncatedTree, mode: str | None = None, chain_ratio=None,
                   below_branching: int | None = None) -> FlowMeasure:
    """Equal-split flow; on homogeneous ``q``-trees this is ``m(x) = q**level(x)``.

    Masses are normalised so that level-0 vertices carry mass 1, extending the
    branching pattern outside the window when level 0 is not inside it.
    """
    mode = normalize_mode(mode)
    b = _level_branching(t)
    below = below_branching if below_branching is not None else t.below_branching
    if chain_ratio is None:
        chain_ratio = b.get(t.top, below)
        if chain_ratio is None:
            raise ConfigurationError("cannot infer a chain ratio for a single-vertex window")
    r = parse_scalar(chain_ratio, mode)
    one = parse_scalar(1, mode)
    level_mass = {t.top: one}
    for lv in range(t.top, t.bot, -1):
        level_mass[lv - 1] = level_mass[lv] / b[lv]
    if t.bot <= 0 <= t.top:
        scale = level_mass[0]
    elif t.bot > 0:
        if below is None:
            raise ConfigurationError("cannot normalise without a below-window branching")
        scale = level_mass[t.bot] / power(parse_scalar(below, mode), t.bot)
    else:
        scale = level_mass[t.top] * power(r, -t.top)
    values = tuple(level_mass[lv] / scale for lv in t.levels)
    return FlowMeasure(t, values, AmbientChain("geometric", r), mode, below)


def random_flow(t: TruncatedTree, seed: int, ratio_bounds=(Fraction(1, 4), Fraction(3, 4)),
                mode: str | None = None, apex_mass=1, chain_ratio=None,
                below_branching: int | None = None) -> FlowMeasure:
    """Random flow whose child shares lie in ``[lo, hi]``.

    Every child starts at share ``lo``; the leftover ``1 - n*lo`` is handed
    out in child order, each child drawing uniformly within what keeps the
    remaining children feasible, and the last child taking the rest.  Draws
    come from one SplitMix64 stream in vertex order; in exact mode they are
    8-bit dyadic fractions so masses stay exactly rational.
    """
    mode = normalize_mode(mode)
    lo, hi = (parse_scalar(v, mode) for v in ratio_bounds)
    if not (0 < lo <= hi < 1):
        raise ConfigurationError("ratio bounds must satisfy 0 < lo <= hi < 1")
    rng = SplitMix64(seed)
    values = [None] * t.n
    values[0] = parse_scalar(apex_mass, mode)
    cap = hi - lo
    for x in range(t.n):
        kids = t.children[x]
        n = len(kids)
        if n == 0:
            continue
        if n == 1:
            values[kids[0]] = values[x]
            continue
        if n * lo > 1 or n * hi < 1:
            raise ConfigurationError(f"share bounds infeasible for a vertex with {n} children")
        rest = 1 - n * lo
        shares = []
        for i in range(n - 1):
            a = max(rest - (n - 1 - i) * cap, 0 * rest)
            b = min(cap, rest)
            if mode == EXACT:
                u = Fraction(rng.unit_dyadic(8), 256)
            else:
                u = rng.next_u64() / 2.0 ** 64
            extra = a + (b - a) * u
            shares.append(lo + extra)
            rest -= extra
        shares.append(lo + rest)
        for c, s in zip(kids, shares[:-1]):
            values[c] = values[x] * s
        # the last child takes the exact remainder so the flow identity is exact
        values[kids[-1]] = values[x] - sum((values[c] for c in kids[:-1]), 0 * values[x])
    r = parse_scalar(chain_ratio, mode) if chain_ratio is not None else 1 / hi
    return FlowMeasure(t, tuple(values), AmbientChain("geometric", r), mode, below_branching)


# ---------------------------------------------------------------------------
# derived quantities


def sector_mass(x: int, m: FlowMeasure, sigma: LevelWeight, strict: bool = False) -> Scalar:
    """``m.sigma(T_x)`` over the full infinite sector (``strict`` drops ``x`` itself)."""
    lv = m.tree.levels[x]
    return m.values[x] * sigma.S(lv - 1 if strict else lv)


def chain_block_mass(m: FlowMeasure, sigma: LevelWeight, n: int) -> Scalar:
    """``m.sigma`` of the sibling block ``O_n`` hanging off ``p^n(apex)`` (``n >= 1``)."""
    return (m.chain_mass(n) - m.chain_mass(n - 1)) * sigma.S(m.tree.top + n - 1)


@dataclass(frozen=True)
class DoublingConstants:
    C_m: Scalar
    D_m: Scalar


def doubling_constants(m: FlowMeasure) -> DoublingConstants:
    """Suprema of ``m(p(x))/m(x)`` and ``m(x)/m(p(x))`` over every modelled edge."""
    t = m.tree
    ratios = [m.values[t.parent[x]] / m.values[x] for x in range(1, t.n)]
    ch = m.chain
    if ch.kind == "tabulated":
        ratios += [b / a for a, b in zip(ch.table, ch.table[1:])]
    ratios.append(ch.ratio)
    if m.below_branching is not None:
        ratios.append(parse_scalar(m.below_branching, m.mode))
    return DoublingConstants(max(ratios), 1 / min(ratios))


@dataclass(frozen=True)
class AssumptionIICheck:
    converges: bool
    partial: Scalar
    certified_remainder: Scalar
    terms: int

    @property
    def total(self) -> Scalar:
        return self.partial + self.certified_remainder


def assumption_ii_check(sigma: LevelWeight, m: FlowMeasure, tol=0) -> AssumptionIICheck:
    """``sum_{n >= 0} 1/(sigma(level(apex)+n) * m_n)`` along the apex chain.

    Both factors must be eventually geometric; from that point the terms form a
    geometric series whose exact remainder is reported.  Summation stops at the
    first index where the remainder is at most ``tol``.
    """
    geo = sigma.geometric_above()
    if geo is None:
        raise CannotCertify("weight has no upper-tail rule")
    la = m.tree.top
    lstart, u = geo
    n0 = max(m.chain.geometric_from, lstart - la, 0)
    theta = 1 / (u * m.chain.ratio) if u > 0 else INF
    partial = 0 * m.m0

    def term(n):
        s = sigma.sigma(la + n)
        return INF if s == 0 else 1 / (s * m.chain_mass(n))

    for n in range(n0):
        tn = term(n)
        if tn == INF:
            return AssumptionIICheck(False, INF, INF, n + 1)
        partial += tn
    if theta >= 1:
        return AssumptionIICheck(False, partial, INF, n0)
    if tol == 0:
        return AssumptionIICheck(True, partial, term(n0) / (1 - theta), n0)
    n = n0
    while True:
        tn = term(n)
        rem = tn / (1 - theta)
        if rem <= tol:
            return AssumptionIICheck(True, partial, rem, n)
        partial += tn
        n += 1


class UnsupportedTail(CannotCertify):
    """A below-window tail needs an equal-split model that was not supplied."""


def monomial_tail_factor(e, t, branching: int | None) -> Scalar:
    """``F`` with ``sum_{x strictly below w} m(x)**e * t**level(x) = m(w)**e * t**level(w) * F``.

    Exact for the equal-split model of the given branching; for ``e == 1`` the
    flow identity alone suffices and ``branching`` is ignored.  Returns
    ``inf`` when the geometric series diverges.
    """
    if e == 1:
        theta = t
    else:
        if branching is None:
            raise UnsupportedTail("tail sums of m**e with e != 1 need an equal-split model")
        theta = power(branching, e - 1) * t if isinstance(e, int) else float(branching) ** (e - 1) * t
    if theta <= 1:
        return INF
    return 1 / (theta - 1)


@dataclass(frozen=True)
class Lemexp2Result:
    ratio: Scalar
    truncated: bool
    diverges: bool


def lemexp2_ratio(m: FlowMeasure, y: int, k, p) -> Lemexp2Result:
    """``sum_{x in T_y} k**level(x) m(x)**p / (k**level(y) m(y)**p)``.

    Leaf tails are summed in closed form when possible (always for ``p = 1``,
    under the equal-split model otherwise); without a tail model the window
    sum is returned with ``truncated`` set.
    """
    t = m.tree
    k = parse_scalar(k, m.mode) if not isinstance(k, float) else k
    exact_p = isinstance(p, int) or (isinstance(p, Fraction) and p.denominator == 1)
    pe = int(p) if exact_p else float(p)
    d = doubling_constants(m)
    if not k > (float(d.D_m) ** (pe - 1) if not exact_p else d.D_m ** (pe - 1)):
        warnings.warn("k <= D_m**(p-1): the sum over T_y may diverge", RuntimeWarning)

    def mono(x):
        lv = t.levels[x]
        mv = m.values[x] if exact_p else float(m.values[x])
        return power(k, lv) * mv ** pe

    num = 0 * mono(y)
    leaf_part = 0 * mono(y)
    for x in t.sector(y):
        v = mono(x)
        num += v
        if not t.children[x]:
            leaf_part += v
    truncated, diverges = False, False
    try:
        factor = monomial_tail_factor(pe, k, m.below_branching)
    except UnsupportedTail:
        truncated = True
    else:
        if factor == INF:
            diverges = True
            truncated = True
        else:
            num += leaf_part * factor
    return Lemexp2Result(num / mono(y), truncated, diverges)


# lp norms are defined on TreeFunctions; imported lazily to keep the module
# graph acyclic.
def lp_norm(f, p, m: FlowMeasure, sigma: LevelWeight):
    from .functions import lp_norm as _lp
    return _lp(f, p, m, sigma)
