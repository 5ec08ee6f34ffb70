"""Toeplitz-type operators ``U_{a,b,c}``, ``V_{a,b,c}`` and their boundedness tests.

With ``sigma_j(n) = k_j**n`` and ``K_c`` the kernel for ``m.sigma_c``,

    U f(x) = m(x) k_a^l(x) sum_y K_c(x, y) f(y) m(y) k_b^l(y),

``V`` uses ``|K_c|``, and both act on ``L^p(m.sigma_d)``.  Every operator here
is stored in weight form ``Op f(x) = A(x) sum_y K(x, y) B(y) f(y)`` with
monomial weights ``A = m**alpha_A * t_A**level`` (likewise ``B``), which makes
all below-window and ambient tails geometric series.

Condition checks compare positive reals in log space with a relative
tolerance of ``1e-12``: values that agree to that accuracy count as equal, so
strict inequalities fail at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import CannotCertify, ConfigurationError, PreconditionError
from .kernel import KernelEvaluator
from .measure import FlowMeasure, LevelWeight, canonical_flow, doubling_constants
from .tree import TruncatedTree, homogeneous

LOG_TOL = 1e-12
THETA_TOL = 1e-12


def _lt(a: float, b: float) -> bool:
    """Strict ``a < b`` for positive reals, with ties up to ``LOG_TOL`` counted as equal."""
    if b == math.inf:
        return a < math.inf
    if a <= 0:
        return b > 0
    return math.log(b) - math.log(a) > LOG_TOL


def _le(a: float, b: float) -> bool:
    if a <= 0:
        return True
    if b == math.inf:
        return True
    return math.log(a) - math.log(b) <= LOG_TOL


@dataclass(frozen=True)
class ToeplitzParams:
    k_a: float
    k_b: float
    k_c: float
    k_d: float
    p: float
    q: int | None = None
    exponents: tuple | None = None

    def __post_init__(self):
        if not self.k_c > 1:
            raise PreconditionError("k_c must exceed 1")
        if not self.p >= 1:
            raise ConfigurationError("p must be >= 1")
        if min(self.k_a, self.k_b, self.k_d) <= 0:
            raise ConfigurationError("weight bases must be positive")

    @classmethod
    def from_exponents(cls, q: int, a, b, c, d, p) -> "ToeplitzParams":
        """Bases ``k_j = q**(j-1)`` on a homogeneous tree of branching ``q``."""
        if not c > 1:
            raise PreconditionError("the exponent c must exceed 1")
        ks = [float(q) ** (float(j) - 1) for j in (a, b, c, d)]
        return cls(*ks, p=float(p), q=q, exponents=(a, b, c, d))

    @property
    def p_conj(self) -> float:
        return math.inf if self.p == 1 else self.p / (self.p - 1)

    def label(self) -> str:
        if self.exponents:
            a, b, c, d = self.exponents
            return f"a={a},b={b},c={c},d={d},p={self.p:g}"
        return f"k=({self.k_a:g},{self.k_b:g},{self.k_c:g},{self.k_d:g}),p={self.p:g}"


@dataclass(frozen=True)
class Condition:
    holds: bool | None
    lhs: float
    rhs: float
    middle: float | None = None
    note: str = ""


@dataclass(frozen=True)
class GrowthData:
    """How ``m`` grows per level: ``up`` along the chain, ``down`` below the window.

    ``down`` is the equal-split branching below the window (``m`` drops by that
    factor per level); ``None`` when unmodelled.  ``window_sup`` is the observed
    supremum of ``m(x) / B**level(x)`` over the window and chain table.
    """

    up: float
    down: float | None
    window_sup: float | None = None
    level_homogeneous: bool = True

    @classmethod
    def from_measure(cls, m: FlowMeasure, base: float | None = None) -> "GrowthData":
        down = None if m.below_branching is None else float(m.below_branching)
        sup = None
        if base is not None:
            sup = max(float(v) / base ** lv for v, lv in zip(m.values, m.tree.levels))
        per_level = {}
        for v, lv in zip(m.values, m.tree.levels):
            per_level.setdefault(lv, set()).add(v)
        flat = all(len(vs) == 1 for vs in per_level.values())
        return cls(float(m.chain.ratio), down, sup, flat)


@dataclass(frozen=True)
class ConditionReport:
    params: ToeplitzParams
    C_m: float
    D_m: float
    necessary_i: Condition
    necessary_ii: Condition
    sufficient_1: Condition
    sufficient_2: Condition
    schur_interval: tuple | None
    verdict: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = {k: v for k, v in asdict(self.params).items()}
        return d


def _measure_condition(params: ToeplitzParams, growth: GrowthData) -> Condition:
    """``m(x) <= C (k_c/(k_a k_b))**level(x)`` for level-homogeneous growth.

    Going up, ``m`` grows like ``up**n`` and the bound like ``B**n``; going
    down, ``m`` shrinks like ``down**-n`` and the bound like ``B**-n``.  So the
    ratio stays bounded iff ``up <= B <= down``.  When the window is not
    level-homogeneous the constant is not determined by the growth rates, so
    ``holds`` is left undecided (unless the chain side already fails) and the
    observed supremum of ``m / B**level`` is reported in ``note``.
    """
    B = params.k_c / (params.k_a * params.k_b)
    ok_up = _le(growth.up, B)
    if not growth.level_homogeneous:
        return Condition(False if not ok_up else None, growth.up, growth.down or math.nan, B,
                         note=f"window not level-homogeneous; observed sup m/B**level = {growth.window_sup:.6g}")
    if growth.down is None:
        return Condition(False if not ok_up else None, growth.up, math.nan, B,
                         note="below-window growth unmodelled; only the chain side was checked")
    ok = ok_up and _le(B, growth.down)
    return Condition(ok, growth.up, growth.down, B, note="holds iff up <= B <= down")


def necessary_conditions(params: ToeplitzParams, C_m: float, D_m: float, growth: GrowthData):
    """Conditions i) and ii) that any bounded ``U`` must satisfy."""
    ci = _measure_condition(params, growth)
    lo = 1 / (params.k_a * C_m)
    mid = params.k_d ** (1 / params.p)
    hi = params.k_b
    cii = Condition(_lt(lo, mid) and _lt(mid, hi), lo, hi, mid)
    return ci, cii


def sufficient_conditions(params: ToeplitzParams, C_m: float, D_m: float, growth: GrowthData):
    """Conditions 1) and 2) under which ``V`` (hence ``U``) is bounded."""
    c1 = _measure_condition(params, growth)
    ka, kb, kc, kd, p = params.k_a, params.k_b, params.k_c, params.k_d, params.p
    if p == 1:
        lo, mid, hi = D_m, ka * kd, kc / C_m
    else:
        pc = params.p_conj
        lo = C_m * D_m ** (2 - 1 / pc) * kb ** (1 / pc) / (ka ** (1 / p) * kc ** (1 / pc))
        hi = kb ** (1 / pc) * kc ** (1 / p) / (C_m ** (2 - 1 / pc) * D_m * ka ** (1 / p))
        mid = kd ** (1 / p)
    c2 = Condition(_lt(lo, mid) and _lt(mid, hi), lo, hi, mid)
    return c1, c2


def schur_interval(params: ToeplitzParams, C_m: float, D_m: float):
    """Open interval of Schur bases ``k_gamma`` (``None`` when empty)."""
    p = params.p
    if p == 1:
        raise PreconditionError("the Schur interval is only defined for p > 1")
    pc = params.p_conj
    ka, kb, kc, kd = params.k_a, params.k_b, params.k_c, params.k_d
    lo1, hi1 = D_m / kb ** (1 / pc), (kc / kb) ** (1 / pc) / C_m
    lo2 = D_m ** (1 + 1 / p) / (ka * kd) ** (1 / p)
    hi2 = (kc / (ka * kd)) ** (1 / p) / C_m ** (1 + 1 / p)
    lo, hi = max(lo1, lo2), min(hi1, hi2)
    if not _lt(lo, hi):
        return None
    return lo, hi


def condition_report(params: ToeplitzParams, m: FlowMeasure) -> ConditionReport:
    dc = doubling_constants(m)
    C_m, D_m = float(dc.C_m), float(dc.D_m)
    growth = GrowthData.from_measure(m, params.k_c / (params.k_a * params.k_b))
    ni, nii = necessary_conditions(params, C_m, D_m, growth)
    s1, s2 = sufficient_conditions(params, C_m, D_m, growth)
    interval = schur_interval(params, C_m, D_m) if params.p > 1 else None
    if s1.holds and s2.holds:
        verdict = "bounded_certified"
    elif ni.holds is False or nii.holds is False:
        verdict = "unbounded_certified"
    else:
        verdict = "indeterminate"
    return ConditionReport(params, C_m, D_m, ni, nii, s1, s2, interval, verdict)


# ---------------------------------------------------------------------------
# homogeneous equivalence


@dataclass(frozen=True)
class CorollaryVerdict:
    bounded: bool
    ratio_condition: bool
    inequality: bool
    stated_equality: bool
    proof_equality: bool
    discrepancy: bool


def corollary_check(q: int, a, b, c, d, p) -> CorollaryVerdict:
    """Boundedness on the homogeneous tree with canonical flow and ``k_j = q**(j-1)``.

    Bounded iff ``k_c/(k_a k_b) = q`` (i.e. ``c = a + b``) and
    ``-a < (d-1)/p < b-1``.  ``stated_equality`` records the alternative
    reading ``c + 1 = a + b``; ``discrepancy`` is set when the two readings
    give different verdicts.
    """
    if not c > 1:
        raise PreconditionError("c must exceed 1")
    a, b, c, d, p = (Fraction(v) if not isinstance(v, float) else Fraction(v).limit_denominator(10 ** 6)
                     for v in (a, b, c, d, p))
    ineq = -a < (d - 1) / p < b - 1
    proof = c == a + b
    stated = c + 1 == a + b
    return CorollaryVerdict(proof and ineq, proof, ineq, stated, proof,
                            (stated and ineq) != (proof and ineq))


# ---------------------------------------------------------------------------
# operators in weight form


@dataclass(frozen=True)
class OperatorWeights:
    """``Op f(x) = A(x) sum_y K(x,y) B(y) f(y)`` on ``L^p(mu)``, all weights monomials in ``m`` and the level."""

    alpha_A: float
    t_A: float
    alpha_B: float
    t_B: float
    t_mu: float
    absolute: bool = False
    alpha_mu: float = 1.0

    def adjoint(self) -> "OperatorWeights":
        """Adjoint for the ``L^p(mu)``/``L^{p'}(mu)`` pairing: ``A* = B/mu``, ``B* = A mu``."""
        return OperatorWeights(self.alpha_B - self.alpha_mu, self.t_B / self.t_mu,
                               self.alpha_A + self.alpha_mu, self.t_A * self.t_mu,
                               self.t_mu, self.absolute, self.alpha_mu)


def operator_weights(params: ToeplitzParams, operator: str) -> OperatorWeights:
    op = operator.upper()
    if op == "U":
        return OperatorWeights(1, params.k_a, 1, params.k_b, params.k_d)
    if op == "V":
        return OperatorWeights(1, params.k_a, 1, params.k_b, params.k_d, absolute=True)
    if op == "P":
        return OperatorWeights(0, 1.0, 1, params.k_c, params.k_c)
    if op == "USTAR":
        return operator_weights(params, "U").adjoint()
    raise ConfigurationError(f"unknown operator {operator!r}")


def _mono(m_arr: np.ndarray, lev: np.ndarray, alpha: float, t: float) -> np.ndarray:
    return m_arr ** alpha * t ** lev


def apply_weighted(ev: KernelEvaluator, w: OperatorWeights, f) -> list:
    """``Op f`` on the window for finitely supported ``f`` (exact in rational mode)."""
    t, m = ev.tree, ev.m
    vals = [0 * m.m0] * t.n
    fvals = f.items() if isinstance(f, dict) else enumerate(f)
    for y, v in fvals:
        if v:
            vals[y] = v * _scalar_mono(m.values[y], t.levels[y], w.alpha_B, w.t_B, m.exact) / \
                (m.values[y] * ev.sigma.sigma(t.levels[y]))
    agg = ev.apply(vals, absolute=w.absolute)
    return [agg[x] * _scalar_mono(m.values[x], t.levels[x], w.alpha_A, w.t_A, m.exact) for x in range(t.n)]


def _scalar_mono(mv, lv, alpha, t, exact):
    if exact and float(alpha) == int(alpha) and isinstance(t, (int, Fraction)):
        return Fraction(mv) ** int(alpha) * Fraction(t) ** lv
    if exact and float(alpha) == int(alpha):
        tf = Fraction(t).limit_denominator(10 ** 12)
        if float(tf) == t:
            return Fraction(mv) ** int(alpha) * tf ** lv
    return float(mv) ** alpha * float(t) ** lv


def apply_U(params: ToeplitzParams, ev: KernelEvaluator, f) -> list:
    """``U f`` over the window; ``ev`` must be built for ``sigma_c``."""
    return apply_weighted(ev, _exact_weights(params, "U", ev), f)


def apply_V(params: ToeplitzParams, ev: KernelEvaluator, f) -> list:
    return apply_weighted(ev, _exact_weights(params, "V", ev), f)


def _exact_weights(params: ToeplitzParams, op: str, ev: KernelEvaluator) -> OperatorWeights:
    w = operator_weights(params, op)
    if ev.exact and params.exponents is not None and params.q is not None:
        a, b, c, d = (Fraction(e) for e in params.exponents)
        q = Fraction(params.q)
        if all(e.denominator == 1 for e in (a, b, d)):
            return replace(w, t_A=q ** int(a - 1), t_B=q ** int(b - 1), t_mu=q ** int(d - 1))
    return w


# ---------------------------------------------------------------------------
# tails for the numerical probes (float mode)


def _tail_factor(e: float, t: float, branching: float | None) -> float:
    """``sum_{j >= 1} (q**(e-1) t)**-j``: relative mass strictly below a vertex."""
    if e == 1:
        theta = t
    else:
        if branching is None:
            raise CannotCertify("tails of m**e with e != 1 need an equal-split model")
        theta = branching ** (e - 1) * t
    if theta <= 1 + THETA_TOL:
        return math.inf
    return 1 / (theta - 1)


def ambient_power_sum(ev: KernelEvaluator, e: float, t: float, s: float) -> float:
    """``sum`` over the ambient tree (chain vertices and blocks ``O_n``) of ``|K|**s m**e t**level``.

    ``K`` is taken against any window vertex, i.e. ``K_above(c_n)`` on the
    chain and ``K_not(c_n)`` on ``O_n``.  Needs an exponential weight, a
    geometric chain and equal-split sibling sectors; every term is then
    geometric in ``n`` with ratio ``r**e t / (k r)**s``.
    """
    m, sig = ev.m, ev.sigma
    if ev.rooted:
        return 0.0
    if sig.kind != "exponential" or not m.homogeneous_ambient:
        raise CannotCertify("ambient tails need an exponential weight and homogeneous ambient tree")
    r, k = float(m.chain.ratio), float(sig.base)
    la = ev.tree.top
    theta = r ** e * t / (k * r) ** s
    F = _tail_factor(e, t, float(m.below_branching))

    def term(n):
        mn, mp = float(m.chain_mass(n)), float(m.chain_mass(n - 1))
        chain = abs(float(ev.chain_above(n))) ** s * mn ** e * t ** (la + n)
        block = abs(float(ev.chain_not(n))) ** s * (r - 1) * mp ** e * t ** (la + n - 1) * (1 + F)
        return chain + block

    t1 = term(1)
    if t1 == 0:
        return 0.0
    if theta >= 1 - THETA_TOL or F == math.inf:
        return math.inf
    return t1 / (1 - theta)


@dataclass
class Window:
    """Float-mode snapshot of a window and its kernel tables for fast numerics."""

    ev: KernelEvaluator
    lev: np.ndarray
    m: np.ndarray
    ka: np.ndarray
    kn: np.ndarray
    leaf: np.ndarray
    size: np.ndarray
    cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, ev: KernelEvaluator) -> "Window":
        t = ev.tree
        return cls(ev, t.level_array.astype(float), ev.m.array,
                   np.array([float(v) for v in ev.k_above]), np.array([float(v) for v in ev.k_not]),
                   np.array([not c for c in t.children]), t.size_array)

    def row(self, z: int) -> np.ndarray:
        t = self.ev.tree
        row = np.empty(t.n)
        for a in reversed(t.ancestors(z)):
            row[a:a + self.size[a]] = self.kn[a]
            row[a] = self.ka[a]
        row[z:z + self.size[z]] = self.ka[z]
        return row


@lru_cache(maxsize=64)
def homogeneous_window(q: int, depth: int, k_c: float) -> Window:
    """Centred window ``[top - depth, top]`` with ``top = depth - depth // 2``, canonical flow, ``sigma_c = k_c**level``."""
    top = depth - depth // 2
    t = homogeneous(q, top, depth)
    m = canonical_flow(t, mode="float")
    ev = KernelEvaluator(m, LevelWeight.exponential(k_c, mode="float"))
    return Window.build(ev)


def delta_ratio(win: Window, w: OperatorWeights, p: float, z: int, tails: bool = True) -> float:
    """``||Op delta_z||_{L^p(mu)} / ||delta_z||_{L^p(mu)}`` over the whole tree (window + tails)."""
    ev = win.ev
    K = win.row(z)
    if w.absolute:
        K = np.abs(K)
    A = _mono(win.m, win.lev, w.alpha_A, w.t_A)
    mu = _mono(win.m, win.lev, w.alpha_mu, w.t_mu)
    Bz = win.m[z] ** w.alpha_B * w.t_B ** win.lev[z]
    vals = np.abs(A * K * Bz)
    if p == math.inf:
        total = float(vals.max())
        if tails:
            total = max(total, _sup_tail(win, w, Bz))
        return total
    powsum = float(np.sum(vals ** p * mu))
    if tails:
        e = p * w.alpha_A + w.alpha_mu
        tt = w.t_A ** p * w.t_mu
        F = _tail_factor(e, tt, _branching(ev))
        leaf_part = float(np.sum((vals ** p * mu)[win.leaf]))
        if leaf_part > 0:
            powsum += leaf_part * F if F != math.inf else math.inf
        powsum += abs(Bz) ** p * ambient_power_sum(ev, e, tt, p)
    return powsum ** (1 / p) / mu[z] ** (1 / p)


def _branching(ev: KernelEvaluator):
    b = ev.m.below_branching
    return None if b is None else float(b)


def _sup_tail(win: Window, w: OperatorWeights, Bz: float) -> float:
    """Supremum of ``|A K B_z|`` below the leaves and on the ambient tree.

    Going one level down inside a leaf sector multiplies ``|A|`` by
    ``q**-alpha_A / t_A`` while ``K`` stays put, so the supremum there is the
    leaf value unless that factor exceeds 1.  Along the chain the values form
    a geometric sequence and the first chain level and block dominate.
    """
    ev = win.ev
    q = _branching(ev)
    step = (q ** -w.alpha_A if q is not None else 1.0) / w.t_A
    if step > 1 + THETA_TOL:
        return math.inf
    if ev.rooted:
        return 0.0
    m, k, la = ev.m, float(ev.sigma.base), ev.tree.top
    r = float(m.chain.ratio)
    if r ** w.alpha_A * w.t_A / (k * r) > 1 + THETA_TOL:
        return math.inf
    m1, m0 = float(m.chain_mass(1)), float(m.chain_mass(0))
    chain = m1 ** w.alpha_A * w.t_A ** (la + 1) * abs(float(ev.chain_above(1)))
    block = m0 ** w.alpha_A * w.t_A ** la * abs(float(ev.chain_not(1)))
    return max(chain, block) * abs(Bz)


def probe_levels(win: Window, policy: str = "level") -> list[int]:
    t = win.ev.tree
    if policy == "level":
        return [t.by_level[lv][0] for lv in range(t.bot, t.top + 1)]
    if policy == "bottom":
        return list(t.by_level[t.bot])
    if policy == "all":
        return list(range(t.n))
    raise ConfigurationError(f"unknown z policy {policy!r}")


@dataclass
class ProbeReport:
    params: ToeplitzParams
    operator: str
    depths: list
    ratios: list
    direct: list
    dual: list
    slope: float
    spread: float
    classification: str
    tau: float
    eps: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = asdict(self.params)
        return d


def norm_probe(params: ToeplitzParams, depths: Sequence[int], operator: str = "U", *,
               q: int | None = None, tau: float = 2.0, eps: float | None = None,
               z_policy: str = "level", tails: bool = True) -> ProbeReport:
    """Growth of delta-test lower bounds for ``||Op||`` on ``L^p(m.sigma_d)`` across window depths.

    For each depth the window is centred on level 0 and ``R_D`` is the largest
    of the direct ratio ``||Op delta_z||_p/||delta_z||_p`` and the dual ratio
    ``||Op* delta_z||_{p'}/||delta_z||_{p'}`` over one ``z`` per level (all
    ``z`` on a level are equivalent on homogeneous trees).  Norms include the
    closed-form tails below the leaves and above the apex, so each ``R_D`` is
    a certified lower bound for the norm on the infinite tree; a divergent
    tail gives ``R_D = inf``.

    Classification: ``growing`` if some ``R_D`` is infinite or the least-squares
    slope of ``log R_D`` against ``D`` exceeds ``eps`` (default
    ``0.05 log q``); otherwise ``stable`` if ``max R / min R < tau``;
    otherwise ``indeterminate``.
    """
    depths = list(depths)
    if not depths:
        raise ConfigurationError("empty depth list")
    if sorted(depths) != depths or len(set(depths)) != len(depths):
        raise ConfigurationError("depths must be strictly increasing")
    q = q or params.q
    if q is None:
        raise ConfigurationError("the probe family needs a branching number q")
    if eps is None:
        eps = 0.05 * math.log(q)
    w = operator_weights(params, operator)
    wstar = w.adjoint()
    p, pc = params.p, params.p_conj
    direct, dual = [], []
    for D in depths:
        win = homogeneous_window(q, D, float(params.k_c))
        zs = probe_levels(win, z_policy)
        direct.append(max(delta_ratio(win, w, p, z, tails) for z in zs))
        dual.append(max(delta_ratio(win, wstar, pc, z, tails) for z in zs))
    ratios = [max(a, b) for a, b in zip(direct, dual)]
    slope, spread = _fit(depths, ratios)
    if any(math.isinf(r) for r in ratios) or slope > eps:
        cls = "growing"
    elif spread < tau:
        cls = "stable"
    else:
        cls = "indeterminate"
    return ProbeReport(params, operator.upper(), depths, ratios, direct, dual, slope, spread, cls, tau, eps)


def _fit(depths, ratios):
    if any(math.isinf(r) for r in ratios):
        return math.inf, math.inf
    logs = np.log(np.asarray(ratios, dtype=float))
    if len(depths) < 2:
        return 0.0, 1.0
    slope = float(np.polyfit(np.asarray(depths, dtype=float), logs, 1)[0])
    return slope, float(max(ratios) / min(ratios))


# ---------------------------------------------------------------------------
# Schur test


@dataclass
class SchurReport:
    k_gamma: float
    row_max: float
    row_min: float
    col_max: float
    col_min: float
    divergent: bool

    @property
    def finite(self) -> bool:
        return not self.divergent and math.isfinite(self.row_max) and math.isfinite(self.col_max)


def schur_verify(params: ToeplitzParams, k_gamma: float, win: Window, *, check_interval: bool = True) -> SchurReport:
    """Row and column constants of the Schur test for ``V`` with ``h = k_gamma**level * m``.

    Rows: ``sum_y H(x,y) h(y)^{p'} mu(y) / h(x)^{p'}``; columns:
    ``sum_x H(x,y) h(x)^p mu(x) / h(y)^p`` with ``H(x,y) = m(x) k_a^l(x)
    |K_c(x,y)| (k_b/k_d)^l(y)``.  Sums run over the infinite tree: window,
    leaf sectors and the ambient tree in closed form.  A divergent tail
    (which happens exactly at the interval endpoints) sets ``divergent``.
    """
    p = params.p
    if p == 1:
        raise PreconditionError("the Schur test here is for p > 1")
    ev = win.ev
    if check_interval:
        dc = doubling_constants(ev.m)
        iv = schur_interval(params, float(dc.C_m), float(dc.D_m))
        if iv is None or not (_le(iv[0], k_gamma) and _le(k_gamma, iv[1])):
            raise PreconditionError("k_gamma lies outside the Schur interval")
    pc = params.p_conj
    ka, kb, kd = params.k_a, params.k_b, params.k_d
    t = ev.tree
    lev, m = win.lev, win.m
    n = t.n
    absK = np.vstack([np.abs(win.row(z)) for z in range(n)])
    A = m * ka ** lev
    Bw = (kb / kd) ** lev
    h = k_gamma ** lev * m
    mu = m * kd ** lev
    q = _branching(ev)
    # rows: y-weights m^{p'+1} (k_b k_gamma^{p'})^l
    e_row, t_row = pc + 1, kb * k_gamma ** pc
    wy = Bw * h ** pc * mu
    F_row = _tail_factor(e_row, t_row, q)
    row = absK @ wy
    leaf_cols = absK[:, win.leaf] @ wy[win.leaf]
    divergent = False
    if F_row == math.inf:
        divergent = True
        row = np.full(n, math.inf)
    else:
        row = row + leaf_cols * F_row
    amb_row = ambient_power_sum(ev, e_row, t_row, 1.0)
    if amb_row == math.inf:
        divergent = True
    row = A * (row + amb_row)
    rows = row / h ** pc
    # columns: x-weights m^{p+2} (k_a k_gamma^p k_d)^l
    e_col, t_col = p + 2, ka * k_gamma ** p * kd
    wx = A * h ** p * mu
    F_col = _tail_factor(e_col, t_col, q)
    col = absK.T @ wx
    if F_col == math.inf:
        divergent = True
        col = np.full(n, math.inf)
    else:
        col = col + absK[win.leaf, :].T @ wx[win.leaf] * F_col
    amb_col = ambient_power_sum(ev, e_col, t_col, 1.0)
    if amb_col == math.inf:
        divergent = True
    col = Bw * (col + amb_col)
    cols = col / h ** p
    return SchurReport(k_gamma, float(rows.max()), float(rows.min()),
                       float(cols.max()), float(cols.min()), divergent)


# ---------------------------------------------------------------------------
# sharp kernel estimate and weak (1,1)


def sharp_estimate_ratio(ev: KernelEvaluator, pairs: Iterable[tuple[int, int]] | None = None):
    """Extremes of ``|K(x,z)| sigma(level(x^z)) m(x^z)`` over the given (default: all) pairs."""
    sig, m, t = ev.sigma, ev.m, ev.tree
    if sig.kind != "exponential" or not sig.base > 1:
        raise PreconditionError("needs an exponential weight with base > 1")
    scale_a = [abs(ev.k_above[w]) * sig.sigma(t.levels[w]) * m.values[w] for w in range(t.n)]
    scale_n = [abs(ev.k_not[w]) * sig.sigma(t.levels[w]) * m.values[w] for w in range(t.n)]
    if pairs is None:
        pairs = ((x, y) for x in range(t.n) for y in range(x, t.n))
    lo = hi = None
    for x, y in pairs:
        w = t.confluent(x, y)
        v = scale_a[w] if (w == x or w == y) else scale_n[w]
        lo = v if lo is None or v < lo else lo
        hi = v if hi is None or v > hi else hi
    return lo, hi


def _weak11_regions(win: Window, ambient_terms: int):
    """The z-independent pieces: leaf-sector masses and ambient ``|K|`` values with their masses."""
    key = ("weak11", ambient_terms)
    if key in win.cache:
        return win.cache[key]
    ev = win.ev
    t, m, sig = ev.tree, ev.m, ev.sigma
    k = float(sig.base)
    lev = win.lev
    win.cache["mu"] = win.m * k ** lev
    leaf = np.flatnonzero(win.leaf)
    leaf_mass = win.m[leaf] * np.array([float(sig.S(int(lv) - 1)) for lv in lev[leaf]])
    cv, cm = [], []
    if not ev.rooted:
        la = t.top
        for n in range(1, ambient_terms + 1):
            mn, mp = float(m.chain_mass(n)), float(m.chain_mass(n - 1))
            cv += [abs(float(ev.chain_above(n))), abs(float(ev.chain_not(n)))]
            cm += [mn * k ** (la + n), (mn - mp) * float(sig.S(la + n - 1))]
    out = (leaf, leaf_mass, np.array(cv), np.array(cm))
    win.cache[key] = out
    return out


def weak11_ratio(win: Window, z: int, ambient_terms: int = 200) -> float:
    """``sup_lambda lambda * mu{|P delta_z| > lambda} / ||delta_z||_1`` on the infinite tree.

    ``P delta_z = K(., z) mu(z)`` is constant on each leaf sector, on each
    chain vertex and on each block ``O_n``; the supremum over ``lambda`` is
    attained just below one of these values, so it is the maximum over values
    ``v`` of ``v * mu{|P delta_z| >= v}``.  Ambient regions are included up to
    ``ambient_terms`` chain levels.
    """
    leaf, leaf_mass, amb_k, amb_mass = _weak11_regions(win, ambient_terms)
    mu_win = win.cache["mu"]
    muz = float(mu_win[z])
    row = np.abs(win.row(z)) * muz
    vals = [row, row[leaf], amb_k * muz]
    masses = [mu_win, leaf_mass, amb_mass]
    v = np.concatenate(vals)
    w = np.concatenate(masses)
    order = np.argsort(-v, kind="stable")
    v, w = v[order], w[order]
    cum = np.cumsum(w)
    # for ties, mu{|f| >= v} includes every region with that value
    last = np.r_[v[1:] != v[:-1], True]
    best = float(np.max(v[last] * cum[last]))
    return best / muz
