"""Verification suites: each checks one identity over a window and reports the worst deviation."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable

from .errors import ConfigurationError
from .harmonic import flow_invariance_check, laplacian, random_harmonic
from .kernel import (KernelEvaluator, psi_orthogonality, psi_pairing, reproduce, size_condition,
                     size_condition_direct)
from .measure import FlowMeasure, LevelWeight, lemexp2_ratio
from .toeplitz import sharp_estimate_ratio
from .tree import stratified_sample

SIZE_BOUND = 3
SHARP_RANGE = (Fraction(1, 10), Fraction(10))


@dataclass
class VerificationReport:
    suite: str
    cases: int = 0
    failures: int = 0
    max_abs_error: float = 0.0
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)
    sample: list | None = None
    extra: dict = field(default_factory=dict)

    def record(self, ok: bool, err=0):
        self.cases += 1
        if not ok:
            self.failures += 1
        err = abs(float(err))
        if err > self.max_abs_error:
            self.max_abs_error = err

    def equal(self, lhs, rhs, tol):
        if lhs == rhs:
            self.cases += 1
            return
        diff = lhs - rhs
        scale = max(abs(float(lhs)), abs(float(rhs)), 1.0)
        self.record(diff == 0 if tol == 0 else abs(float(diff)) <= tol * scale, diff)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SuiteOptions:
    functions: int = 10
    seed: int = 0
    chain_length: int = 12
    hormander_levels: int = 4
    sample_threshold: int = 2000
    per_level: int = 8
    float_tol: float = 1e-10
    lemexp2_p: int = 1


def _tol(m: FlowMeasure, opts: SuiteOptions):
    return 0 if m.exact else opts.float_tol


def _vertices(m: FlowMeasure, opts: SuiteOptions, report: VerificationReport) -> list[int]:
    t = m.tree
    if t.n <= opts.sample_threshold:
        return list(range(t.n))
    sample = stratified_sample(t, opts.per_level, opts.seed)
    report.sample = sample
    return sample


def suite_laplacian(m, sigma, opts, rep):
    tol = _tol(m, opts)
    for i in range(opts.functions):
        f = random_harmonic(m, opts.seed + i)
        for x in m.tree.internal:
            rep.equal(laplacian(f, x, m), 0, tol)


def suite_flow(m, sigma, opts, rep):
    tol = _tol(m, opts)
    t = m.tree
    for i in range(opts.functions):
        f = random_harmonic(m, opts.seed + i)
        for x in _vertices(m, opts, rep):
            for n in range(t.levels[x] - t.bot + 1):
                lhs, rhs = flow_invariance_check(f, x, n)
                rep.equal(lhs, rhs, tol)


def suite_pairing(m, sigma, opts, rep):
    tol = _tol(m, opts)
    for i in range(opts.functions):
        f = random_harmonic(m, opts.seed + i)
        for x in _vertices(m, opts, rep):
            lhs, rhs = psi_pairing(f, x, sigma)
            rep.equal(lhs, rhs, tol)


def suite_orthogonality(m, sigma, opts, rep):
    tol = _tol(m, opts)
    t = m.tree
    vs = {t.by_level[lv][0] for lv in range(t.bot, t.top + 1)}
    vs.update(t.by_level[t.bot][-1:])
    for v in sorted(vs):
        for j in range(opts.chain_length + 1):
            for k in range(j):
                rep.equal(psi_orthogonality(m, sigma, v, j, k), 0, tol)


def suite_symmetry(m, sigma, opts, rep, ev=None):
    ev = ev or KernelEvaluator(m, sigma)
    tol = _tol(m, opts)
    t = m.tree
    vs = _vertices(m, opts, rep)
    rows = {v: ev.kernel_row(v) for v in vs}
    classes: dict = {}
    for x in vs:
        for y in vs:
            kxy = rows[x][y]
            rep.equal(kxy, rows[y][x], tol)
            w = t.confluent(x, y)
            key = (w, w == x or w == y)
            classes.setdefault(key, kxy)
            rep.equal(kxy, classes[key], tol)


def suite_reproducing(m, sigma, opts, rep, ev=None):
    ev = ev or KernelEvaluator(m, sigma)
    tol = _tol(m, opts)
    vs = _vertices(m, opts, rep)
    for i in range(opts.functions):
        f = random_harmonic(m, opts.seed + i)
        lhs, rhs = reproduce(ev, f)
        for v in vs:
            rep.equal(lhs[v], rhs[v], tol)


def suite_hormander(m, sigma, opts, rep, ev=None):
    """``K(z, .)`` is constant on ``T_u`` for every ``z`` outside ``T_u``."""
    ev = ev or KernelEvaluator(m, sigma)
    tol = _tol(m, opts)
    t = m.tree
    zs = _vertices(m, opts, rep)
    rows = {}
    for lv in range(t.top - 1, max(t.top - opts.hormander_levels, t.bot) - 1, -1):
        for u in t.by_level[lv]:
            for z in zs:
                if t.in_sector(z, u):
                    continue
                row = rows.get(z) or rows.setdefault(z, ev.kernel_row(z))
                ref = row[u]
                for x in t.sector(u):
                    rep.equal(row[x], ref, tol)


def suite_size(m, sigma, opts, rep, ev=None):
    ev = ev or KernelEvaluator(m, sigma)
    t = m.tree
    worst = 0
    for u in range(t.n):
        val = size_condition(ev, u)
        direct = size_condition_direct(ev, u, u)
        worst = max(worst, val)
        err = val - direct
        ok_eq = err == 0 if m.exact else abs(float(err)) <= opts.float_tol * max(1.0, float(val))
        for _x in t.sector(u):
            rep.record(val <= SIZE_BOUND and ok_eq, err)
    rep.extra["max_size"] = float(worst)


def suite_sharp(m, sigma, opts, rep, ev=None):
    ev = ev or KernelEvaluator(m, sigma)
    vs = _vertices(m, opts, rep)
    lo, hi = sharp_estimate_ratio(ev, ((x, y) for i, x in enumerate(vs) for y in vs[i:]))
    rep.extra.update(min_ratio=float(lo), max_ratio=float(hi))
    rep.record(lo >= SHARP_RANGE[0])
    rep.record(hi <= SHARP_RANGE[1])


def suite_lemexp2(m, sigma, opts, rep):
    """Ratios lie in ``[1, inf)``; for ``p = 1`` the flow identity makes them exactly ``k/(k-1)``."""
    if sigma.kind != "exponential":
        raise ConfigurationError("the lemexp2 suite needs an exponential weight")
    k = sigma.base
    for y in _vertices(m, opts, rep):
        res = lemexp2_ratio(m, y, k, opts.lemexp2_p)
        ok = not res.diverges and res.ratio >= 1
        err = 0
        if opts.lemexp2_p == 1:
            err = res.ratio - k / (k - 1)
            ok = ok and (err == 0 if m.exact else abs(float(err)) <= opts.float_tol)
        rep.record(ok, err)


SUITES: dict[str, Callable] = {
    "laplacian": suite_laplacian,
    "flow": suite_flow,
    "pairing": suite_pairing,
    "orthogonality": suite_orthogonality,
    "symmetry": suite_symmetry,
    "reproducing": suite_reproducing,
    "hormander": suite_hormander,
    "size": suite_size,
    "sharp-estimate": suite_sharp,
    "lemexp2": suite_lemexp2,
}


def run_suite(name: str, m: FlowMeasure, sigma: LevelWeight, opts: SuiteOptions | None = None,
              config: dict | None = None) -> VerificationReport:
    if name not in SUITES:
        raise ConfigurationError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    opts = opts or SuiteOptions()
    if not m.tree.internal and (m.tree.mode == "section3" or name != "symmetry"):
        raise ConfigurationError("the window has no internal vertices")
    rep = VerificationReport(name, config=dict(config or {}, options=asdict(opts)))
    start = time.perf_counter()
    SUITES[name](m, sigma, opts, rep)
    rep.wall_time = time.perf_counter() - start
    return rep
