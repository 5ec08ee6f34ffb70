"""The Bergman kernel of ``B^2(m.sigma)`` and tools built on it.

``K(x, y)`` only depends on the confluent ``w = x ^ y`` and on whether one
vertex lies above the other.  Writing ``m_n`` and ``S_n`` for the mass and
cumulative weight of ``p^n(w)``,

    K_above(w) = sum_{n >= 0} (1/S_n) (1/m_n - 1/m_{n+1})
    K_not(w)   = K_above(w) - 1 / (S(level(w) - 1) m(w))

and ``K_above(w) = (1/S_0)(1/m(w) - 1/m(p(w))) + K_above(p(w))``, so one
top-down sweep from the apex fills both tables.  The only infinite sum left is
the one along the ancestor chain of the apex, which is done in closed form for
an exponential weight with a geometric chain and otherwise truncated with the
telescoping bound ``sum_{n >= N} ... <= 1/(S_N m_N)``.

Vertices above the apex are addressed by chain index ``n >= 1`` (``c_n =
p^n(apex)``); ``O_n`` is the strict sector of ``c_n`` minus the sector of
``c_{n-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AssumptionViolation, CannotCertify, PreconditionError
from .functions import TreeFunction, as_tree_function, inner, integrate
from .harmonic import HarmonicFunction, gradient, laplacian
from .measure import FlowMeasure, LevelWeight, sector_mass
from .scalars import EXACT

MAX_TAIL_TERMS = 100_000


class KernelEvaluator:
    """Tables of ``K_above``/``K_not`` for every window vertex and the chain.

    ``rooted=True`` treats the apex as the root of a rooted tree: there is no
    chain and ``K_above(apex)`` is the constant ``1/(m.sigma(T_apex))``.
    """

    def __init__(self, m: FlowMeasure, sigma: LevelWeight, tail_tol=None, rooted: bool = False):
        self.m = m
        self.sigma = sigma
        self.tree = m.tree
        self.rooted = rooted
        self.exact = m.exact
        if tail_tol is None:
            tail_tol = Fraction(1, 10 ** 40) if self.exact else 1e-17
        self.tail_tol = tail_tol
        self._A: dict[int, tuple] = {}
        t = self.tree
        if rooted:
            s = sigma.S(t.top)
            if not s > 0:
                raise AssumptionViolation("rooted kernel needs a positive total weight")
            top_above, self.certified_error = 1 / (m.m0 * s), 0 * s
        else:
            top_above, self.certified_error = self.chain_above_with_error(0)
        S = sigma.S
        vals = m.values
        lev = t.levels
        k_above = [None] * t.n
        k_not = [None] * t.n
        for x in range(t.n):
            par = t.parent[x]
            if par < 0:
                k_above[x] = top_above
            else:
                k_above[x] = (1 / vals[x] - 1 / vals[par]) / S(lev[x]) + k_above[par]
            s_strict = S(lev[x] - 1)
            if not s_strict > 0:
                raise AssumptionViolation(f"weight vanishes below level {lev[x]}")
            k_not[x] = k_above[x] - 1 / (s_strict * vals[x])
        self.k_above = k_above
        self.k_not = k_not

    # -- chain -------------------------------------------------------------
    def _chain_term(self, j: int):
        m = self.m
        return (1 / m.chain_mass(j) - 1 / m.chain_mass(j + 1)) / self.sigma.S(self.tree.top + j)

    def chain_above_with_error(self, n: int):
        """``(K_above(c_n), certified error)``; ``n = 0`` is the apex."""
        if self.rooted:
            raise PreconditionError("rooted kernels have no ancestor chain")
        if n in self._A:
            return self._A[n]
        sig, ch = self.sigma, self.m.chain
        g = ch.geometric_from
        if sig.kind == "exponential":
            start = max(n, g)
            val = sum((self._chain_term(j) for j in range(n, start)), 0 * self.m.m0)
            r, k = ch.ratio, sig.base
            if r != 1:
                val += self._chain_term(start) * (k * r) / (k * r - 1)
            out = (val, 0 * val)
        else:
            out = self._truncated(n)
        self._A[n] = out
        return out

    def _truncated(self, n: int):
        m, sig = self.m, self.sigma
        if m.chain.ratio == 1:
            # masses are constant from the end of the table on, so terms vanish
            stop = max(n, m.chain.geometric_from)
            val = sum((self._chain_term(j) for j in range(n, stop)), 0 * m.m0)
            return val, 0 * val
        val = 0 * m.m0
        scale = 1 / (sig.S(self.tree.top) * m.m0)
        tol = self.tail_tol * scale
        j = n
        while True:
            bound = 1 / (sig.S(self.tree.top + j) * m.chain_mass(j))
            if bound <= tol:
                return val, bound
            if j - n > MAX_TAIL_TERMS:
                raise CannotCertify("chain tail does not reach the requested tolerance")
            val += self._chain_term(j)
            j += 1

    def chain_above(self, n: int):
        return self.chain_above_with_error(n)[0]

    def chain_not(self, n: int):
        """``K_not(c_n)``: value of ``K`` between ``c_{n-1}``'s sector and ``O_n``."""
        m = self.m
        return self.chain_above(n) - 1 / (self.sigma.S(self.tree.top + n - 1) * m.chain_mass(n))

    # -- evaluation ------------------------------------------------------------
    def kernel(self, x: int, y: int):
        w = self.tree.confluent(x, y)
        return self.k_above[w] if (w == x or w == y) else self.k_not[w]

    __call__ = kernel

    def kernel_with_error(self, x: int, y: int):
        return self.kernel(x, y), self.certified_error

    def kernel_row(self, v: int) -> list:
        """``[K(v, y) for y in window]`` by slice assignment along the ancestors of ``v``."""
        t = self.tree
        row = [None] * t.n
        size = t.size
        for a in reversed(t.ancestors(v)):
            row[a:a + size[a]] = [self.k_not[a]] * size[a]
            row[a] = self.k_above[a]
        row[v:v + size[v]] = [self.k_above[v]] * size[v]
        return row

    def kernel_matrix(self) -> np.ndarray:
        return np.array([[float(k) for k in self.kernel_row(v)] for v in range(self.tree.n)])

    def section(self, v: int, extent: int = 0) -> TreeFunction:
        """``K(v, .)`` with leaf tails and chain/block values for ``n <= extent``."""
        row = self.kernel_row(v)
        t = self.tree
        chain = {} if self.rooted else {n: self.chain_above(n) for n in range(1, extent + 1)}
        blocks = {} if self.rooted else {n: self.chain_not(n) for n in range(1, extent + 1)}
        return TreeFunction(tuple(row), {w: row[w] for w in t.leaves}, chain, blocks)

    def kernel_termwise(self, x: int, y: int, N: int):
        """Partial sum of the defining series over ``n < N`` and its tail bound.

        Returns ``(partial, bound)``; once ``p^N(x)`` lies above ``x ^ y`` the
        neglected tail is at most ``1/(S_{N,x} m(p^N(x)))``.
        """
        t, m, S = self.tree, self.m, self.sigma.S
        anc = t.ancestors(x)
        depth = len(anc) - 1
        lx = t.levels[x]

        def mass(n):
            return m.values[anc[n]] if n <= depth else m.chain_mass(n - depth)

        total = 0 * m.m0
        for n in range(N):
            if n + 1 <= depth:
                val = psi(t, m, anc[n + 1], anc[n], y)
            else:
                # p^{n+1}(x) is on the chain; every window vertex lies in the sector of p^n(x)
                val = 1 / mass(n) - 1 / mass(n + 1)
            total += val / S(lx + n)
        return total, 1 / (S(lx + N) * mass(N))

    # -- aggregation -------------------------------------------------------------
    def apply(self, f, absolute: bool = False) -> list:
        """``[sum_y K(x, y) f(y) m(y) sigma(y) for x in window]`` over the whole tree.

        Sector sums of ``f.m.sigma`` are accumulated once, after which each
        vertex costs O(1): contributions from outside ``T_x`` are pushed down
        from the parent.  ``absolute`` uses ``|K|`` instead of ``K``.
        """
        t, m, sig = self.tree, self.m, self.sigma
        f = as_tree_function(f, t.n)
        ka, kn = self.k_above, self.k_not
        if absolute:
            ka = [abs(v) for v in ka]
            kn = [abs(v) for v in kn]
        zero = 0 * m.m0
        F = [f.values[x] * m.values[x] * sig.sigma(t.levels[x]) if f.values[x] else zero
             for x in range(t.n)]
        G = list(F)
        for w, v in f.tail.items():
            if v:
                G[w] += v * m.values[w] * sig.S(t.levels[w] - 1)
        for x in reversed(range(1, t.n)):
            G[t.parent[x]] += G[x]
        up = [None] * t.n
        up[0] = self._chain_contribution(f, absolute)
        for x in range(1, t.n):
            a = t.parent[x]
            up[x] = up[a] + ka[a] * F[a] + kn[a] * (G[a] - G[x] - F[a])
        return [ka[x] * G[x] + up[x] for x in range(t.n)]

    def _chain_contribution(self, f: TreeFunction, absolute: bool):
        zero = 0 * self.m.m0
        if self.rooted or (not f.chain and not f.blocks):
            return zero
        m, sig, top = self.m, self.sigma, self.tree.top
        total = zero
        for n, v in f.chain.items():
            if v:
                k = self.chain_above(n)
                total += (abs(k) if absolute else k) * v * m.chain_mass(n) * sig.sigma(top + n)
        for n, v in f.blocks.items():
            if v:
                k = self.chain_not(n)
                total += (abs(k) if absolute else k) * v * (m.chain_mass(n) - m.chain_mass(n - 1)) * sig.S(top + n - 1)
        return total


# ---------------------------------------------------------------------------
# Psi


def psi(t, m: FlowMeasure, v: int, z: int, x: int):
    """``Psi(v, z, x)`` for window vertices."""
    if x == v or z == v or not (t.in_sector(x, v) and t.in_sector(z, v)):
        return 0 * m.m0
    cx = t.child_toward(v, x)
    if t.in_sector(z, cx):
        return 1 / m.values[cx] - 1 / m.values[v]
    return -1 / m.values[v]


def psi_function(m: FlowMeasure, v: int, n: int) -> TreeFunction:
    """``Psi(p^{n+1}(v), p^n(v), .)`` on the whole tree, ``p^j(v)`` continuing up the chain."""
    t = m.tree
    zero = 0 * m.m0
    d = t.top - t.levels[v]
    if n + 1 <= d:
        anc = t.ancestors(v)
        V, Z = anc[n + 1], anc[n]
        a = 1 / m.values[Z] - 1 / m.values[V]
        b = -1 / m.values[V]
        vals = [zero] * t.n
        for y in t.sector(V):
            if y != V:
                vals[y] = a if t.in_sector(y, Z) else b
        tail = {w: vals[w] for w in t.leaves if t.in_sector(w, V)}
        return TreeFunction(tuple(vals), tail)
    j = n + 1 - d  # V = c_j, Z = c_{j-1}
    mz, mv = m.chain_mass(j - 1), m.chain_mass(j)
    a = 1 / mz - 1 / mv
    b = -1 / mv
    return TreeFunction(tuple([a] * t.n), {w: a for w in t.leaves},
                        {i: a for i in range(1, j)},
                        {**{i: a for i in range(1, j)}, j: b})


def psi_pairing(f: HarmonicFunction, x: int, sigma: LevelWeight):
    """``(<f, Psi(p(x), x, .)>, S_x(sigma) grad f(x))``."""
    m = f.measure
    lhs = inner(f, psi_function(m, x, 0), m, sigma)
    return lhs, sigma.S(m.tree.levels[x]) * gradient(f, x)


def psi_orthogonality(m: FlowMeasure, sigma: LevelWeight, v: int, j: int, k: int):
    """``<Psi(p^{k+1}(v), p^k(v), .), Psi(p^{j+1}(v), p^j(v), .)>``."""
    return inner(psi_function(m, v, k), psi_function(m, v, j), m, sigma)


def psi_norm_closed(m: FlowMeasure, sigma: LevelWeight, v: int, j: int):
    """``||Psi(p^{j+1}(v), p^j(v), .)||^2`` from the sector-mass formula."""
    t = m.tree
    d = t.top - t.levels[v]
    if j + 1 <= d:
        anc = t.ancestors(v)
        mj, mj1 = m.values[anc[j]], m.values[anc[j + 1]]
    else:
        mj, mj1 = m.chain_mass(j - d), m.chain_mass(j + 1 - d)
    S = sigma.S(t.levels[v] + j)
    return S * mj * (1 / mj - 1 / mj1) ** 2 + S * (mj1 - mj) / mj1 ** 2


# ---------------------------------------------------------------------------
# rooted variant


def rooted_constant(m: FlowMeasure, sigma: LevelWeight):
    return 1 / sector_mass(m.tree.apex, m, sigma)


def kernel_rooted(m: FlowMeasure, sigma: LevelWeight, x: int, y: int):
    """``K_o(x, y)`` by its defining finite sum, the apex acting as root ``o``."""
    t = m.tree
    total = rooted_constant(m, sigma)
    anc = t.ancestors(x)
    lx = t.levels[x]
    for n in range(len(anc) - 1):
        total += psi(t, m, anc[n + 1], anc[n], y) / sigma.S(lx + n)
    return total


# ---------------------------------------------------------------------------
# projection and checks


def project(ev: KernelEvaluator, f, x: int | None = None):
    """``Pf(x)`` (or the list over the window when ``x`` is None)."""
    out = ev.apply(f)
    return out if x is None else out[x]


def reproduce(ev: KernelEvaluator, f: HarmonicFunction, v: int | None = None):
    """``(<f, K(v, .)>, f(v))``; with ``v`` None, both lists over the window."""
    vals = ev.apply(f)
    if v is None:
        return vals, list(f.values)
    return vals[v], f.values[v]


def hormander_check(ev: KernelEvaluator, u: int, x: int, y: int, zs: Iterable[int] | None = None) -> bool:
    t = ev.tree
    if not (t.in_sector(x, u) and t.in_sector(y, u)):
        raise PreconditionError("x and y must lie in T_u")
    if zs is None:
        zs = (z for z in range(t.n) if not t.in_sector(z, u))
    for z in zs:
        if t.in_sector(z, u):
            continue
        if ev.kernel(z, x) != ev.kernel(z, y):
            return False
    return True


def size_condition(ev: KernelEvaluator, u: int, x: int | None = None):
    """``sum_{z in T_{p(u)} \\ T_u} |K(x, z)| m(z) sigma(z)`` for ``x`` in ``T_u``.

    For such ``x`` the confluent with ``z`` is always ``p(u)``, so the sum is
    ``|K_above(p(u))| mu(p(u)) + |K_not(p(u))| (m(p(u)) - m(u)) S(level(u))``
    and does not depend on ``x``.  For ``u`` the apex, ``p(u)`` is the first
    chain vertex.
    """
    t, m, sig = ev.tree, ev.m, ev.sigma
    if x is not None and not t.in_sector(x, u):
        raise PreconditionError("x must lie in T_u")
    lu = t.levels[u]
    par = t.parent[u]
    if par < 0:
        if ev.rooted:
            raise PreconditionError("the root has no predecessor")
        ka, kn, mp = ev.chain_above(1), ev.chain_not(1), m.chain_mass(1)
    else:
        ka, kn, mp = ev.k_above[par], ev.k_not[par], m.values[par]
    return abs(ka) * mp * sig.sigma(lu + 1) + abs(kn) * (mp - m.values[u]) * sig.S(lu)


def size_condition_direct(ev: KernelEvaluator, u: int, x: int):
    """The same sum taken vertex by vertex over the window plus leaf tails."""
    t, m, sig = ev.tree, ev.m, ev.sigma
    par = t.parent[u]
    if par < 0:
        return size_condition(ev, u, x)
    total = 0 * m.m0
    for z in t.sector(par):
        if t.in_sector(z, u):
            continue
        k = abs(ev.kernel(x, z))
        total += k * m.values[z] * sig.sigma(t.levels[z])
        if not t.children[z]:
            total += k * m.values[z] * sig.S(t.levels[z] - 1)
    return total


def selfadjoint_check(ev: KernelEvaluator, f: Mapping[int, object], g: Mapping[int, object]):
    """``(<Pf, g>, <f, Pg>)`` for finitely supported ``f, g``."""
    n = ev.tree.n
    pf = TreeFunction(tuple(ev.apply(f)))
    pg = TreeFunction(tuple(ev.apply(g)))
    return inner(pf, g, ev.m, ev.sigma), inner(f, pg, ev.m, ev.sigma)


def projection_function(ev: KernelEvaluator, f, extent: int = 0) -> TreeFunction:
    """``Pf`` on the whole tree for finitely supported ``f``.

    ``Pf`` is constant on each leaf sector, and on the chain equals
    ``K_above(c_n) * sum(f mu)`` (``K_not(c_n) * sum(f mu)`` on ``O_n``).
    """
    t = ev.tree
    vals = ev.apply(f)
    ftf = as_tree_function(f, t.n)
    mass = integrate(ftf, ev.m, ev.sigma)
    chain = {n: ev.chain_above(n) * mass for n in range(1, extent + 1)}
    blocks = {n: ev.chain_not(n) * mass for n in range(1, extent + 1)}
    return TreeFunction(tuple(vals), {w: vals[w] for w in t.leaves}, chain, blocks)


def section_laplacian(ev: KernelEvaluator, v: int) -> list:
    """``[laplacian(K(v, .), x) for internal x]``."""
    row = ev.kernel_row(v)
    return [laplacian(row, x, ev.m) for x in ev.tree.internal]
