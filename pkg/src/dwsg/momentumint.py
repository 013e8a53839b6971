"""Momentum and resolvent-parameter integrals of coincidence symbols.

For r = 1 the basic integral is

    J[k^(2p) k_a1..k_a2s (k^2-lam)^-l ((1-a)k^2-lam)^-m]
      = g_{(a1..a2s)} (4 pi)^(-n/2) (n/2+s)_p / (2^s (l+m-1)!) F(m, n/2+p+s; l+m; a)

where g_{(...)} is the sum over all pairings.  The (4 pi)^(-n/2) prefactor
is dropped throughout (display convention).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial

import mpmath

from .coeffring import QAN, RING, A, N, ONE, ParamScalar, pochhammer, rat
from .jets import JPoly
from .tensor import G, K, KMARK, TensorPoly
from .tensor.core import canon, perfect_matchings

_PAIR0 = 600


class MomentumIntError(RuntimeError):
    pass


class UnsupportedReductionError(MomentumIntError):
    pass


@dataclass(frozen=True)
class HyperF:
    """``F(m, n/2 + b_shift; c; a)``."""

    m: int
    b_shift: int
    c: int

    def __post_init__(self):
        if self.m < 0 or self.c < 1 or self.c < self.m:
            raise UnsupportedReductionError(f"parameter pattern {self} outside the supported family")

    @property
    def b(self):
        return N / 2 + self.b_shift


def _prudnikov(b_shift: int, c: int) -> ParamScalar:
    """F(1, b; c; a) = (c-1)! (-a)^(1-c) / (1-b)_(c-1) [(1-a)^(c-b-1) - sum_k (b-c+1)_k a^k / k!]."""
    b = N / 2 + b_shift
    if c == 1:
        pref = ONE
    else:
        pref = QAN(factorial(c - 1)) / (-A) ** (c - 1)
    pref = pref / pochhammer(1 - b, c - 1)
    tail = QAN(0)
    for k in range(c - 1):
        tail += pochhammer(b - c + 1, k) * A**k / factorial(k)
    # (1-a)^(c-b-1) = (1-a)^(c - b_shift - 1 - n/2)
    return ParamScalar.half_power(pref, c - b_shift - 1, 1) - ParamScalar.rational(pref * tail)


@lru_cache(maxsize=None)
def _reduce(m: int, b_shift: int, c: int) -> ParamScalar:
    if m == 0:
        return ParamScalar.rational(1)
    if m == 1:
        return _prudnikov(b_shift, c)
    # Gauss: (c-al) F(al-1) + (2al - c + (b-al) z) F(al) + al (z-1) F(al+1) = 0, al = m-1
    al = m - 1
    b = N / 2 + b_shift
    f0 = _reduce(al - 1, b_shift, c)
    f1 = _reduce(al, b_shift, c)
    num = f0 * ParamScalar.rational(QAN(c - al)) + f1 * ParamScalar.rational(2 * al - c + (b - al) * A)
    return num * ParamScalar.rational(ONE / (al * (1 - A)))


def reduce_f(f: HyperF) -> ParamScalar:
    return _reduce(f.m, f.b_shift, f.c)


@lru_cache(maxsize=None)
def integral_scalar(p: int, s: int, l: int, m: int) -> ParamScalar:
    """Scalar of J for ``k^(2p) k^(2s)-tensor / D(l, m)`` (pairing sum excluded)."""
    if l < 0 or m < 0 or l + m < 1 or p < 0:
        raise MomentumIntError(f"invalid integrand pattern p={p} s={s} l={l} m={m}")
    base = pochhammer(N / 2 + s, p) / (2**s * factorial(l + m - 1))
    return ParamScalar.rational(base) * reduce_f(HyperF(m, p + s, l + m))


# ---------------------------------------------------------------- tensor part

def _k_sites(mono):
    sites = []
    for ai, (kind, d, s) in enumerate(mono):
        if kind == K:
            sites.append(("k", ai, s[0]))
            continue
        for di, x in enumerate(d):
            if x == KMARK:
                sites.append(("d", ai, di))
        for si, x in enumerate(s):
            if x == KMARK:
                sites.append(("s", ai, si))
    return sites


@lru_cache(maxsize=200000)
def pair_momenta(mono) -> tuple:
    """Replace the 2s momentum factors by the pairing sum.

    Returns ``(s, ((mono', sign, npow), ...))``; odd counts give ``(None, ())``.
    """
    sites = _k_sites(mono)
    if len(sites) % 2:
        return None, ()
    s = len(sites) // 2
    if s == 0:
        return 0, ((mono, 1, 0),)
    acc: dict = {}
    for match in perfect_matchings(list(range(len(sites)))):
        atoms = [list(a) for a in mono]
        for a in atoms:
            a[1] = list(a[1])
            a[2] = list(a[2])
        drop = set()
        extra = []
        lab = _PAIR0
        for i, j in match:
            si, sj = sites[i], sites[j]
            if si[0] == "k" and sj[0] == "k":
                extra.append((G, (), (si[2], sj[2])))
                drop.update((si[1], sj[1]))
                continue
            if si[0] == "k":
                si, sj = sj, si
            if sj[0] == "k":
                target = sj[2]
                drop.add(sj[1])
            else:
                target = lab
                lab += 1
                atoms[sj[1]][1 if sj[0] == "d" else 2][sj[2]] = target
            atoms[si[1]][1 if si[0] == "d" else 2][si[2]] = target
        new = tuple((a[0], tuple(a[1]), tuple(a[2])) for idx, a in enumerate(atoms) if idx not in drop)
        mm, sign, npow, kpow = canon(new + tuple(extra))
        if sign == 0:
            continue
        if kpow:
            raise MomentumIntError("momentum survived the pairing")
        key = (mm, npow)
        v = acc.get(key, 0) + sign
        if v:
            acc[key] = v
        else:
            acc.pop(key)
    return s, tuple((mm, c, npow) for (mm, npow), c in sorted(acc.items()))


def integrate_term(mono, p: int, l: int, m: int, coeff=ONE) -> TensorPoly:
    """J of a single symbol term; ``coeff`` is a polynomial in a, n."""
    s, pairs = pair_momenta(mono)
    out = TensorPoly()
    if s is None:
        return out
    sc = integral_scalar(p, s, l, m) * ParamScalar.rational(QAN(coeff))
    for mm, c, npow in pairs:
        out.add_term(mm, sc * ParamScalar.rational(c * N**npow))
    return out


def group_integrands(jp: JPoly) -> dict:
    """Pair the momenta and collect coefficients per (monomial, integral pattern)."""
    grouped: dict = {}
    for (mono, p, l, m), c in jp.items():
        s, pairs = pair_momenta(mono)
        if s is None:
            continue
        for mm, sign, npow in pairs:
            key = (mm, p, s, l, m)
            v = c * sign
            if npow:
                v = v * RING.gens[1] ** npow
            prev = grouped.get(key)
            v = v if prev is None else prev + v
            if v:
                grouped[key] = v
            else:
                grouped.pop(key, None)
    by_mono: dict = {}
    for (mm, p, s, l, m), c in grouped.items():
        by_mono.setdefault(mm, []).append(((p, s, l, m), c))
    return by_mono


def assemble(items) -> dict:
    """Sum ``c * J(pattern)`` over a common denominator; returns q -> (numer, denom) reduced."""
    parts: dict = {}
    for pat, c in items:
        for q, r in integral_scalar(*pat).sectors.items():
            parts.setdefault(q, []).append((c * r.numer, r.denom))
    sectors = {}
    for q, lst in sorted(parts.items()):
        den = RING.one
        for _, d in lst:
            den = _lcm(den, d)
        num = RING.zero
        for cn, d in lst:
            num += cn * den.exquo(d)
        if num:
            num, den = num.cancel(den)
            sectors[q] = (num, den)
    return sectors


def scalar_from_sectors(sectors: dict) -> ParamScalar:
    return ParamScalar({q: QAN.raw_new(num, den) for q, (num, den) in sectors.items()})


def integrate(jp: JPoly) -> TensorPoly:
    """J of a sum of symbol terms, grouping equal integrals before reduction."""
    out = TensorPoly()
    for mm, items in group_integrands(jp).items():
        out.add_term(mm, scalar_from_sectors(assemble(items)))
    return out


_LCM: dict = {}


def _lcm(x, y):
    key = (x, y)
    hit = _LCM.get(key)
    if hit is None:
        hit = _LCM[key] = x.lcm(y)
    return hit


def odd_part_present(jp: JPoly) -> bool:
    return any(len(_k_sites(mono)) % 2 == 0 for (mono, _, _, _) in jp)


# ---------------------------------------------------------------- numeric oracle

def numeric_integral(p: int, s: int, l: int, m: int, a, n: int, dps: int = 50):
    """Independent evaluation of :func:`integral_scalar` by quadrature.

    The resolvent powers become Schwinger time integrals; the lam contour
    then fixes the total time, and the remaining Feynman-parameter integral
    is a Kummer function.  The angular average of k_a1...k_a2s leaves
    |k|^(2s) / (n (n+2) ... (n+2s-2)) and the radial integral is done by
    quadrature.
    """
    with mpmath.workdps(dps + 15):
        a = mpmath.mpf(Fraction(a).numerator) / Fraction(a).denominator
        half = mpmath.mpf(n) / 2
        ang = mpmath.mpf(1)
        for j in range(s):
            ang *= n + 2 * j
        # the pairing sum is excluded: each term of g_(...) carries weight 1
        ang = 1 / ang

        def lam_int(K):
            # int_0^1 du u^(l-1) (1-u)^(m-1) exp(-K(1 - a(1-u))) / (G(l) G(m))
            if m == 0:
                return mpmath.exp(-K) / mpmath.gamma(l)
            return mpmath.exp(-(1 - a) * K) * mpmath.hyp1f1(l, l + m, -a * K) / mpmath.gamma(l + m)

        pw = half - 1 + p + s
        radial = mpmath.quad(lambda K: K**pw * lam_int(K), [0, 1, 10, mpmath.inf])
        return +(ang * radial / mpmath.gamma(half))
