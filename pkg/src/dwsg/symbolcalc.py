"""Amplitude recursion of the resolvent symbol and its coincidence limits.

The amplitude sigma_m of order m satisfies

    A sigma_m + i B1 sigma_(m-1) + B0 sigma_(m-2) = 0,

with A the principal symbol at p = D l.  We work with the real amplitudes
``Y_m = i^(-m) sigma_m`` for which ``A Y_m + B1 Y_(m-1) - B0 Y_(m-2) = 0``.

Two independent evaluation strategies are provided:

* :class:`JetSolver` computes coincidence jets ``[D_S Y_m]`` directly,
  expanding derivatives of the inverse principal symbol with Faa di Bruno's
  formula in the momentum variable.  This is the production route.
* :func:`solve_sigma` + :func:`take_coincidence` build the full two-point
  amplitude with an opaque inverse symbol (derivative rule
  ``D Ainv = -Ainv (D A) Ainv``) and only then substitute coincidence limits.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

from .coeffring import PA, PN, RING
from .colim import CoinLimitTable, load_or_build
from .jets import JPoly, add_atoms, from_limit, mul, mul_into, relabeled
from .tensor import AINV, G, I, K, L, R, W, X, TensorPoly
from .tensor.core import canon, join, labels_of, relabel

ROW = 80  # x-index of the amplitude
COL = 81  # x'-index
_AL, _BE, _DD = 70, 71, 72  # template labels alpha, beta, d
_XB = 300  # momentum-derivative labels inside Faa di Bruno blocks
_AC = 82  # second index of the generic inverse symbol
_SHARED0 = 100  # labels for contractions between factors at coincidence

ONE = RING.one
MAX_ORDER = 6


class SymbolCalcError(RuntimeError):
    pass


class ResourceError(SymbolCalcError):
    pass


class RealityError(SymbolCalcError):
    """An odd power of i survived into a coefficient that must be real."""


# ---------------------------------------------------------------- operator

@dataclass(frozen=True)
class OperatorSpec:
    kind: str = "nonminimal"
    with_x: bool = True
    order: int = 2

    def __post_init__(self):
        if self.kind not in ("minimal", "nonminimal"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.order != 2:
            raise SymbolCalcError(f"operators of order {self.order} are not supported")

    @property
    def gauge(self):
        return PA if self.kind == "nonminimal" else RING.zero


@dataclass(frozen=True)
class RecTerm:
    """``coeff * [g(alpha,beta)] * [D_lseq l | D_xseq X(alpha,beta)] * D_sseq sigma_(row)``.

    Labels are the template labels alpha, beta, d.  ``row`` names the row
    index of sigma; ``metric`` requests g(alpha, row) (realised by renaming).
    """

    coeff: object
    lseq: tuple | None
    sseq: tuple
    row: int
    x: bool = False


@dataclass(frozen=True)
class Piece:
    degree: int  # how many orders below the leading one it acts
    imaginary: bool
    terms: tuple


def recursion_operators(op: OperatorSpec) -> list[Piece]:
    a = op.gauge
    deg1 = [
        RecTerm(-ONE, (_DD, _DD), (), _AL),
        RecTerm(-2 * ONE, (_DD,), (_DD,), _AL),
    ]
    deg0 = [RecTerm(-ONE, None, (_DD, _DD), _AL)]
    if a:
        deg1 += [
            RecTerm(a, (_AL, _BE), (), _BE),
            RecTerm(a, (_AL,), (_BE,), _BE),
            RecTerm(a, (_BE,), (_AL,), _BE),
        ]
        deg0.append(RecTerm(a, None, (_AL, _BE), _BE))
    if op.with_x:
        deg0.append(RecTerm(ONE, (), (), _BE, x=True))
    return [Piece(1, True, tuple(deg1)), Piece(2, False, tuple(deg0))]


# ---------------------------------------------------------------- inverse symbol

@dataclass(frozen=True)
class PrincipalInverse:
    """(A^-1)_{be} = g_be/(k^2-lam) + a k_b k_e/((k^2-lam)((1-a)k^2-lam))."""

    op: OperatorSpec

    def at_coincidence(self, b: int = ROW, e: int = _AC) -> JPoly:
        out = JPoly()
        add_atoms(out, ((G, (), (b, e)),), ONE, 0, 1, 0)
        if self.op.gauge:
            add_atoms(out, ((K, (), (b,)), (K, (), (e,))), self.op.gauge, 0, 1, 1)
        return out

    def projector_form(self, b: int = ROW, e: int = _AC) -> JPoly:
        """P1/(k^2-lam) + P2/((1-a)k^2-lam) with P2 = k k / k^2, P1 = g - P2.

        The 1/k^2 of the projectors is cleared by partial fractions, so the
        result is comparable with :meth:`at_coincidence` term by term.
        """
        out = JPoly()
        add_atoms(out, ((G, (), (b, e)),), ONE, 0, 1, 0)
        if not self.op.gauge:
            return out
        kk = ((K, (), (b,)), (K, (), (e,)))
        # kk/k^2 [1/((1-a)k^2-lam) - 1/(k^2-lam)] = a kk /((k^2-lam)((1-a)k^2-lam))
        add_atoms(out, kk, self.op.gauge, 0, 1, 1)
        return out

    def principal_symbol(self, b: int, e: int) -> JPoly:
        """A^{be} with (k^2 - lam) encoded as resolvent power l = -1."""
        out = JPoly()
        add_atoms(out, ((G, (), (b, e)),), ONE, 0, -1, 0)
        if self.op.gauge:
            add_atoms(out, ((K, (), (b,)), (K, (), (e,))), -self.op.gauge, 0, 0, 0)
        return out


def invert_principal_symbol(op: OperatorSpec) -> PrincipalInverse:
    return PrincipalInverse(op)


# ---------------------------------------------------------------- helpers

def subset_splits(seq: tuple):
    """All (S1, S2) with S1, S2 complementary subsequences of ``seq``."""
    n = len(seq)
    for mask in range(1 << n):
        s1 = tuple(seq[i] for i in range(n) if mask >> i & 1)
        s2 = tuple(seq[i] for i in range(n) if not mask >> i & 1)
        yield s1, s2


def set_partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def _dp(x: JPoly, lab: int) -> JPoly:
    from .jets import dp

    return dp(x, lab)


@dataclass
class SolverStats:
    jets: dict = field(default_factory=dict)


class JetSolver:
    """Memoized coincidence jets ``[D_0 ... D_(j-1) Y_m]`` (free: ROW, COL)."""

    def __init__(self, op: OperatorSpec, ltab: CoinLimitTable, itab: CoinLimitTable):
        self.op = op
        self.ltab = ltab
        self.itab = itab
        self.inv = invert_principal_symbol(op)
        self.pieces = recursion_operators(op)
        self._y: dict = {}
        self._da: dict = {}
        self._dpa: dict = {}
        self._l: dict = {}
        self._xj: dict = {}
        self._ij: dict = {}
        self.stats = SolverStats()

    # -- tables
    def L(self, seq: tuple) -> JPoly:
        hit = self._l.get(seq)
        if hit is None:
            hit = self._l[seq] = from_limit(self.ltab.lookup(seq))
        return hit

    def Ijet(self, seq: tuple, e: int, c: int) -> JPoly:
        key = (seq, e, c)
        hit = self._ij.get(key)
        if hit is None:
            hit = self._ij[key] = from_limit(self.itab.lookup(seq, e, c))
        return hit

    def Xjet(self, seq: tuple, b: int, e: int) -> JPoly:
        key = (seq, b, e)
        hit = self._xj.get(key)
        if hit is None:
            hit = JPoly()
            add_atoms(hit, ((X, seq, (b, e)),), ONE, 0, 0, 0)
            self._xj[key] = hit
        return hit

    # -- inverse symbol jets
    def dpA(self, r: int) -> JPoly:
        """r-th momentum derivative of A^-1_{ROW,_AC} w.r.t. p_(_XB+i)."""
        hit = self._dpa.get(r)
        if hit is None:
            hit = self.inv.at_coincidence(ROW, _AC) if r == 0 else _dp(self.dpA(r - 1), _XB + r - 1)
            self._dpa[r] = hit
        return hit

    def DA_generic(self, j: int) -> JPoly:
        """[D_0...D_(j-1) A^-1]_{ROW,_AC} by Faa di Bruno."""
        hit = self._da.get(j)
        if hit is not None:
            return hit
        out = JPoly()
        for part in set_partitions(list(range(j))):
            if any(len(b) < 2 for b in part):
                continue
            blocks = sorted((sorted(b) for b in part))
            acc = self.dpA(len(blocks))
            for i, b in enumerate(blocks):
                acc = mul(acc, self.L(tuple(b) + (_XB + i,)))
            out.iadd(acc)
        self._da[j] = out
        return out

    def DA(self, seq: tuple, b: int, e: int) -> JPoly:
        mp = {i: x for i, x in enumerate(seq)}
        mp[ROW] = b
        mp[_AC] = e
        return relabeled(self.DA_generic(len(seq)), mp)

    # -- amplitude jets
    def Y(self, m: int, seq: tuple, row: int = ROW) -> JPoly:
        base = self.Y_generic(m, len(seq))
        if seq == tuple(range(len(seq))) and row == ROW:
            return base
        mp = {i: x for i, x in enumerate(seq)}
        mp[ROW] = row
        return relabeled(base, mp)

    def Y_generic(self, m: int, j: int) -> JPoly:
        if m < 0:
            return JPoly()
        if m + j > MAX_ORDER:
            raise ResourceError(f"jet order {m}+{j} exceeds cap {MAX_ORDER}")
        key = (m, j)
        hit = self._y.get(key)
        if hit is not None:
            return hit
        seq = tuple(range(j))
        out = JPoly()
        e = 90  # contraction label between A^-1 and the source
        for s1, s2 in subset_splits(seq):
            da = self.DA(s1, ROW, e)
            if not da:
                continue
            if m == 0:
                src = self.Ijet(s2, e, COL)
                mul_into(out, da, src)
            else:
                src = self.source(m, s2, e)
                mul_into(out, da, src, -ONE)
        self._y[key] = out
        self.stats.jets[key] = len(out)
        return out

    def source(self, m: int, seq: tuple, alpha: int) -> JPoly:
        """[D_seq (B1 Y_(m-1) - B0 Y_(m-2))] with free row ``alpha``."""
        out = JPoly()
        for piece in self.pieces:
            src_m = m - piece.degree
            if src_m < 0:
                continue
            sign = ONE if piece.degree == 1 else -ONE
            for t in piece.terms:
                mp = {_AL: alpha}
                lseq = None if t.lseq is None else tuple(mp.get(x, x) for x in t.lseq)
                sseq = tuple(mp.get(x, x) for x in t.sseq)
                row = mp.get(t.row, t.row)
                c = t.coeff * sign
                if t.lseq is None:
                    out.iadd(self.Y(src_m, seq + sseq, row), c)
                    continue
                for t1, t2 in subset_splits(seq):
                    if t.x:
                        left = self.Xjet(t1, alpha, _BE)
                    else:
                        left = self.L(t1 + lseq)
                    if not left:
                        continue
                    mul_into(out, left, self.Y(src_m, t2 + sseq, row), c)
        return out

    # -- checks
    def Ajet(self, seq: tuple, b: int, e: int) -> JPoly:
        """[D_seq A^{be}] from the l-table; (k^2-lam) as resolvent power -1."""
        a = self.op.gauge
        out = JPoly()
        if not seq:
            return self.inv.principal_symbol(b, e)
        d = 95
        for s1, s2 in subset_splits(seq):
            pp = mul(self.L(s1 + (d,)), self.L(s2 + (d,)))
            if pp:
                mul_into(out, JPoly({(((G, (), (b, e)),), 0, 0, 0): ONE}), pp)
            if a:
                mul_into(out, self.L(s1 + (b,)), self.L(s2 + (e,)), -a)
        return out

    def residual(self, m: int, j: int) -> JPoly:
        """[D_S (A Y_m + B1 Y_(m-1) - B0 Y_(m-2))] for S = (0..j-1); must vanish."""
        seq = tuple(range(j))
        e = 96
        out = JPoly()
        for s1, s2 in subset_splits(seq):
            mul_into(out, self.Ajet(s1, ROW, e), self.Y(m, s2, e))
        if m == 0:
            out.iadd(self.Ijet(seq, ROW, COL), -ONE)
        else:
            out.iadd(self.source(m, seq, ROW))
        return out


# ---------------------------------------------------------------- pre-limit route

def _fresh(counter=[400]):
    counter[0] += 1
    if counter[0] > 950:
        counter[0] = 401
    return counter[0]


def _pre_add(acc: dict, atoms, coeff):
    mono, sign, npow, kpow = canon(atoms)
    if sign == 0:
        return
    if kpow:
        raise SymbolCalcError("momentum atom in a pre-limit amplitude")
    c = coeff if sign == 1 else -coeff
    if npow:
        c = c * PN**npow
    v = acc.get(mono)
    v = c if v is None else v + c
    if v:
        acc[mono] = v
    else:
        acc.pop(mono, None)


class PreLimit:
    """Two-point amplitudes as {monomial: coeff} over l, I, X, Ainv atoms."""

    def __init__(self, op: OperatorSpec):
        self.op = op
        self.pieces = recursion_operators(op)

    def dA_atoms(self, c: int, b: int, e: int):
        """[(coeff, atoms)] for D_c A^{be} = 2 g^{be} l^d D_c l_d - a(D_c l^b l^e + l^b D_c l^e)."""
        d = _fresh()
        out = [(2 * ONE, ((G, (), (b, e)), (L, (d,), ()), (L, (c, d), ())))]
        a = self.op.gauge
        if a:
            out.append((-a, ((L, (c, b), ()), (L, (e,), ()))))
            out.append((-a, ((L, (b,), ()), (L, (c, e), ()))))
        return out

    def derivative(self, poly: dict, x: int) -> dict:
        out: dict = {}
        for mono, coeff in poly.items():
            mono = tuple(mono)
            for i, (kind, d, s) in enumerate(mono):
                head, tail = mono[:i], mono[i + 1:]
                if kind == G:
                    continue
                if kind == AINV:
                    b, e = s
                    f, g = _fresh(), _fresh()
                    for c, atoms in self.dA_atoms(x, f, g):
                        new = ((AINV, (), (b, f)),) + atoms + ((AINV, (), (g, e)),)
                        _pre_add(out, head + new + tail, -coeff * c)
                    continue
                _pre_add(out, head + ((kind, (x,) + d, s),) + tail, coeff)
        return out

    def derivatives(self, poly: dict, seq: tuple) -> dict:
        for x in reversed(seq):
            poly = self.derivative(poly, x)
        return poly

    def solve_sigma(self, m: int) -> list[dict]:
        """Real amplitudes Y_0..Y_m (free labels ROW, COL) before coincidence."""
        if m > MAX_ORDER:
            raise ResourceError(f"order {m} exceeds cap {MAX_ORDER}")
        e = 90
        ys: list[dict] = []
        for k in range(m + 1):
            cur: dict = {}
            if k == 0:
                _pre_add(cur, ((AINV, (), (ROW, e)), (I, (), (e, COL))), ONE)
                ys.append(cur)
                continue
            src: dict = {}
            for piece in self.pieces:
                sm = k - piece.degree
                if sm < 0:
                    continue
                sign = ONE if piece.degree == 1 else -ONE
                for t in piece.terms:
                    mp = {_AL: e}
                    sseq = tuple(mp.get(x, x) for x in t.sseq)
                    row = mp.get(t.row, t.row)
                    base = {relabel_mono(mono, {ROW: row}): c for mono, c in ys[sm].items()}
                    base = self.derivatives(base, sseq)
                    if t.x:
                        left = ((X, (), (e, _BE)),)
                    elif t.lseq is None:
                        left = ()
                    else:
                        lseq = tuple(mp.get(x, x) for x in t.lseq)
                        left = ((L, lseq, ()),)
                    for mono, c in base.items():
                        _pre_add(src, left + tuple(mono), c * t.coeff * sign)
            for mono, c in src.items():
                _pre_add(cur, ((AINV, (), (ROW, e)),) + tuple(mono), -c)
            ys.append(cur)
        return ys


def relabel_mono(mono, mp):
    return relabel(mono, mp)


def solve_sigma(op: OperatorSpec, m: int) -> dict:
    """Pre-limit real amplitude Y_m = i^(-m) sigma_m."""
    return PreLimit(op).solve_sigma(m)[m]


def take_coincidence(poly: dict, op: OperatorSpec, ltab: CoinLimitTable, itab: CoinLimitTable) -> JPoly:
    """Replace l, I jets by table entries and Ainv by its momentum form."""
    inv = invert_principal_symbol(op)
    out = JPoly()
    for mono, coeff in poly.items():
        # dummies become ordinary labels shared between factors
        cnt = labels_of(mono)
        dmap = {x: _SHARED0 + i for i, x in enumerate(sorted(x for x, c in cnt.items() if c == 2))}
        f = lambda x: dmap.get(x, x)
        mono = tuple((k, tuple(map(f, d)), tuple(map(f, s))) for k, d, s in mono)
        factors = []
        rest = []
        for kind, d, s in mono:
            if kind == L:
                factors.append(from_limit(ltab.lookup(d)))
            elif kind == I:
                factors.append(from_limit(itab.lookup(d, s[0], s[1])))
            elif kind == AINV:
                if d:
                    raise SymbolCalcError("differentiated inverse symbol survived the recursion")
                factors.append(inv.at_coincidence(s[0], s[1]))
            else:
                rest.append((kind, d, s))
        acc = JPoly()
        add_atoms(acc, tuple(rest), coeff, 0, 0, 0)
        for f in factors:
            acc = mul(acc, f)
            if not acc:
                break
        out.iadd(acc)
    return out


# ---------------------------------------------------------------- analysis

def homogeneity(key) -> int:
    mono, p, l, m = key
    nk = 0
    for kind, d, s in mono:
        if kind == K:
            nk += 1
        nk += sum(1 for x in s if x == 1000) + sum(1 for x in d if x == 1000)
    return nk + 2 * p - 2 * (l + m)


def k_count(mono) -> int:
    nk = 0
    for kind, d, s in mono:
        if kind == K:
            nk += 1
        nk += sum(1 for x in s if x == 1000) + sum(1 for x in d if x == 1000)
    return nk


@dataclass(frozen=True)
class SymbolTerm:
    numerator: tuple
    p: int
    l: int
    m: int
    coeff: object

    @property
    def s2(self) -> int:
        return k_count(self.numerator)


def symbol_terms(jp: JPoly) -> list[SymbolTerm]:
    return [SymbolTerm(mono, p, l, m, c) for (mono, p, l, m), c in sorted(jp.items(), key=lambda kv: (kv[0][1:], kv[0][0]))]


def make_solver(op: OperatorSpec, order: int, cache_dir=None) -> JetSolver:
    ltab = load_or_build("l", order + 1, cache_dir)
    itab = load_or_build("I", order, cache_dir)
    return JetSolver(op, ltab, itab)


# ---------------------------------------------------------------- residual check

_RES_RING = None


def nonvanishing_monomials(jp: JPoly) -> list:
    """Monomials whose resolvent-weighted coefficient sum is not identically zero.

    Everything is brought over the common denominator (k^2-lam)^L ((1-a)k^2-lam)^M
    and compared as a polynomial in a, n, k^2, lam.
    """
    global _RES_RING
    if _RES_RING is None:
        from sympy import QQ
        from sympy.polys.rings import ring

        _RES_RING = ring("a,n,K,lam", QQ)
    rg, a, _, kk, lam = _RES_RING
    by: dict = {}
    for (mono, p, l, m), c in jp.items():
        by.setdefault(mono, []).append((p, l, m, c))
    bad = []
    for mono, lst in sorted(by.items()):
        big_l = max(0, max(l for _, l, _, _ in lst))
        big_m = max(0, max(m for _, _, m, _ in lst))
        tot = rg.zero
        for p, l, m, c in lst:
            cc = rg.from_dict({(i, j, 0, 0): v for (i, j), v in c.to_dict().items()})
            tot += cc * kk**p * (kk - lam) ** (big_l - l) * ((1 - a) * kk - lam) ** (big_m - m)
        if tot:
            bad.append(mono)
    return bad
