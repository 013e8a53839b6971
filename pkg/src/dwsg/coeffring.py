"""Exact scalar coefficients of heat-kernel results.

Every coefficient is a finite sum ``sum_q R_q(a, n) * (1-a)^(-q*n/2)`` with
``R_q`` in the rational function field Q(a, n).  Integer powers of ``(1-a)``
live inside ``R_q``; for display and serialization each sector is written as
``(1-a)^(c - q*n/2) * R'`` with ``R'`` coprime to ``(1-a)``, which makes the
``(q, c)`` key unique.

At ``n = 4`` the transcendental sectors collapse and a ``log(1-a)`` term may
appear after resolving ``0/0``; :class:`N4Scalar` holds that form.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable

import mpmath
from sympy.polys.domains import QQ
from sympy.polys.fields import field
from sympy.polys.orderings import grlex

# graded lexicographic, a before n
QAN, _FA, _FN = field("a,n", QQ, grlex)
RING = QAN.ring
PA, PN = RING.gens

RationalFn = type(_FA)

#: the gauge parameter and the dimension as field elements
A = _FA
N = _FN
ONE = QAN.one
ZERO = QAN.zero

WORKING_DPS = 50


class CoeffRingError(ArithmeticError):
    pass


class PoleError(CoeffRingError):
    pass


class DivergentLimitError(CoeffRingError):
    pass


class UnsupportedDivisionError(CoeffRingError):
    pass


def rat(value) -> RationalFn:
    """Coerce an int, Fraction, polynomial or field element into Q(a, n)."""
    if isinstance(value, RationalFn):
        return value
    if isinstance(value, Fraction):
        return QAN(QQ(value.numerator, value.denominator))
    if isinstance(value, type(PA)):
        return QAN(value)
    if isinstance(value, str):
        return parse_rational(value)
    return QAN(value)


def pochhammer(base, k: int) -> RationalFn:
    """Rising factorial ``base (base+1) ... (base+k-1)``; ``k = 0`` gives 1."""
    if k < 0:
        raise ValueError("pochhammer length must be nonnegative")
    base = rat(base)
    out = ONE
    for j in range(k):
        out = out * (base + j)
    return out


# ---------------------------------------------------------------- polynomials

def _poly_subs_n(p, value) -> object:
    """Substitute n -> value (a rational) keeping the result in RING."""
    out = {}
    for (i, j), c in p.terms():
        out[(i, 0)] = out.get((i, 0), 0) + c * QQ(value) ** j
    return RING.from_dict({k: v for k, v in out.items() if v})


def _poly_value(p, a: Fraction, n: Fraction) -> Fraction:
    total = Fraction(0)
    for (i, j), c in p.terms():
        total += Fraction(int(c.numerator), int(c.denominator)) * a**i * n**j
    return total


def _fmt_coeff(c) -> str:
    num, den = int(c.numerator), int(c.denominator)
    return str(num) if den == 1 else f"{num}/{den}"


def poly_to_str(p) -> str:
    """Deterministic text of a polynomial in ``a, n`` (grlex, descending)."""
    terms = sorted(p.terms(), key=lambda t: (t[0][0] + t[0][1], t[0]), reverse=True)
    if not terms:
        return "0"
    parts = []
    for (i, j), c in terms:
        mono = []
        if i:
            mono.append("a" if i == 1 else f"a^{i}")
        if j:
            mono.append("n" if j == 1 else f"n^{j}")
        neg = c < 0
        mag = -c if neg else c
        cs = _fmt_coeff(mag)
        if mono:
            body = "*".join(mono) if cs == "1" else cs + "*" + "*".join(mono)
        else:
            body = cs
        parts.append(("-" if neg else "+", body))
    first_sign, first = parts[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


_TERM_RE = re.compile(
    r"^(?P<coef>\d+(?:/\d+)?)?\*?(?P<mono>(?:[an](?:\^\d+)?\*?)*)$"
)


def poly_from_str(text: str):
    text = text.replace(" ", "")
    if text in ("", "0"):
        return RING.zero
    pieces = re.findall(r"[+-]?[^+-]+", text)
    out = RING.zero
    for piece in pieces:
        sign = -1 if piece.startswith("-") else 1
        body = piece.lstrip("+-")
        m = _TERM_RE.match(body)
        if not m:
            raise ValueError(f"cannot parse polynomial term {piece!r}")
        coef = Fraction(m.group("coef")) if m.group("coef") else Fraction(1)
        i = j = 0
        for sym, exp in re.findall(r"([an])(?:\^(\d+))?", m.group("mono")):
            e = int(exp) if exp else 1
            if sym == "a":
                i += e
            else:
                j += e
        out += RING({(i, j): QQ(sign * coef.numerator, coef.denominator)})
    return out


def rational_to_str(r: RationalFn) -> str:
    num, den = r.numer, r.denom
    if den == 1:
        return f"({poly_to_str(num)})"
    return f"({poly_to_str(num)})/({poly_to_str(den)})"


def parse_rational(text: str) -> RationalFn:
    text = text.strip()
    m = re.fullmatch(r"\(([^()]*)\)(?:/\(([^()]*)\))?", text)
    if not m:
        return QAN(poly_from_str(text))
    num = poly_from_str(m.group(1))
    den = poly_from_str(m.group(2)) if m.group(2) else RING.one
    if den == 0:
        raise PoleError("zero denominator in rational literal")
    return QAN(num) / QAN(den)


def _split_one_minus_a(r: RationalFn) -> tuple[int, RationalFn]:
    """Return ``(c, r')`` with ``r = (1-a)^c r'`` and ``r'`` coprime to 1-a."""
    u = RING.one - PA
    c = 0
    num, den = r.numer, r.denom
    while True:
        q, rem = num.div(u)
        if rem != 0:
            break
        num, c = q, c + 1
    while True:
        q, rem = den.div(u)
        if rem != 0:
            break
        den, c = q, c - 1
    return c, QAN(num) / QAN(den)


# ---------------------------------------------------------------- ParamScalar

class ParamScalar:
    """Element of ``Q(a, n)[(1-a)^(n/2), (1-a)^(-n/2)]``.

    Values are immutable and always normalized.
    """

    __slots__ = ("_sectors", "_hash")

    def __init__(self, sectors: dict[int, RationalFn] | None = None):
        clean = {}
        for q, r in (sectors or {}).items():
            r = rat(r)
            if r != 0:
                clean[int(q)] = r
        self._sectors = clean
        self._hash = None

    # construction
    @classmethod
    def rational(cls, value) -> "ParamScalar":
        return cls({0: rat(value)})

    @classmethod
    def half_power(cls, coeff, c: int, q: int = 1) -> "ParamScalar":
        """``coeff * (1-a)^(c - q*n/2)``."""
        return cls({q: rat(coeff) * (ONE - A) ** c if c >= 0 else rat(coeff) / (ONE - A) ** (-c)})

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[RationalFn, int, int]]) -> "ParamScalar":
        """Build from ``(coeff, c, q)`` triples, merging equal sectors."""
        out = cls()
        for coeff, c, q in terms:
            out = out + cls.half_power(coeff, c, q)
        return out

    # inspection
    @property
    def sectors(self) -> dict[int, RationalFn]:
        return dict(self._sectors)

    def is_zero(self) -> bool:
        return not self._sectors

    def terms(self) -> list[tuple[int, int, RationalFn]]:
        """Canonical ``(q, c, coeff)`` list, q descending."""
        out = []
        for q in sorted(self._sectors, reverse=True):
            c, r = _split_one_minus_a(self._sectors[q])
            out.append((q, c, r))
        return out

    def normalize(self) -> "ParamScalar":
        return self

    # arithmetic
    def _coerce(self, other) -> "ParamScalar":
        if isinstance(other, ParamScalar):
            return other
        return ParamScalar.rational(other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self._sectors)
        for q, r in other._sectors.items():
            out[q] = out.get(q, ZERO) + r
        return ParamScalar(out)

    __radd__ = __add__

    def __neg__(self):
        return ParamScalar({q: -r for q, r in self._sectors.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, ParamScalar):
            r = rat(other)
            return ParamScalar({q: v * r for q, v in self._sectors.items()})
        out: dict[int, RationalFn] = {}
        for q1, r1 in self._sectors.items():
            for q2, r2 in other._sectors.items():
                out[q1 + q2] = out.get(q1 + q2, ZERO) + r1 * r2
        return ParamScalar(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("division by zero ParamScalar")
        if len(other._sectors) != 1:
            raise UnsupportedDivisionError(
                "division by a multi-sector ParamScalar is not supported"
            )
        (q, r), = other._sectors.items()
        return ParamScalar({p - q: v / r for p, v in self._sectors.items()})

    def __pow__(self, k: int):
        if k < 0:
            return ParamScalar.rational(1) / self ** (-k)
        out = ParamScalar.rational(1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, ParamScalar):
            try:
                other = ParamScalar.rational(other)
            except Exception:
                return NotImplemented
        return self._sectors == other._sectors

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(sorted((q, str(r)) for q, r in self._sectors.items())))
        return self._hash

    def __bool__(self):
        return bool(self._sectors)

    def __repr__(self):
        return f"ParamScalar({self.serialize()})"

    # text
    def serialize(self) -> str:
        if not self._sectors:
            return "0"
        parts = []
        for q, c, r in self.terms():
            parts.append(f"q={q} c={c} {rational_to_str(r)}")
        return " ; ".join(parts)

    @classmethod
    def parse(cls, text: str) -> "ParamScalar":
        text = text.strip()
        if text == "0":
            return cls()
        terms = []
        for chunk in text.split(";"):
            m = re.fullmatch(r"\s*q=(-?\d+)\s+c=(-?\d+)\s+(.+?)\s*", chunk)
            if not m:
                raise ValueError(f"malformed ParamScalar term {chunk!r}")
            terms.append((parse_rational(m.group(3)), int(m.group(2)), int(m.group(1))))
        return cls.from_terms(terms)

    def latex(self) -> str:
        parts = []
        for q, c, r in self.terms():
            body = _latex_rational(r)
            if q == 0 and c == 0:
                parts.append(body)
                continue
            if q == 0:
                exp = f"{c}"
            else:
                half = "n/2" if q == 1 else f"{q}n/2"
                exp = f"{c}-{half}" if c else f"-{half}"
            parts.append(f"(1-a)^{{{exp}}}\\,{body}")
        return " + ".join(parts) if parts else "0"


def _latex_rational(r: RationalFn) -> str:
    num = poly_to_str(r.numer).replace("*", "")
    if r.denom == 1:
        return f"\\left({num}\\right)"
    den = poly_to_str(r.denom).replace("*", "")
    return f"\\frac{{{num}}}{{{den}}}"


# ---------------------------------------------------------------- N4Scalar

class N4Scalar:
    """``rational(a) + log_part(a) * log(1-a)``."""

    __slots__ = ("rational", "log")

    def __init__(self, rational=0, log=0):
        self.rational = rat(rational)
        self.log = rat(log)
        if self.rational.numer.degree(PN) > 0 or self.rational.denom.degree(PN) > 0:
            raise ValueError("N4Scalar parts must not depend on n")
        if self.log.numer.degree(PN) > 0 or self.log.denom.degree(PN) > 0:
            raise ValueError("N4Scalar parts must not depend on n")

    def __add__(self, other):
        other = _as_n4(other)
        return N4Scalar(self.rational + other.rational, self.log + other.log)

    __radd__ = __add__

    def __neg__(self):
        return N4Scalar(-self.rational, -self.log)

    def __sub__(self, other):
        return self + (-_as_n4(other))

    def __mul__(self, other):
        other = _as_n4(other)
        if self.log != 0 and other.log != 0:
            raise CoeffRingError("log(1-a)^2 is outside the n=4 coefficient field")
        return N4Scalar(
            self.rational * other.rational,
            self.rational * other.log + self.log * other.rational,
        )

    __rmul__ = __mul__

    def __eq__(self, other):
        try:
            other = _as_n4(other)
        except Exception:
            return NotImplemented
        return self.rational == other.rational and self.log == other.log

    def __hash__(self):
        return hash((str(self.rational), str(self.log)))

    def is_zero(self) -> bool:
        return self.rational == 0 and self.log == 0

    def __bool__(self):
        return not self.is_zero()

    def serialize(self) -> str:
        return f"rat={rational_to_str(self.rational)} log={rational_to_str(self.log)}"

    @classmethod
    def parse(cls, text: str) -> "N4Scalar":
        m = re.fullmatch(r"\s*rat=(.+?)\s+log=(.+?)\s*", text)
        if not m:
            raise ValueError(f"malformed N4Scalar {text!r}")
        return cls(parse_rational(m.group(1)), parse_rational(m.group(2)))

    def latex(self) -> str:
        parts = []
        if self.log != 0:
            parts.append(f"{_latex_rational(self.log)}\\ln(1-a)")
        if self.rational != 0 or not parts:
            parts.append(_latex_rational(self.rational))
        return " + ".join(parts)

    def __repr__(self):
        return f"N4Scalar({self.serialize()})"


def _as_n4(x) -> N4Scalar:
    if isinstance(x, N4Scalar):
        return x
    if isinstance(x, ParamScalar):
        return limit_n4(x)
    return N4Scalar(rat(x), 0)


# ---------------------------------------------------------------- operations

def normalize(x: ParamScalar) -> ParamScalar:
    return x


def arith(op: str, x: ParamScalar, y: ParamScalar) -> ParamScalar:
    if op == "add":
        return x + y
    if op == "mul":
        return x * y
    if op == "div":
        return x / y
    raise ValueError(f"unknown operation {op!r}")


def _n_multiplicity(p, n0) -> int:
    u = PN - n0
    e = 0
    while p != 0:
        q, rem = p.div(u)
        if rem != 0:
            break
        p, e = q, e + 1
    return e


def _rational_at(num, den, n0) -> RationalFn:
    d0 = _poly_subs_n(den, n0)
    if d0 == 0:
        raise PoleError(f"denominator vanishes at n={n0}")
    return QAN(_poly_subs_n(num, n0)) / QAN(d0)


def _deriv_at(num, den, n0) -> RationalFn:
    """d/dn (num/den) at n = n0, den(n0) != 0."""
    nv = _poly_subs_n(num, n0)
    dv = _poly_subs_n(den, n0)
    dnv = _poly_subs_n(num.diff(PN), n0)
    ddv = _poly_subs_n(den.diff(PN), n0)
    return (QAN(dnv) * QAN(dv) - QAN(nv) * QAN(ddv)) / QAN(dv * dv)


def limit_n(x: ParamScalar, n0: int) -> N4Scalar:
    """Limit ``n -> n0`` (even), resolving at most one simple pole by L'Hopital."""
    if n0 % 2:
        raise ValueError("limit point must be an even dimension")
    one_minus_a = ONE - A
    half = n0 // 2
    mults = {q: _n_multiplicity(r.denom, n0) for q, r in x._sectors.items()}
    if not mults or max(mults.values()) == 0:
        total = ZERO
        for q, r in x._sectors.items():
            total += _rational_at(r.numer, r.denom, n0) * _pow1ma(one_minus_a, -half * q)
        return N4Scalar(total, 0)
    if max(mults.values()) > 1:
        raise DivergentLimitError(f"pole of order > 1 at n={n0}")
    # y = (n-n0) x is regular; limit = y'(n0) provided y(n0) = 0
    value = ZERO
    rational = ZERO
    log = ZERO
    u = PN - n0
    for q, r in x._sectors.items():
        num, den = r.numer, r.denom
        if mults[q]:
            den = den.div(u)[0]
        else:
            num = num * u
        w = _pow1ma(one_minus_a, -half * q)
        y0 = _rational_at(num, den, n0)
        value += y0 * w
        rational += _deriv_at(num, den, n0) * w
        log += -QAN(QQ(q, 2)) * y0 * w
    if value != 0:
        raise DivergentLimitError(f"coefficient diverges at n={n0}")
    return N4Scalar(rational, log)


def limit_n4(x: ParamScalar) -> N4Scalar:
    """Limit ``n -> 4``; a ``log(1-a)`` part appears when a pole cancels."""
    if isinstance(x, N4Scalar):
        return x
    return limit_n(x, 4)


def _pow1ma(base, e: int):
    return base**e if e >= 0 else ONE / base ** (-e)


def _to_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10**12)
    return Fraction(int(v.numerator), int(v.denominator))


def _eval_rational_exact(r: RationalFn, a: Fraction, n: Fraction) -> Fraction:
    den = _poly_value(r.denom, a, n)
    if den == 0:
        raise PoleError(f"pole at a={a}, n={n}")
    return _poly_value(r.numer, a, n) / den


def eval_numeric(x, a, n=4, dps: int = WORKING_DPS):
    """Evaluate at exact rational ``(a, n)``; returns an mpmath number."""
    a = _to_fraction(a)
    n = _to_fraction(n)
    with mpmath.workdps(dps + 10):
        if isinstance(x, N4Scalar):
            rv = _eval_rational_exact(x.rational, a, n)
            lv = _eval_rational_exact(x.log, a, n)
            out = mpmath.mpf(rv.numerator) / rv.denominator
            if lv:
                out += (mpmath.mpf(lv.numerator) / lv.denominator) * mpmath.log(
                    1 - mpmath.mpf(a.numerator) / a.denominator
                )
            return +out
        if not isinstance(x, ParamScalar):
            x = ParamScalar.rational(x)
        base = 1 - mpmath.mpf(a.numerator) / a.denominator
        half_n = mpmath.mpf(n.numerator) / (2 * n.denominator)
        out = mpmath.mpf(0)
        for q, r in x._sectors.items():
            v = _eval_rational_exact(r, a, n)
            term = mpmath.mpf(v.numerator) / v.denominator
            if q:
                term *= base ** (-q * half_n)
            out += term
        return +out


def eval_exact(x: ParamScalar, a, n) -> Fraction:
    """Exact value when every ``(1-a)^(-q n/2)`` factor is rational (even n)."""
    a = _to_fraction(a)
    n = _to_fraction(n)
    total = Fraction(0)
    for q, r in x._sectors.items():
        v = _eval_rational_exact(r, a, n)
        e = -q * n / 2
        if e.denominator != 1:
            raise ValueError("eval_exact needs q*n/2 integral")
        total += v * (1 - a) ** int(e)
    return total


# ---------------------------------------------------------------- a -> 0 series

_QN, _QN_N = field("n", QQ)


def _to_qn(p) -> object:
    """Column of RING polynomial coefficients indexed by powers of a."""
    cols: dict[int, object] = {}
    for (i, j), c in p.terms():
        cols[i] = cols.get(i, _QN.zero) + _QN(c) * _QN_N**j
    return cols


def series_at_a0(x: ParamScalar, order: int) -> list:
    """Taylor coefficients of ``x`` in ``a`` about 0, as elements of Q(n)."""
    total: dict[int, object] = {}
    for q, r in x._sectors.items():
        num = _to_qn(r.numer)
        den = _to_qn(r.denom)
        v = min(den)
        d0 = den[v]
        # P / (a^v * D'), D'(0) = d0
        length = order + v + 1
        quot = []
        for k in range(length):
            acc = num.get(k, _QN.zero)
            for j in range(1, k + 1):
                dj = den.get(v + j)
                if dj is not None:
                    acc -= dj * quot[k - j]
            quot.append(acc / d0)
        # binomial series of (1-a)^(-q n/2)
        binom = [_QN.one]
        for j in range(1, length):
            binom.append(binom[-1] * (_QN(QQ(q, 2)) * _QN_N + (j - 1)) / j)
        for k in range(length):
            acc = _QN.zero
            for j in range(k + 1):
                acc += quot[j] * binom[k - j]
            e = k - v
            total[e] = total.get(e, _QN.zero) + acc
    for e, c in total.items():
        if e < 0 and c != 0:
            raise PoleError("pole at a=0")
    return [total.get(e, _QN.zero) for e in range(order + 1)]


def qn(value) -> object:
    """Coerce into the univariate field Q(n) used by :func:`series_at_a0`."""
    if isinstance(value, Fraction):
        return _QN(QQ(value.numerator, value.denominator))
    return _QN(value)


QN_FIELD = _QN
QN_N = _QN_N
