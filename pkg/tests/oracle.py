"""Helpers shared by the integral-oracle tests."""

import random
from fractions import Fraction

import mpmath

from dwsg.coeffring import PoleError, eval_numeric, limit_n, series_at_a0
from dwsg.momentumint import integral_scalar, numeric_integral


def _qn_at(c, n):
    num = c.numer(n) if c.numer.ring.ngens == 1 else c.numer
    den = c.denom(n) if c.denom.ring.ngens == 1 else c.denom
    den = Fraction(str(den))
    if den == 0:
        raise PoleError(f"pole at n={n}")
    return Fraction(str(num)) / den


def closed_form_value(p, s, l, m, a, n, dps=50):
    x = integral_scalar(p, s, l, m)
    try:
        return eval_numeric(x, a, n, dps=dps)
    except PoleError:
        pass
    if a == 0:
        try:
            v = _qn_at(series_at_a0(x, 0)[0], n)
            return mpmath.mpf(v.numerator) / v.denominator
        except PoleError:
            pass
    return eval_numeric(limit_n(x, n), a, n, dps=dps)


def random_patterns(count, seed):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        p, s, l, m = rng.randint(0, 2), rng.randint(0, 2), rng.randint(0, 3), rng.randint(0, 3)
        if l + m < 1:
            continue
        n = rng.choice([2, 4, 6])
        a = rng.choice([Fraction(0), Fraction(3, 10), Fraction(7, 10)])
        out.append((p, s, l, m, a, n))
    return out


def relative_error(p, s, l, m, a, n, dps=50):
    with mpmath.workdps(dps):
        v = closed_form_value(p, s, l, m, a, n, dps)
        w = numeric_integral(p, s, l, m, a, n, dps)
        return abs(v - w) / abs(w)
