"""Graded containers for coincidence-limit algebra before momentum integration.

A :class:`JPoly` maps ``(mono, p, l, m)`` to a polynomial in ``a, n``, meaning
``coeff * mono * (k^2)^p * (k^2-lam)^(-l) * ((1-a)k^2-lam)^(-m)``.
Momentum factors sit in the monomial as ``k`` atoms (free label) or as
``KMARK`` slots (contracted with k).
"""

from __future__ import annotations

from .coeffring import PA, PN, RING
from .tensor import G, K, KMARK
from .tensor.core import canon, join, relabel

ONE = RING.one
ONE_MINUS_A = RING.one - PA


class JPoly(dict):
    __slots__ = ()

    def add(self, key, c):
        v = self.get(key)
        v = c if v is None else v + c
        if v:
            self[key] = v
        else:
            self.pop(key, None)

    def iadd(self, other: "JPoly", scale=None):
        for k, c in other.items():
            self.add(k, c if scale is None else c * scale)
        return self

    def scaled(self, s) -> "JPoly":
        out = JPoly()
        for k, c in self.items():
            out.add(k, c * s)
        return out


def term(atoms, coeff=ONE, p=0, l=0, m=0) -> JPoly:
    out = JPoly()
    add_atoms(out, atoms, coeff, p, l, m)
    return out


def add_atoms(acc: JPoly, atoms, coeff, p, l, m):
    mono, sign, npow, kpow = canon(atoms)
    if sign == 0:
        return
    c = coeff if sign == 1 else -coeff
    if npow:
        c = c * PN**npow
    acc.add((mono, p + kpow, l, m), c)


def mul(x: JPoly, y: JPoly) -> JPoly:
    """Ordered product; shared free labels contract."""
    out = JPoly()
    for (m1, p1, l1, n1), c1 in x.items():
        for (m2, p2, l2, n2), c2 in y.items():
            add_atoms(out, join(m1, m2), c1 * c2, p1 + p2, l1 + l2, n1 + n2)
    return out


def mul_into(out: JPoly, x: JPoly, y: JPoly, scale=None):
    for (m1, p1, l1, n1), c1 in x.items():
        for (m2, p2, l2, n2), c2 in y.items():
            c = c1 * c2
            if scale is not None:
                c = c * scale
            add_atoms(out, join(m1, m2), c, p1 + p2, l1 + l2, n1 + n2)
    return out


def relabeled(x: JPoly, mapping: dict) -> JPoly:
    out = JPoly()
    for (mono, p, l, m), c in x.items():
        add_atoms(out, relabel(mono, mapping), c, p, l, m)
    return out


def from_tensor(poly, to_coeff=None) -> JPoly:
    """Lift a TensorPoly with rational coefficients."""
    out = JPoly()
    for mono, c in poly.terms.items():
        cc = RING(c) if to_coeff is None else to_coeff(c)
        add_atoms(out, mono, cc, 0, 0, 0)
    return out


def from_limit(d: dict) -> JPoly:
    out = JPoly()
    for mono, c in d.items():
        out.add((mono, 0, 0, 0), RING(c))
    return out


def dp(x: JPoly, lab: int) -> JPoly:
    """Derivative with respect to the momentum component p_lab, at p = k."""
    out = JPoly()
    kx = (K, (), (lab,))
    for (mono, p, l, m), c in x.items():
        for ai, (kind, d, s) in enumerate(mono):
            if kind == K:
                rest = mono[:ai] + ((G, (), (s[0], lab)),) + mono[ai + 1:]
                add_atoms(out, rest, c, p, l, m)
                continue
            for si, v in enumerate(s):
                if v == KMARK:
                    ns = s[:si] + (lab,) + s[si + 1:]
                    add_atoms(out, mono[:ai] + ((kind, d, ns),) + mono[ai + 1:], c, p, l, m)
            for di, v in enumerate(d):
                if v == KMARK:
                    nd = d[:di] + (lab,) + d[di + 1:]
                    add_atoms(out, mono[:ai] + ((kind, nd, s),) + mono[ai + 1:], c, p, l, m)
        with_k = mono + (kx,)
        if p:
            add_atoms(out, with_k, c * (2 * p), p - 1, l, m)
        if l:
            add_atoms(out, with_k, c * (-2 * l), p, l + 1, m)
        if m:
            add_atoms(out, with_k, c * (-2 * m) * ONE_MINUS_A, p, l, m + 1)
    return out


def reduce_resolvents(x: JPoly) -> JPoly:
    """Rewrite non-positive resolvent powers into the standard range l, m >= 0."""
    out = JPoly()
    stack = list(x.items())
    while stack:
        (mono, p, l, m), c = stack.pop()
        if l < 0 and m > 0:
            # (k^2 - lam) = ((1-a)k^2 - lam) + a k^2
            stack.append(((mono, p, l + 1, m - 1), c))
            stack.append(((mono, p + 1, l + 1, m), c * PA))
        elif m < 0 and l > 0:
            # ((1-a)k^2 - lam) = (k^2 - lam) - a k^2
            stack.append(((mono, p, l - 1, m + 1), c))
            stack.append(((mono, p + 1, l, m + 1), -c * PA))
        else:
            out.add((mono, p, l, m), c)
    return out
