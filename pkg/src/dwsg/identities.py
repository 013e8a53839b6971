"""Curvature identities and reduction to a fixed monomial basis.

Rules (torsion-free):

* Ricci commutation ``[D_x, D_y] T = sum_slots R(s, f, x, y) T[s->f]`` plus
  ``W(x,y) T - T W(x,y)`` for bundle endomorphisms (only ``W(x,y) T`` for a
  bundle section; nothing for R).
* cyclic identity ``R(a,b,c,d) + R(a,c,d,b) + R(a,d,b,c) = 0``.
* second Bianchi ``D_e R(a,b,c,d) + D_c R(a,b,d,e) + D_d R(a,b,e,c) = 0``.
* bundle Bianchi ``D_e W(a,b) + D_a W(b,e) + D_b W(e,a) = 0``.

Rules are instantiated on every monomial of a closure and collected as
linear relations over Q.  A :class:`Reducer` keeps them in reduced echelon
form whose pivots are the *least preferred* monomials, so the normal form of
any polynomial is expressed in preferred monomials wherever possible.  This
is confluent by construction, hence idempotent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

from .linalg import SparseRREF
from .tensor import COMMUTING, R, W, X, I, TensorPoly, parse_mono
from .tensor.core import canon

_F1, _F2 = 700, 701


@dataclass(frozen=True)
class RewriteRule:
    name: str
    pattern: str
    replacement: str


RULES = (
    RewriteRule("RicciCommute", "D_x D_y T - D_y D_x T", "R(s,f,x,y) T[s->f] + [W(x,y), T]"),
    RewriteRule("Cyclic", "R(a,b,c,d) + R(a,c,d,b) + R(a,d,b,c)", "0"),
    RewriteRule("Bianchi2", "D_e R(a,b,c,d) + D_c R(a,b,d,e) + D_d R(a,b,e,c)", "0"),
    RewriteRule("BianchiW", "D_e W(a,b) + D_a W(b,e) + D_b W(e,a)", "0"),
)


def _add(acc, atoms, c):
    mono, sign, npow, kpow = canon(tuple(atoms))
    if sign == 0:
        return
    if npow or kpow:
        raise ValueError("trace produced inside an identity instance")
    v = acc.get(mono, 0) + c * sign
    if v:
        acc[mono] = v
    else:
        acc.pop(mono, None)


def commutator_terms(atom, x: int, y: int, prefix: tuple) -> list:
    """``D_prefix [D_x, D_y] atom`` as a list of (coeff, [atoms]) in bundle order."""
    kind, d, s = atom
    out = []
    slots = [("d", i) for i in range(len(d))] + [("s", i) for i in range(len(s))]
    npre = len(prefix)
    for r in range(npre + 1):
        for sub in itertools.combinations(range(npre), r):
            p1 = tuple(prefix[i] for i in sub)
            p2 = tuple(prefix[i] for i in range(npre) if i not in sub)
            for where, i in slots:
                lab = d[i] if where == "d" else s[i]
                if where == "d":
                    nd, ns = d[:i] + (_F1,) + d[i + 1:], s
                else:
                    nd, ns = d, s[:i] + (_F1,) + s[i + 1:]
                out.append((1, [(R, p1, (lab, _F1, x, y)), (kind, p2 + nd, ns)]))
            if kind in (X, W):
                u = (kind, p2 + d, s)
                out.append((1, [(W, p1, (x, y)), u]))
                out.append((-1, [u, (W, p1, (x, y))]))
            elif kind == I:
                out.append((1, [(W, p1, (x, y)), (kind, p2 + d, s)]))
    return out


def _replace_atom(mono, ai, pieces):
    """Substitute atom ``ai`` by an ordered list of atoms."""
    return tuple(mono[:ai]) + tuple(pieces) + tuple(mono[ai + 1:])


def commutation_relations(mono) -> list[dict]:
    rels = []
    for ai, (kind, d, s) in enumerate(mono):
        for t in range(len(d) - 1):
            x, y = d[t], d[t + 1]
            rel: dict = {}
            _add(rel, mono, 1)
            swapped = (kind, d[:t] + (y, x) + d[t + 2:], s)
            _add(rel, _replace_atom(mono, ai, [swapped]), -1)
            inner = (kind, d[t + 2:], s)
            for c, pieces in commutator_terms(inner, x, y, d[:t]):
                _add(rel, _replace_atom(mono, ai, pieces), -c)
            if rel:
                rels.append(rel)
    return rels


def bianchi_cyclic_relations(mono) -> list[dict]:
    rels = []
    for ai, (kind, d, s) in enumerate(mono):
        if kind == R:
            p, q, r, t = s
            for a, b, c, e in ((p, q, r, t), (q, p, t, r), (r, t, p, q), (t, r, q, p)):
                rel: dict = {}
                for perm in ((a, b, c, e), (a, c, e, b), (a, e, b, c)):
                    _add(rel, _replace_atom(mono, ai, [(R, d, perm)]), 1)
                if rel:
                    rels.append(rel)
            if d:
                pre, e = d[:-1], d[-1]
                for a, b, c, f in ((p, q, r, t), (r, t, p, q)):
                    rel = {}
                    _add(rel, _replace_atom(mono, ai, [(R, pre + (e,), (a, b, c, f))]), 1)
                    _add(rel, _replace_atom(mono, ai, [(R, pre + (c,), (a, b, f, e))]), 1)
                    _add(rel, _replace_atom(mono, ai, [(R, pre + (f,), (a, b, e, c))]), 1)
                    if rel:
                        rels.append(rel)
        elif kind == W and d:
            pre, e = d[:-1], d[-1]
            a, b = s
            rel = {}
            _add(rel, _replace_atom(mono, ai, [(W, pre + (e,), (a, b))]), 1)
            _add(rel, _replace_atom(mono, ai, [(W, pre + (a,), (b, e))]), 1)
            _add(rel, _replace_atom(mono, ai, [(W, pre + (b,), (e, a))]), 1)
            if rel:
                rels.append(rel)
    return rels


def all_relations(mono) -> list[dict]:
    return commutation_relations(mono) + bianchi_cyclic_relations(mono)


def inversions(mono) -> int:
    n = 0
    for _, d, _ in mono:
        for i in range(len(d)):
            for j in range(i + 1, len(d)):
                if d[i] > d[j]:
                    n += 1
    return n


def derivative_count(mono) -> int:
    return sum(len(d) for _, d, _ in mono)


class Reducer:
    """Normal form modulo identity instances on a growing monomial closure.

    ``rank_key`` orders monomials; the largest monomial of each relation is
    eliminated, so low ranks survive.  ``generators`` maps a monomial to its
    relation instances.
    """

    def __init__(self, rank_key: Callable, generators: Callable = all_relations):
        self.rank_key = rank_key
        self.generators = generators
        self.rref = SparseRREF(rank_key)
        self.seen: set = set()
        self.relations_used = 0

    def close(self, monos: Iterable):
        todo = [m for m in monos if m not in self.seen]
        while todo:
            m = todo.pop()
            if m in self.seen:
                continue
            self.seen.add(m)
            for rel in self.generators(m):
                for mm in rel:
                    if mm not in self.seen:
                        todo.append(mm)
                if self.rref.add(rel):
                    self.relations_used += 1

    def normal_form(self, p: TensorPoly) -> TensorPoly:
        self.close(p.terms)
        vec = _reduce_generic(self.rref, p.terms)
        return TensorPoly(vec)


def _reduce_generic(rref: SparseRREF, vec: dict) -> dict:
    """Like SparseRREF.reduce but for arbitrary coefficient rings."""
    out = dict(vec)
    for col in [c for c in out if c in rref.rows]:
        coef = out.get(col)
        if not coef:
            continue
        for c, v in rref.rows[col].items():
            prev = out.get(c)
            term = coef * _as_coeff(v, coef)
            nv = -term if prev is None else prev - term
            if nv:
                out[c] = nv
            else:
                out.pop(c, None)
    return out


def _as_coeff(v: Fraction, like):
    if isinstance(like, (int, Fraction)):
        return v
    from .coeffring import N4Scalar, ParamScalar, rat

    if isinstance(like, ParamScalar):
        return ParamScalar.rational(rat(v))
    if isinstance(like, N4Scalar):
        return N4Scalar(rat(v), 0)
    return type(like)(v) if not hasattr(like, "ring") else like.ring(v)


# ---------------------------------------------------------------- public API

def _order_key(preferred: frozenset):
    def key(m):
        return (0 if m in preferred else 1, derivative_count(m), inversions(m), m)

    return key


def commute_to_canonical_order(p: TensorPoly) -> TensorPoly:
    """Rewrite with the Ricci commutation rule only, minimizing derivative inversions."""
    red = Reducer(lambda m: (inversions(m), m), commutation_relations)
    return red.normal_form(p)


def apply_bianchi_and_cyclic(p: TensorPoly, basis: Iterable | None = None) -> TensorPoly:
    red = reducer_for(basis)
    return red.normal_form(p)


_REDUCERS: dict = {}


def reducer_for(basis: Iterable | None) -> Reducer:
    pref = frozenset(basis or ())
    red = _REDUCERS.get(pref)
    if red is None:
        red = _REDUCERS[pref] = Reducer(_order_key(pref))
    return red


def basis_dim4(free: set | frozenset) -> list:
    """Target monomials: the E4 term list (free {a,b}) or its trace ({})."""
    from .pipeline import load_golden

    ref = load_golden("E4full" if free else "trE4")
    return ref.monomials()


def nf_equal(p: TensorPoly, q: TensorPoly, basis: Iterable | None = None) -> tuple[bool, TensorPoly]:
    """Compare modulo identities; returns (equal, normal form of p - q)."""
    red = reducer_for(basis)
    diff = red.normal_form(p - q)
    return not diff.terms, diff


def parse_basis(texts: Iterable[str]) -> list:
    out = []
    for t in texts:
        atoms, _ = parse_mono(t)
        mono, sign, _, _ = canon(atoms)
        if sign:
            out.append(mono)
    return out
