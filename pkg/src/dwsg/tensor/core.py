"""Monomials, metric/momentum elimination and tensor polynomials."""

from __future__ import annotations

import itertools
import re
from fractions import Fraction
from math import factorial
from typing import Callable, Iterable

from . import _backend
from ._canon_py import AINV, COMMUTING, DUMMY0, G, I, K, KMARK, L, R, W, X

canonicalize_raw = _backend.canonicalize

KIND_NAMES = {G: "g", K: "k", R: "R", L: "l", AINV: "Ainv", W: "W", X: "X", I: "I"}
NAME_KINDS = {v: k for k, v in KIND_NAMES.items()}
KIND_SLOTS = {G: 2, K: 1, R: 4, L: 0, W: 2, X: 2, I: 2, AINV: 2}

#: mass dimension carried by each atom kind (derivatives add one each)
KIND_DIM = {G: 0, K: 0, R: 2, L: 0, AINV: 0, W: 2, X: 2, I: 0}

FREE_NAMES = "abcdefgh"
DUMMY_NAMES = ["i", "j", "k", "l", "m", "p", "q", "r", "s", "t", "u", "v", "w", "y", "z"]


class TensorError(ValueError):
    pass


def atom(kind: int, slots: Iterable[int] = (), derivs: Iterable[int] = ()) -> tuple:
    slots = tuple(slots)
    if KIND_SLOTS.get(kind) != len(slots):
        raise TensorError(f"{KIND_NAMES.get(kind, kind)} takes {KIND_SLOTS.get(kind)} slots")
    return (kind, tuple(derivs), slots)


def labels_of(atoms) -> dict[int, int]:
    cnt: dict[int, int] = {}
    for _, d, s in atoms:
        for x in d:
            cnt[x] = cnt.get(x, 0) + 1
        for x in s:
            cnt[x] = cnt.get(x, 0) + 1
    cnt.pop(KMARK, None)
    return cnt


def free_labels(atoms) -> set[int]:
    return {x for x, c in labels_of(atoms).items() if c == 1}


def _replace(atoms, old, new):
    out = []
    for kind, d, s in atoms:
        out.append((kind, tuple(new if x == old else x for x in d), tuple(new if x == old else x for x in s)))
    return out


def eliminate(atoms) -> tuple[list, int, int]:
    """Remove contracted metrics and momenta.

    Returns ``(atoms, n_power, k2_power)``: traces g_i^i give factors of n,
    k.k gives a power of k^2, and a k contracted into any other slot is
    recorded as KMARK in that slot.
    """
    atoms = list(atoms)
    npow = 0
    kpow = 0
    changed = True
    while changed:
        changed = False
        cnt = labels_of(atoms)
        for idx, (kind, d, s) in enumerate(atoms):
            if kind == G and not d:
                x, y = s
                if x == y and x != KMARK:
                    del atoms[idx]
                    npow += 1
                    changed = True
                    break
                if x == KMARK and y == KMARK:
                    del atoms[idx]
                    kpow += 1
                    changed = True
                    break
                if x == KMARK or y == KMARK:
                    other = y if x == KMARK else x
                    atoms[idx] = (K, (), (other,))
                    changed = True
                    break
                for u, v in ((x, y), (y, x)):
                    if cnt.get(u) == 2:
                        del atoms[idx]
                        atoms = _replace(atoms, u, v)
                        changed = True
                        break
                if changed:
                    break
            elif kind == K:
                (x,) = s
                if x == KMARK:
                    del atoms[idx]
                    kpow += 1
                    changed = True
                    break
                if cnt.get(x) == 2:
                    del atoms[idx]
                    # partner may itself be a k atom
                    for j, (k2, d2, s2) in enumerate(atoms):
                        if k2 == K and s2 == (x,):
                            del atoms[j]
                            kpow += 1
                            break
                    else:
                        atoms = _replace(atoms, x, KMARK)
                    changed = True
                    break
    return atoms, npow, kpow


_CACHE: dict = {}


def canon(atoms) -> tuple:
    """Full normal form ``(mono, sign, n_power, k2_power)``; sign 0 = zero."""
    key = tuple(atoms)
    hit = _CACHE.get(key)
    if hit is not None:
        return hit
    els, npow, kpow = eliminate(key)
    mono, sign = canonicalize_raw(tuple(els))
    out = (mono, sign, npow, kpow)
    _CACHE[key] = out
    return out


def canonicalize(atoms) -> tuple[tuple, int, bool]:
    """(canonical monomial, sign, is_zero); metrics are not eliminated."""
    mono, sign = canonicalize_raw(tuple(atoms))
    return mono, sign, sign == 0


def clear_cache():
    _CACHE.clear()


def shift_dummies(atoms, offset: int):
    cnt = labels_of(atoms)
    f = lambda x: x + offset if (x != KMARK and cnt.get(x) == 2) else x
    return tuple((k, tuple(map(f, d)), tuple(map(f, s))) for k, d, s in atoms)


def relabel(atoms, mapping: dict[int, int]):
    """Rename free labels; dummies are moved out of the way first."""
    atoms = shift_dummies(atoms, 5000)
    f = lambda x: mapping.get(x, x)
    return tuple((k, tuple(map(f, d)), tuple(map(f, s))) for k, d, s in atoms)


def join(m1, m2):
    """Concatenate two monomials; labels shared between them contract."""
    return tuple(m1) + shift_dummies(m2, 3000)


def mass_dim(mono) -> int:
    return sum(KIND_DIM[k] + len(d) for k, d, _ in mono)


# ---------------------------------------------------------------- text

def _label_name(x: int, dmap: dict) -> str:
    if x == KMARK:
        return "*"
    if x in dmap:
        return dmap[x]
    if 0 <= x < len(FREE_NAMES):
        return FREE_NAMES[x]
    return f"x{x}"


def format_mono(mono) -> str:
    """Text form; Ricci and scalar curvature are shown as Ric/Rs."""
    if not mono:
        return "1"
    cnt = labels_of(mono)
    dmap: dict[int, str] = {}
    names = iter(DUMMY_NAMES + [f"d{j}" for j in range(100)])
    for _, d, s in mono:
        for x in d + s:
            if x != KMARK and cnt.get(x) == 2 and x not in dmap:
                dmap[x] = next(names)
    parts = []
    for kind, d, s in mono:
        pre = "D(" + ",".join(_label_name(x, dmap) for x in d) + ")" if d else ""
        name = KIND_NAMES[kind]
        slots = s
        if kind == R:
            c02 = s[0] == s[2] and s[0] != KMARK
            c13 = s[1] == s[3] and s[1] != KMARK
            if c02 and c13:
                name, slots = "Rs", ()
            elif c13:
                name, slots = "Ric", (s[0], s[2])
            elif c02:
                name, slots = "Ric", (s[1], s[3])
        parts.append(pre + name + "(" + ",".join(_label_name(x, dmap) for x in slots) + ")")
    return " ".join(parts)


_ATOM_RE = re.compile(r"(?:D\(([^()]*)\))?([A-Za-z]+)\(([^()]*)\)")


def parse_mono(text: str) -> tuple[list, int]:
    """Parse text into raw atoms; returns ``(atoms, sign)`` before canonicalization.

    Names a..h (or ``x<int>``) used once are free labels; any name used twice
    contracts.  ``*`` marks a slot contracted with the momentum.
    """
    text = text.strip()
    if text in ("", "1"):
        return [], 1
    toks = _ATOM_RE.findall(text.replace("*", "@").replace(" @ ", " "))
    rest = _ATOM_RE.sub("", text.replace("*", "@")).replace("@", "").strip()
    if rest:
        raise TensorError(f"cannot parse monomial {text!r}")
    raw = []
    for d, name, s in toks:
        dn = [x.strip() for x in d.split(",")] if d.strip() else []
        sn = [x.strip() for x in s.split(",")] if s.strip() else []
        raw.append((name, dn, sn))
    counts: dict[str, int] = {}
    for name, dn, sn in raw:
        for x in dn + sn:
            if x != "@":
                counts[x] = counts.get(x, 0) + 1
    ids: dict[str, int] = {}
    nxt = [DUMMY0 + 500]
    extra_dummies = [0]

    def lab(x: str) -> int:
        if x == "@":
            return KMARK
        if x in ids:
            return ids[x]
        if counts[x] == 2:
            ids[x] = nxt[0]
            nxt[0] += 1
        elif counts[x] == 1:
            if x in FREE_NAMES:
                ids[x] = FREE_NAMES.index(x)
            elif re.fullmatch(r"x\d+", x):
                ids[x] = int(x[1:])
            else:
                raise TensorError(f"unknown free index name {x!r}")
        else:
            raise TensorError(f"index {x!r} used {counts[x]} times")
        return ids[x]

    atoms = []
    for name, dn, sn in raw:
        d = tuple(lab(x) for x in dn)
        if name == "Ric":
            if len(sn) != 2:
                raise TensorError("Ric takes 2 slots")
            t = DUMMY0 + 900 + extra_dummies[0]
            extra_dummies[0] += 1
            atoms.append((R, d, (t, lab(sn[0]), t, lab(sn[1]))))
            continue
        if name == "Rs":
            if sn:
                raise TensorError("Rs takes no slots")
            t1 = DUMMY0 + 900 + extra_dummies[0]
            t2 = t1 + 1
            extra_dummies[0] += 2
            atoms.append((R, d, (t1, t2, t1, t2)))
            continue
        if name not in NAME_KINDS:
            raise TensorError(f"unknown tensor {name!r}")
        atoms.append(atom(NAME_KINDS[name], [lab(x) for x in sn], d))
    return atoms, 1


# ---------------------------------------------------------------- polynomials

class TensorPoly:
    """Linear combination of canonical monomials.

    Coefficients may be any ring elements supporting ``+``, ``*`` and
    truthiness (Fraction, ParamScalar, polynomial elements).
    """

    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        self.terms = {m: c for m, c in (terms or {}).items() if c}

    @classmethod
    def from_atoms(cls, atoms, coeff=1, nsym=None) -> "TensorPoly":
        """Canonicalize raw atoms; ``nsym`` converts n-powers to coefficients."""
        mono, sign, npow, kpow = canon(atoms)
        if kpow:
            raise TensorError("k.k contraction needs a k^2-graded container")
        if sign == 0:
            return cls()
        c = coeff * sign
        if npow:
            if nsym is None:
                from ..coeffring import N

                nsym = N
            c = c * nsym**npow
        return cls({mono: c})

    @classmethod
    def parse(cls, text: str, coeff=1) -> "TensorPoly":
        atoms, sign = parse_mono(text)
        return cls.from_atoms(atoms, coeff * sign)

    def copy(self):
        return TensorPoly(dict(self.terms))

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(sorted(self.terms.items()))

    def __eq__(self, other):
        if not isinstance(other, TensorPoly):
            return NotImplemented
        return self.terms == other.terms

    def add_term(self, mono, coeff):
        if not coeff:
            return
        c = self.terms.get(mono)
        c = coeff if c is None else c + coeff
        if c:
            self.terms[mono] = c
        else:
            self.terms.pop(mono, None)

    def __add__(self, other: "TensorPoly") -> "TensorPoly":
        out = self.copy()
        for m, c in other.terms.items():
            out.add_term(m, c)
        return out

    def __neg__(self):
        return TensorPoly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s) -> "TensorPoly":
        return TensorPoly({m: c * s for m, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, TensorPoly):
            return self.product(other)
        return self.scale(other)

    __rmul__ = scale

    def product(self, other: "TensorPoly", nsym=None) -> "TensorPoly":
        """Ordered product; labels common to both factors are contracted."""
        out = TensorPoly()
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                for m, c in TensorPoly.from_atoms(join(m1, m2), c1 * c2, nsym).terms.items():
                    out.add_term(m, c)
        return out

    def map_coeffs(self, f: Callable) -> "TensorPoly":
        return TensorPoly({m: f(c) for m, c in self.terms.items()})

    def relabel(self, mapping: dict[int, int]) -> "TensorPoly":
        out = TensorPoly()
        for m, c in self.terms.items():
            for mm, cc in TensorPoly.from_atoms(relabel(m, mapping), c).terms.items():
                out.add_term(mm, cc)
        return out

    def free(self) -> set[int]:
        out: set[int] = set()
        for m in self.terms:
            out |= free_labels(m)
        return out

    def serialize(self, coeff_fmt: Callable = str) -> str:
        lines = []
        for m, c in sorted(self.terms.items()):
            lines.append(f"{coeff_fmt(c)} | {format_mono(m)}")
        return "\n".join(lines)

    def __repr__(self):
        return "TensorPoly(\n" + self.serialize() + "\n)"


def mono_sort_key(mono):
    return mono


# ---------------------------------------------------------------- operations

def symmetrize(p: TensorPoly, indices: Iterable[int]) -> TensorPoly:
    """Average over all permutations of the given free labels."""
    idx = list(indices)
    fr = p.free()
    for x in idx:
        if x not in fr:
            raise TensorError(f"label {x} is not free")
    out = TensorPoly()
    w = Fraction(1, factorial(len(idx)))
    for perm in itertools.permutations(idx):
        out = out + p.relabel(dict(zip(idx, perm))).scale(w)
    return out


def sym_metric_product(labels: list[int], coeff=1) -> TensorPoly:
    """Sum over all perfect matchings of ``labels`` of products of metrics."""
    out = TensorPoly()
    for match in perfect_matchings(list(labels)):
        atoms = [(G, (), (x, y)) for x, y in match]
        for m, c in TensorPoly.from_atoms(atoms, coeff).terms.items():
            out.add_term(m, c)
    return out


def perfect_matchings(items: list):
    if not items:
        yield []
        return
    first = items[0]
    for j in range(1, len(items)):
        rest = items[1:j] + items[j + 1:]
        for m in perfect_matchings(rest):
            yield [(first, items[j])] + m


def contract_metric(p: TensorPoly) -> TensorPoly:
    """Eliminate metric factors carrying dummy slots (traces give n)."""
    out = TensorPoly()
    for m, c in p.terms.items():
        for mm, cc in TensorPoly.from_atoms(m, c).terms.items():
            out.add_term(mm, cc)
    return out


def lorentz_trace(p: TensorPoly, free: tuple[int, int] = (0, 1)) -> TensorPoly:
    """Contract the two free labels with a metric."""
    if p and p.free() != set(free):
        raise TensorError(f"trace needs exactly free labels {free}, got {sorted(p.free())}")
    g = TensorPoly.from_atoms([(G, (), free)], 1)
    return g.product(p)


def dummy_count(mono) -> int:
    return sum(1 for c in labels_of(mono).values() if c == 2)


__all__ = [
    "AINV", "COMMUTING", "DUMMY0", "G", "I", "K", "KMARK", "L", "R", "W", "X",
    "TensorError", "TensorPoly", "atom", "canon", "canonicalize", "clear_cache",
    "contract_metric", "eliminate", "format_mono", "free_labels", "join",
    "labels_of", "lorentz_trace", "mass_dim", "parse_mono", "perfect_matchings",
    "relabel", "shift_dummies", "sym_metric_product", "symmetrize",
]
