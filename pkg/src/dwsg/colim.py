"""Universal coincidence limits of the phase function l and transport function I.

Entries are stored for the generic ordered derivative string
``D_0 D_1 ... D_{m-1}``; the limit for any other label sequence is the same
entry with position ``i`` renamed to ``seq[i]``.  For ``I`` the x-index is
the label :data:`E_LABEL` and the x'-index :data:`C_LABEL`.
"""

from __future__ import annotations

import hashlib
import itertools
import os
import tempfile
from fractions import Fraction
from math import factorial
from pathlib import Path

from .tensor import G, K, KMARK, R, W, TensorPoly, format_mono, parse_mono
from .tensor.core import canon

FORMAT_VERSION = 1
HARD_CAP = 8
E_LABEL = 90
C_LABEL = 91
_F = 500  # scratch dummy used inside commutator terms

#: instrumentation: number of buildLimits invocations in this process
BUILD_CALLS = 0


class ColimError(RuntimeError):
    pass


class CacheFormatError(ColimError):
    pass


class CacheInsufficientError(ColimError):
    pass


def _add(acc: dict, mono, c):
    v = acc.get(mono, 0) + c
    if v:
        acc[mono] = v
    else:
        acc.pop(mono, None)


def _poly_from(atoms, coeff) -> dict:
    mono, sign, npow, kpow = canon(atoms)
    if sign == 0:
        return {}
    if npow or kpow:
        raise ColimError("unexpected trace in a coincidence limit")
    return {mono: coeff * sign}


class CoinLimitTable:
    """Generic-order coincidence limits for one function up to ``max_order``."""

    def __init__(self, fn: str, entries: dict[int, TensorPoly], max_order: int):
        if fn not in ("l", "I"):
            raise ValueError("fn must be 'l' or 'I'")
        self.fn = fn
        self.entries = entries
        self.max_order = max_order
        self.format_version = FORMAT_VERSION
        self._memo: dict = {}

    def __eq__(self, other):
        return (
            isinstance(other, CoinLimitTable)
            and self.fn == other.fn
            and self.max_order == other.max_order
            and self.entries == other.entries
        )

    def entry(self, order: int) -> TensorPoly:
        if order > self.max_order:
            raise CacheInsufficientError(
                f"{self.fn}-table holds orders <= {self.max_order}; order {order} needed"
            )
        return self.entries[order]

    def lookup(self, seq: tuple, e: int = E_LABEL, c: int = C_LABEL) -> dict:
        """[D_seq F] with positions renamed to ``seq`` (and e, c for I)."""
        key = (tuple(seq), e, c)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        base = self.entry(len(seq))
        mapping = {i: x for i, x in enumerate(seq)}
        if self.fn == "I":
            mapping[E_LABEL] = e
            mapping[C_LABEL] = c
        from .tensor.core import relabel

        out: dict = {}
        for mono, coeff in base.terms.items():
            for m, v in _poly_from(relabel(mono, mapping), coeff).items():
                _add(out, m, v)
        self._memo[key] = out
        return out

    # ------------------------------------------------------------ persistence

    def _records(self) -> list[str]:
        lines = []
        for order in range(self.max_order + 1):
            poly = self.entries[order]
            terms = " ; ".join(f"{c} | {format_mono(m)}" for m, c in sorted(poly.terms.items()))
            lines.append(f"entry {','.join(str(i) for i in range(order))} :: {terms}")
        return lines

    def dumps(self) -> str:
        body = "\n".join(self._records()) + "\n"
        digest = hashlib.sha256(body.encode()).hexdigest()
        head = (
            f"dwsg-colim formatVersion={FORMAT_VERSION}\n"
            f"fn={self.fn}\nmaxOrder={self.max_order}\nhash={digest}\n"
        )
        return head + body


def _commutator_terms(fn: str, prefix: tuple, x: int, y: int, inner: tuple, table_lookup) -> dict:
    """[D_P [D_x, D_y] D_Q F] at coincidence (Q = inner)."""
    out: dict = {}
    # Lorentz slots of D_Q F: the Q labels, plus the x-index e for I
    slot_list = list(range(len(inner)))
    if fn == "I":
        slot_list.append("e")
    npre = len(prefix)
    for r in range(npre + 1):
        for sub in itertools.combinations(range(npre), r):
            p1 = tuple(prefix[i] for i in sub)
            p2 = tuple(prefix[i] for i in range(npre) if i not in sub)
            for s in slot_list:
                if s == "e":
                    lab = E_LABEL
                    lower = table_lookup(p2 + inner, _F)
                else:
                    lab = inner[s]
                    q2 = inner[:s] + (_F,) + inner[s + 1:]
                    lower = table_lookup(p2 + q2, E_LABEL)
                curv = (R, p1, (lab, _F, x, y))
                for mono, c in lower.items():
                    for m, v in _poly_from((curv,) + tuple(mono), c).items():
                        _add(out, m, v)
            if fn == "I":
                lower = table_lookup(p2 + inner, E_LABEL)
                wat = (W, p1, (x, y))
                for mono, c in lower.items():
                    for m, v in _poly_from(_place_w(wat, mono), c).items():
                        _add(out, m, v)
    return out


def _place_w(wat, mono):
    """W multiplies the bundle matrix from the left of all bundle factors."""
    return (wat,) + tuple(mono)


def build_limits(fn: str, max_order: int) -> CoinLimitTable:
    global BUILD_CALLS
    BUILD_CALLS += 1
    if max_order > HARD_CAP:
        raise ColimError(f"maxOrder {max_order} exceeds hard cap {HARD_CAP}")
    if max_order < 0:
        raise ValueError("maxOrder must be nonnegative")
    entries: dict[int, TensorPoly] = {}
    if fn == "l":
        entries[0] = TensorPoly()
        if max_order >= 1:
            entries[1] = TensorPoly({((K, (), (0,)),): Fraction(1)})
        start = 2
    else:
        entries[0] = TensorPoly({((G, (), (C_LABEL, E_LABEL)),): Fraction(1)})
        entries[0] = TensorPoly(_poly_from(((G, (), (E_LABEL, C_LABEL)),), Fraction(1)))
        start = 1
    table = CoinLimitTable(fn, entries, min(max_order, start - 1))

    def lookup(seq, e):
        return table.lookup(seq, e, C_LABEL)

    for m in range(start, max_order + 1):
        table.max_order = m - 1
        corr_memo: dict = {}

        def corr(seq):
            # [D_seq F] - [D_id F]
            if seq in corr_memo:
                return corr_memo[seq]
            t = next((i for i in range(m - 1) if seq[i] > seq[i + 1]), None)
            if t is None:
                res: dict = {}
            else:
                swapped = seq[:t] + (seq[t + 1], seq[t]) + seq[t + 2:]
                res = dict(corr(swapped))
                for mono, c in _commutator_terms(fn, seq[:t], seq[t], seq[t + 1], seq[t + 2:], lookup).items():
                    _add(res, mono, c)
            corr_memo[seq] = res
            return res

        total: dict = {}
        for perm in itertools.permutations(range(m)):
            for mono, c in corr(perm).items():
                _add(total, mono, c)
        w = Fraction(-1, factorial(m))
        entries[m] = TensorPoly({mono: c * w for mono, c in total.items()})
        table._memo.clear()
    table.max_order = max_order
    return table


# ---------------------------------------------------------------- persistence

def save_table(t: CoinLimitTable, location) -> Path:
    path = Path(location)
    if path.is_dir():
        path = path / f"colim_{t.fn}.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    data = t.dumps()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(data)
    os.replace(tmp, path)
    return path


def _parse_terms(text: str, lineno: int) -> TensorPoly:
    out = TensorPoly()
    text = text.strip()
    if not text:
        return out
    for chunk in text.split(" ; "):
        try:
            cs, ms = chunk.split(" | ")
            atoms, sign = parse_mono(ms)
            mono, s2, npow, kpow = canon(atoms)
        except Exception as exc:
            raise CacheFormatError(f"line {lineno}: cannot parse term {chunk!r}: {exc}") from exc
        if s2 == 0 or npow or kpow:
            raise CacheFormatError(f"line {lineno}: non-canonical term {chunk!r}")
        out.add_term(mono, Fraction(cs) * sign * s2)
    return out


def loads_table(text: str) -> CoinLimitTable:
    lines = text.splitlines()
    if len(lines) < 4:
        raise CacheFormatError("line 1: truncated header")
    if not lines[0].startswith("dwsg-colim formatVersion="):
        raise CacheFormatError(f"line 1: not a coincidence-limit cache: {lines[0]!r}")
    version = int(lines[0].split("=", 1)[1])
    if version != FORMAT_VERSION:
        raise ColimError(f"incompatible cache formatVersion {version} (expected {FORMAT_VERSION})")
    try:
        fn = lines[1].split("=", 1)[1]
        max_order = int(lines[2].split("=", 1)[1])
        digest = lines[3].split("=", 1)[1]
    except Exception as exc:
        raise CacheFormatError(f"line 2-4: malformed header: {exc}") from exc
    body = "\n".join(lines[4:]) + "\n"
    if hashlib.sha256(body.encode()).hexdigest() != digest:
        raise CacheFormatError("content hash mismatch")
    entries = {}
    for off, line in enumerate(lines[4:]):
        lineno = off + 5
        if not line.startswith("entry "):
            raise CacheFormatError(f"line {lineno}: expected entry record: {line!r}")
        head, _, terms = line[6:].partition(" :: ")
        order = 0 if not head.strip() else len(head.split(","))
        entries[order] = _parse_terms(terms, lineno)
    if sorted(entries) != list(range(max_order + 1)):
        raise CacheFormatError("entries do not cover 0..maxOrder")
    return CoinLimitTable(fn, entries, max_order)


def load_table(location) -> CoinLimitTable:
    path = Path(location)
    return loads_table(path.read_text())


def cache_path(cache_dir, fn: str) -> Path:
    return Path(cache_dir) / f"colim_{fn}.txt"


def load_or_build(fn: str, max_order: int, cache_dir=None) -> CoinLimitTable:
    """Read a cached table covering ``max_order``; build and store otherwise."""
    if cache_dir is not None:
        p = cache_path(cache_dir, fn)
        if p.exists():
            t = load_table(p)
            if t.max_order >= max_order:
                return t
    t = build_limits(fn, max_order)
    if cache_dir is not None:
        save_table(t, cache_path(cache_dir, fn))
    return t
