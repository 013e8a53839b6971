"""Random equivalent presentations of a monomial (for tests and benchmarks)."""

from __future__ import annotations

import random

from ._canon_py import COMMUTING, KMARK, _sym
from .core import labels_of


def random_presentation(mono, rng: random.Random) -> tuple[tuple, int]:
    """Shuffle commuting factors, apply slot symmetries and rename dummies.

    Returns ``(atoms, sign)`` with ``atoms == sign * mono`` as tensors.
    """
    cnt = labels_of(mono)
    dummies = [x for x, c in cnt.items() if c == 2]
    fresh = rng.sample(range(3000, 3000 + 4 * len(dummies) + 8), len(dummies))
    ren = dict(zip(dummies, fresh))
    sign = 1
    atoms = []
    for kind, d, s in mono:
        perm, sg = rng.choice(_sym(kind, len(s)))
        # slot j of the new atom holds old slot perm^-1(j)
        inv = [0] * len(s)
        for j, p in enumerate(perm):
            inv[p] = j
        ns = tuple(s[inv[j]] for j in range(len(s)))
        sign *= sg
        r = lambda x: x if x == KMARK else ren.get(x, x)
        atoms.append((kind, tuple(r(x) for x in d), tuple(r(x) for x in ns)))
    comm = [a for a in atoms if a[0] in COMMUTING]
    rng.shuffle(comm)
    it = iter(comm)
    bund_slots = [a[0] in COMMUTING for a in atoms]
    # commuting factors may move anywhere; bundle factors keep their order
    bund = [a for a in atoms if a[0] not in COMMUTING]
    merged = []
    bi = iter(bund)
    order = bund_slots[:]
    rng.shuffle(order)
    for is_comm in order:
        merged.append(next(it) if is_comm else next(bi))
    return tuple(merged), sign
