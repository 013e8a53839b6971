"""Orbit-minimizing monomial canonicalizer (reference implementation).

A monomial is a tuple of atoms ``(kind, derivs, slots)`` whose labels are
ints: free labels < KMARK < dummy labels.  A label seen twice is a dummy.
"""

KMARK = 1000
DUMMY0 = 2000

# kind codes; the order here is the canonical atom order
G, K, R, L, AINV, W, X, I = range(8)
COMMUTING = frozenset((G, K, R, L, AINV))

_SYM = {
    R: (
        ((0, 1, 2, 3), 1), ((1, 0, 2, 3), -1), ((0, 1, 3, 2), -1), ((1, 0, 3, 2), 1),
        ((2, 3, 0, 1), 1), ((3, 2, 0, 1), -1), ((2, 3, 1, 0), -1), ((3, 2, 1, 0), 1),
    ),
    W: (((0, 1), 1), ((1, 0), -1)),
    G: (((0, 1), 1), ((1, 0), 1)),
}


def _sym(kind, nslots):
    s = _SYM.get(kind)
    if s is None:
        return ((tuple(range(nslots)), 1),)
    return s


def _count(atoms):
    cnt = {}
    for _, d, s in atoms:
        for x in d:
            cnt[x] = cnt.get(x, 0) + 1
        for x in s:
            cnt[x] = cnt.get(x, 0) + 1
    cnt.pop(KMARK, None)
    for x, c in cnt.items():
        if c > 2:
            raise ValueError(f"label {x} occurs {c} times")
    return cnt


def _shape(atom, cnt):
    kind, d, s = atom
    cls = lambda x: x if (x == KMARK or cnt[x] == 1) else -1
    return (kind, len(d), tuple(cls(x) for x in d), tuple(sorted(cls(x) for x in s)))


def canonicalize(atoms):
    """Return ``(canonical_atoms, sign)``; sign 0 means the monomial vanishes."""
    cnt = _count(atoms)
    comm = [a for a in atoms if a[0] in COMMUTING]
    bund = [a for a in atoms if a[0] not in COMMUTING]
    comm.sort(key=lambda a: _shape(a, cnt))
    shapes = [_shape(a, cnt) for a in comm]
    # available atoms per position: all commuting atoms sharing the shape
    n_comm = len(comm)
    total = n_comm + len(bund)

    # state: (used bitmask, relabel dict, next dummy, sign, key list)
    states = [(0, {}, DUMMY0, 1)]
    key = []
    for pos in range(total):
        best = None
        nxt = []
        if pos < n_comm:
            cands = [j for j in range(n_comm) if shapes[j] == shapes[pos]]
        else:
            cands = None
        for used, rmap, nd, sign in states:
            if cands is None:
                choices = ((None, bund[pos - n_comm]),)
            else:
                choices = tuple((j, comm[j]) for j in cands if not used >> j & 1)
            for j, atom in choices:
                kind, d, s = atom
                for perm, sg in _sym(kind, len(s)):
                    m = rmap.copy()
                    c = nd
                    nd_ = []
                    for x in d:
                        if x != KMARK and cnt.get(x) == 2:
                            y = m.get(x)
                            if y is None:
                                y = m[x] = c
                                c += 1
                            nd_.append(y)
                        else:
                            nd_.append(x)
                    ns_ = []
                    for p in perm:
                        x = s[p]
                        if x != KMARK and cnt.get(x) == 2:
                            y = m.get(x)
                            if y is None:
                                y = m[x] = c
                                c += 1
                            ns_.append(y)
                        else:
                            ns_.append(x)
                    ak = (kind, tuple(nd_), tuple(ns_))
                    if best is None or ak < best:
                        best = ak
                        nxt = []
                    if ak == best:
                        nxt.append((used | (1 << j) if j is not None else used, m, c, sign * sg))
        key.append(best)
        seen = set()
        states = []
        for st in nxt:
            h = (st[0], tuple(sorted(st[1].items())), st[3])
            if h not in seen:
                seen.add(h)
                states.append(st)
    signs = {st[3] for st in states}
    if len(signs) > 1:
        return tuple(key), 0
    return tuple(key), signs.pop()
