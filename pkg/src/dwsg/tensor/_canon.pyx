# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled orbit-minimizing canonicalizer; mirrors ``_canon_py`` exactly."""

cdef enum:
    KMARK = 1000
    DUMMY0 = 2000

cdef int G = 0, K = 1, R = 2, L = 3, AINV = 4, W = 5, X = 6, I = 7

cdef tuple _R_SYM = (
    ((0, 1, 2, 3), 1), ((1, 0, 2, 3), -1), ((0, 1, 3, 2), -1), ((1, 0, 3, 2), 1),
    ((2, 3, 0, 1), 1), ((3, 2, 0, 1), -1), ((2, 3, 1, 0), -1), ((3, 2, 1, 0), 1),
)
cdef tuple _W_SYM = (((0, 1), 1), ((1, 0), -1))
cdef tuple _G_SYM = (((0, 1), 1), ((1, 0), 1))
cdef dict _ID_SYM = {}


cdef tuple _sym(int kind, int nslots):
    if kind == R:
        return _R_SYM
    if kind == W:
        return _W_SYM
    if kind == G:
        return _G_SYM
    s = _ID_SYM.get(nslots)
    if s is None:
        s = _ID_SYM[nslots] = ((tuple(range(nslots)), 1),)
    return s


cdef inline bint _commuting(int kind):
    return kind == G or kind == K or kind == R or kind == L or kind == AINV


cdef dict _count(atoms):
    cdef dict cnt = {}
    cdef long x
    for atom in atoms:
        for x in atom[1]:
            cnt[x] = cnt.get(x, 0) + 1
        for x in atom[2]:
            cnt[x] = cnt.get(x, 0) + 1
    cnt.pop(KMARK, None)
    for x, c in cnt.items():
        if c > 2:
            raise ValueError(f"label {x} occurs {c} times")
    return cnt


cdef tuple _shape(tuple atom, dict cnt):
    cdef long x
    d = atom[1]
    s = atom[2]
    dd = []
    for x in d:
        dd.append(x if (x == KMARK or cnt[x] == 1) else -1)
    ss = []
    for x in s:
        ss.append(x if (x == KMARK or cnt[x] == 1) else -1)
    ss.sort()
    return (atom[0], len(d), tuple(dd), tuple(ss))


def canonicalize(atoms):
    """Return ``(canonical_atoms, sign)``; sign 0 means the monomial vanishes."""
    cdef dict cnt = _count(atoms)
    if len(atoms) > 60:  # bitmask width
        from ._canon_py import canonicalize as slow
        return slow(atoms)
    cdef list comm = [a for a in atoms if _commuting(a[0])]
    cdef list bund = [a for a in atoms if not _commuting(a[0])]
    cdef int n_comm, total, pos, j, sg, kind
    cdef long x, y, c, used, nd
    comm.sort(key=lambda a: _shape(a, cnt))
    cdef list shapes = [_shape(a, cnt) for a in comm]
    n_comm = len(comm)
    total = n_comm + len(bund)

    cdef list states = [(0, {}, DUMMY0, 1)]
    cdef list key = []
    cdef list nxt
    cdef list cands
    cdef dict m
    cdef tuple best, ak
    for pos in range(total):
        best = None
        nxt = []
        if pos < n_comm:
            cands = [j for j in range(n_comm) if shapes[j] == shapes[pos]]
        else:
            cands = None
        for st in states:
            used = st[0]
            rmap = st[1]
            nd = st[2]
            sign = st[3]
            if cands is None:
                choices = ((-1, bund[pos - n_comm]),)
            else:
                choices = tuple((j, comm[j]) for j in cands if not (used >> j) & 1)
            for j, atom in choices:
                kind = atom[0]
                d = atom[1]
                s = atom[2]
                for perm, sg in _sym(kind, len(s)):
                    m = (<dict>rmap).copy()
                    c = nd
                    nd_ = []
                    for x in d:
                        if x != KMARK and cnt.get(x) == 2:
                            yo = m.get(x)
                            if yo is None:
                                m[x] = c
                                y = c
                                c += 1
                            else:
                                y = yo
                            nd_.append(y)
                        else:
                            nd_.append(x)
                    ns_ = []
                    for p in perm:
                        x = s[p]
                        if x != KMARK and cnt.get(x) == 2:
                            yo = m.get(x)
                            if yo is None:
                                m[x] = c
                                y = c
                                c += 1
                            else:
                                y = yo
                            ns_.append(y)
                        else:
                            ns_.append(x)
                    ak = (kind, tuple(nd_), tuple(ns_))
                    if best is None or ak < best:
                        best = ak
                        nxt = []
                    if ak == best:
                        nxt.append((used | ((<long>1) << j) if j >= 0 else used, m, c, sign * sg))
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
