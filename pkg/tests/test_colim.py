import itertools

import pytest

from dwsg import colim
from dwsg.colim import (
    C_LABEL,
    E_LABEL,
    CacheFormatError,
    CacheInsufficientError,
    ColimError,
    build_limits,
    load_or_build,
    load_table,
    loads_table,
    save_table,
)
from dwsg.tensor import TensorPoly, symmetrize


@pytest.fixture(scope="module")
def tables():
    return build_limits("l", 6), build_limits("I", 5)


def _poly(d: dict) -> TensorPoly:
    return TensorPoly(dict(d))


@pytest.mark.parametrize("fn", ["l", "I"])
def test_symmetrized_derivatives_vanish(tables, fn):
    t = tables[0] if fn == "l" else tables[1]
    start = 2 if fn == "l" else 1
    for m in range(start, t.max_order + 1):
        entry = t.entry(m)
        assert entry.free() <= set(range(m)) | {E_LABEL, C_LABEL}
        # symmetrize over the derivative positions of the stored entry
        p = TensorPoly(dict(entry.terms))
        sym = symmetrize(p, [i for i in range(m) if i in p.free()]) if p else p
        assert not sym, (fn, m)
        # replay through permuted lookups as well
        total = TensorPoly()
        for perm in itertools.permutations(range(m)):
            total = total + _poly(t.lookup(perm))
        assert not total, (fn, m)


def test_first_entries(tables):
    lt, it = tables
    assert not lt.entry(0)
    assert lt.entry(1) == TensorPoly.parse("k(a)")
    assert it.entry(0) == TensorPoly({m: 1 for m in TensorPoly.parse("g(a,b)").relabel({0: E_LABEL, 1: C_LABEL}).terms})


def test_ricci_exchange_on_transport_function(tables):
    it = tables[1]
    diff = _poly(it.lookup((0, 1))) - _poly(it.lookup((1, 0)))
    # [D_a, D_b] acting on I at coincidence: bundle curvature plus the vector-index curvature
    rhs = TensorPoly.parse("g(c,d) W(a,b)") + TensorPoly.parse("R(a,b,c,d)")
    assert diff == rhs.relabel({2: E_LABEL, 3: C_LABEL})


def test_universal_and_deterministic():
    assert build_limits("I", 4).dumps() == build_limits("I", 4).dumps()
    assert build_limits("l", 5).dumps() == build_limits("l", 5).dumps()


def test_cache_roundtrip_and_reuse(tmp_path):
    t = load_or_build("l", 4, tmp_path)
    assert load_table(tmp_path / "colim_l.txt") == t
    before = colim.BUILD_CALLS
    t2 = load_or_build("l", 3, tmp_path)
    assert colim.BUILD_CALLS == before and t2 == t
    load_or_build("l", 5, tmp_path)  # insufficient cache is rebuilt
    assert colim.BUILD_CALLS == before + 1
    assert load_table(tmp_path / "colim_l.txt").max_order == 5


def test_cache_integrity_errors(tmp_path):
    path = save_table(build_limits("I", 3), tmp_path)
    text = path.read_text()
    with pytest.raises(CacheFormatError):
        loads_table(text.replace("entry 0", "entry  0", 1) + "junk\n")
    with pytest.raises(CacheFormatError):
        loads_table(text[:-20])
    with pytest.raises(ColimError):
        loads_table(text.replace("formatVersion=1", "formatVersion=9", 1))
    with pytest.raises(CacheFormatError):
        loads_table("hello\n")


def test_limits_and_caps():
    with pytest.raises(CacheInsufficientError):
        build_limits("l", 2).entry(3)
    with pytest.raises(ColimError):
        build_limits("l", 9)
    with pytest.raises(ValueError):
        build_limits("q", 2)
