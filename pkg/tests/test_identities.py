import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwsg.coeffring import ParamScalar
from dwsg.identities import (
    Reducer,
    _order_key,
    all_relations,
    apply_bianchi_and_cyclic,
    basis_dim4,
    commute_to_canonical_order,
    inversions,
    nf_equal,
    reducer_for,
)
from dwsg.pipeline import load_golden
from dwsg.tensor import TensorPoly, mass_dim

E4_BASIS = frozenset(load_golden("E4full").monomials())


@pytest.fixture(scope="module")
def closure_monos():
    red = reducer_for(E4_BASIS)
    red.close(E4_BASIS)
    return sorted(red.seen)


def _p(text, c=1):
    return TensorPoly.parse(text, Fraction(c))


@pytest.mark.parametrize(
    "expr",
    [
        ["R(a,b,c,d)", "R(a,c,d,b)", "R(a,d,b,c)"],
        ["D(e)R(a,b,c,d)", "D(c)R(a,b,d,e)", "D(d)R(a,b,e,c)"],
        ["D(c)W(a,b)", "D(a)W(b,c)", "D(b)W(c,a)"],
    ],
)
def test_identity_displays_reduce_to_zero(expr):
    total = TensorPoly()
    for t in expr:
        total = total + _p(t)
    assert not Reducer(_order_key(frozenset())).normal_form(total)


def test_ricci_commutation_on_x():
    lhs = _p("D(a,b)X(c,d)") - _p("D(b,a)X(c,d)")
    rhs = (
        _p("R(c,i,a,b) X(i,d)") + _p("R(d,i,a,b) X(c,i)") + _p("W(a,b) X(c,d)") - _p("X(c,d) W(a,b)")
    )
    assert not Reducer(_order_key(frozenset())).normal_form(lhs - rhs)


def test_canonical_derivative_order():
    out = commute_to_canonical_order(_p("D(b,a)X(a,b)")) + commute_to_canonical_order(_p("D(j,i,i)X(j,k) X(k,a)"))
    assert out
    assert all(inversions(m) == 0 for m in out.terms)


def test_relations_are_homogeneous_and_consistent(closure_monos):
    red = reducer_for(E4_BASIS)
    rng = random.Random(1)
    for mono in rng.sample(closure_monos, 25):
        for rel in all_relations(mono):
            dims = {mass_dim(m) for m in rel}
            assert len(dims) == 1
            assert not red.normal_form(TensorPoly({m: Fraction(c) for m, c in rel.items()}))


@settings(max_examples=60)
@given(st.data())
def test_normal_form_idempotent(closure_monos, data):
    k = data.draw(st.integers(1, 6))
    idx = data.draw(st.lists(st.integers(0, len(closure_monos) - 1), min_size=k, max_size=k))
    coeffs = data.draw(st.lists(st.integers(-5, 5), min_size=k, max_size=k))
    p = TensorPoly()
    for i, c in zip(idx, coeffs):
        p.add_term(closure_monos[i], Fraction(c))
    once = apply_bianchi_and_cyclic(p, E4_BASIS)
    assert apply_bianchi_and_cyclic(once, E4_BASIS) == once
    assert set(once.terms) <= E4_BASIS | set(closure_monos)


def test_basis_helpers():
    assert set(basis_dim4({0, 1})) == set(E4_BASIS)
    assert len(basis_dim4(set())) == 14
    g = load_golden("E4full").poly()
    ok, diff = nf_equal(g, g, E4_BASIS)
    assert ok and not diff


def test_pipeline_output_lies_in_basis(e4):
    assert set(e4.poly.terms) <= E4_BASIS
    assert set(e4.trace.terms) <= set(basis_dim4(set()))


def _coef(poly, text):
    (mono, c), = TensorPoly.parse(text).terms.items()
    return poly.terms.get(mono, ParamScalar()) * ParamScalar.rational(c)


def test_commutator_sum_rule(e2, e4):
    # the XW and WX coefficients of tr E4 add up to the W coefficient of E2
    s = _coef(e4.trace, "X(i,j) W(i,j)") + _coef(e4.trace, "W(i,j) X(i,j)")
    assert s == _coef(e2.poly, "W(a,b)")
    assert _coef(e2.poly, "W(a,b)") == _coef(load_golden("E2").poly(), "W(a,b)")
