from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwsg.coeffring import (
    A,
    N,
    DivergentLimitError,
    N4Scalar,
    ParamScalar,
    PoleError,
    eval_exact,
    eval_numeric,
    limit_n,
    limit_n4,
    parse_rational,
    pochhammer,
    qn,
    rat,
    rational_to_str,
    series_at_a0,
)
from dwsg.pipeline import load_golden

small = st.integers(-4, 4)


@st.composite
def rationals(draw, n_free=False):
    num = 0
    for i in range(3):
        for j in range(2):
            num += draw(small) * A**i * N**j
    dens = [1, A, 1 - A, A * (1 - A)] if n_free else [1, A, 1 - A, N + 2, A * N, (N + 4) * (1 - A)]
    return rat(num) / rat(draw(st.sampled_from(dens)))


@st.composite
def scalars(draw, n_free=False):
    terms = []
    for _ in range(draw(st.integers(0, 3))):
        c = draw(st.integers(-2, 2))
        q = draw(st.integers(-1, 2)) if not n_free else 0
        terms.append((draw(rationals(n_free)), c, q))
    return ParamScalar.from_terms(terms)


@settings(max_examples=220)
@given(scalars(), scalars(), scalars())
def test_field_axioms(x, y, z):
    assert (x + y) + z == x + (y + z)
    assert x * (y + z) == x * y + x * z
    assert x * y == y * x
    assert (x - x).is_zero()


@settings(max_examples=100)
@given(scalars())
def test_normalize_idempotent_and_serialize_roundtrip(x):
    assert x.normalize().normalize() == x.normalize()
    assert ParamScalar.parse(x.serialize()) == x
    assert ParamScalar.parse(x.serialize()).serialize() == x.serialize()


@settings(max_examples=60)
@given(scalars(n_free=True), scalars(n_free=True))
def test_limit_n4_multiplicative_on_pole_free(x, y):
    assert limit_n4(x * y) == limit_n4(x) * limit_n4(y)
    assert limit_n4(x + y) == limit_n4(x) + limit_n4(y)


def test_rational_helpers():
    assert pochhammer(N / 2, 0) == rat(1)
    assert pochhammer(N / 2, 2) == (N / 2) * (N / 2 + 1)
    r = (A**2 - 3 * N) / (2 * A * (1 - A))
    assert parse_rational(rational_to_str(r)) == r


def test_half_power_exponent_and_eval():
    x = ParamScalar.half_power(rat(3), 2, 1)  # 3 (1-a)^(2 - n/2)
    a, n = Fraction(1, 3), Fraction(6)
    assert eval_exact(x, a, n) == 3 * (Fraction(2, 3)) ** (2 - 3)
    assert abs(eval_numeric(x, a, n) - mpmath.mpf(9) / 2) < mpmath.mpf(10) ** -40


def test_n4_scalar_rejects_n_and_log_squared():
    with pytest.raises(ValueError):
        N4Scalar(N, 0)
    lg = N4Scalar(0, 1)
    with pytest.raises(ArithmeticError):
        lg * lg


def test_limit_picks_up_log_at_simple_pole():
    # ((1-a)^(2-n/2) - 1) / (n-4) -> -log(1-a) / 2 at n = 4
    x = (ParamScalar.half_power(rat(1), 2, 1) - ParamScalar.rational(1)) * ParamScalar.rational(1 / (N - 4))
    assert limit_n4(x) == N4Scalar(0, rat(Fraction(-1, 2)))
    with pytest.raises(DivergentLimitError):
        limit_n(ParamScalar.rational(1 / (N - 2)), 2)


def _stored_n4_lists():
    return [("trE4", "trE4_n4"), ("E4full", "E4full_n4")]


@pytest.mark.parametrize("gen,n4", _stored_n4_lists())
def test_reference_lists_limit_to_stored_n4_lists(gen, n4):
    g, h = load_golden(gen), load_golden(n4)
    assert set(g.coeffs) == set(h.coeffs)
    for k, c in g.coeffs.items():
        assert limit_n4(c) == h.coeffs[k], k


def test_named_n4_values():
    full = load_golden("E4full_n4").coeffs
    tr = load_golden("trE4_n4").coeffs
    assert full["C40"] == N4Scalar(rat(Fraction(2, 360)), rat(Fraction(-1, 360)))
    assert tr["C7"] == N4Scalar(rat(Fraction(1, 3)))
    assert tr["C8"] == N4Scalar(rat(Fraction(-11, 180)))


@pytest.mark.parametrize("label", ["trE4", "E4full"])
def test_numeric_value_near_n4_matches_limit(label):
    g, h = load_golden(label), load_golden(label + "_n4")
    import random

    rng = random.Random(7)
    eps = Fraction(1, 10**18)
    for k in sorted(g.coeffs)[:12]:
        a = Fraction(rng.randint(1, 9), 10)
        near = eval_numeric(g.coeffs[k], a, 4 + eps, dps=60)
        lim = eval_numeric(h.coeffs[k], a, 4, dps=60)
        assert abs(near - lim) <= mpmath.mpf(10) ** -12 * max(1, abs(lim)), (k, a)


def test_series_at_a0_of_e2_coefficients():
    c = load_golden("E2").coeffs
    got = [series_at_a0(c[f"C{i}"], 0)[0] for i in range(1, 6)]
    assert got == [qn(1), qn(0), qn(0), qn(0), qn(Fraction(1, 6))]


def test_pole_error():
    x = ParamScalar.rational(1 / A)
    with pytest.raises(PoleError):
        eval_exact(x, 0, 4)
    with pytest.raises(PoleError):
        series_at_a0(x, 1)
