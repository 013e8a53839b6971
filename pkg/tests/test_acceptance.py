"""Acceptance gate; one PASS/FAIL line per criterion is printed at the end of the run.

Criteria 2, 3 and the E4 parts of 4 are strict xfails: the stored references
disagree with the computed result in exactly two coefficients each (see the
decision ledger). Companion tests pin the disagreement down so that any other
drift still fails.
"""

import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

import mpmath
import pytest

from dwsg.coeffring import N4Scalar, limit_n4, qn, rat, series_at_a0
from dwsg.pipeline import RunConfig, compare_golden, compute_e, dependency_rank, load_golden
from dwsg.symbolcalc import OperatorSpec
from dwsg.tensor import TensorPoly
from oracle import random_patterns, relative_error

CONFLICT = (
    "stored XW/WX coefficients violate the commutator sum rule that the computed result satisfies; "
    "see the decision ledger"
)
TESTS = Path(__file__).parent


def _coef(p, text):
    (mono, c), = TensorPoly.parse(text).terms.items()
    return p.terms.get(mono) * c if mono in p.terms else None


# ---------------------------------------------------------------- criterion 1

@pytest.mark.criterion(1)
def test_c1_e2_exact():
    t0 = time.perf_counter()
    res = compute_e(RunConfig(order=2))
    rep = compare_golden(res, "E2")
    assert rep.equal, rep.summary()
    assert len(load_golden("E2").coeffs) == 5
    assert time.perf_counter() - t0 < 10


# ---------------------------------------------------------------- criterion 2

@pytest.mark.criterion(2)
@pytest.mark.xfail(strict=True, reason=CONFLICT)
def test_c2_trace_e4_exact(e4):
    assert compare_golden(e4, "trE4").equal


def test_c2_mismatch_confined(e4):
    rep = compare_golden(e4, "trE4")
    assert rep.labels() == {"C5", "C6"}


def test_c2_sum_rule_computed_vs_stored(e2, e4):
    w = _coef(e2.poly, "W(a,b)")
    s = _coef(e4.trace, "X(i,j) W(i,j)") + _coef(e4.trace, "W(i,j) X(i,j)")
    assert s == w
    tr = load_golden("trE4").poly()
    assert _coef(tr, "X(i,j) W(i,j)") + _coef(tr, "W(i,j) X(i,j)") != w


# ---------------------------------------------------------------- criterion 3

@pytest.mark.criterion(3)
@pytest.mark.xfail(strict=True, reason=CONFLICT)
def test_c3_full_e4_exact():
    t0 = time.perf_counter()
    res = compute_e(RunConfig(order=4))
    elapsed = time.perf_counter() - t0
    assert elapsed < 3600
    assert compare_golden(res, "E4full").equal


def test_c3_mismatch_confined(e4):
    ref = load_golden("E4full")
    assert len(ref.terms) == 73 and len(ref.coeffs) == 43
    rep = compare_golden(e4, ref)
    assert rep.labels() == {"C37", "C38"}


def test_c3_conflicting_coefficients_follow_trace_relations(e4):
    ref = load_golden("E4full")
    c = ref.coeffs
    got = {m.label: m.computed for m in compare_golden(e4, ref).mismatches}
    assert got["C37"] == -c["C12"]
    assert got["C38"] == -c["C6"]


# ---------------------------------------------------------------- criterion 4

@pytest.mark.criterion(4)
def test_c4_e2_limit(e2):
    want = {m: limit_n4(c) for m, c in load_golden("E2").poly().terms.items()}
    got = {m: limit_n4(c) for m, c in e2.poly.terms.items()}
    assert got == want


@pytest.mark.criterion(4)
def test_c4_named_values(e4_n4):
    full, tr = load_golden("E4full_n4"), load_golden("trE4_n4")
    assert full.coeffs["C40"] == N4Scalar(rat(Fraction(2, 360)), rat(Fraction(-1, 360)))
    assert tr.coeffs["C7"] == N4Scalar(rat(Fraction(1, 3)))
    assert tr.coeffs["C8"] == N4Scalar(rat(Fraction(-11, 180)))
    labels = {lab: mono for mono, (lab, _) in full.labelled().items()}
    mono = labels["C40"]
    assert e4_n4.poly.terms[mono] * N4Scalar(full.labelled()[mono][1]) == full.coeffs["C40"]


@pytest.mark.criterion(4)
@pytest.mark.xfail(strict=True, reason=CONFLICT)
def test_c4_e4_limits(e4_n4):
    assert compare_golden(e4_n4, "E4full_n4").equal and compare_golden(e4_n4, "trE4_n4").equal


def test_c4_mismatch_confined(e4_n4, e4):
    assert compare_golden(e4_n4, "E4full_n4").labels() == {"C37", "C38"}
    assert compare_golden(e4_n4, "trE4_n4").labels() == {"C5", "C6"}
    # specialization commutes with the pipeline
    assert {m: limit_n4(c) for m, c in e4.poly.terms.items()} == e4_n4.poly.terms


# ---------------------------------------------------------------- criterion 5

def _a_free(p):
    for c in p.terms.values():
        assert set(c.sectors) <= {0}
        assert all(r.numer.degree(0) <= 0 and r.denom.degree(0) <= 0 for r in c.sectors.values())


@pytest.mark.criterion(5)
def test_c5_minimal_a_free(minimal4):
    _a_free(compute_e(RunConfig(operator=OperatorSpec("minimal"), order=2)).poly)
    _a_free(minimal4.poly)


@pytest.mark.criterion(5)
def test_c5_series_constants(e2):
    ref = load_golden("E2")
    want = [qn(v) for v in (1, 0, 0, 0, Fraction(1, 6))]
    consts = [series_at_a0(ref.coeffs[f"C{i}"], 0)[0] for i in range(1, 6)]
    assert consts == want
    # same constants from the computed coefficients, via the stored labelling
    computed = {}
    for mono, (label, factor) in ref.labelled().items():
        computed[label] = series_at_a0(e2.poly.terms[mono], 0)[0] / qn(factor)
    assert [computed[f"C{i}"] for i in range(1, 6)] == want


# ---------------------------------------------------------------- criterion 6

@pytest.mark.criterion(6)
@pytest.mark.parametrize("kind", ["minimal", "nonminimal"])
def test_c6_odd_vanish(kind):
    for m in (1, 3):
        res = compute_e(RunConfig(operator=OperatorSpec(kind), order=m))
        assert not res.poly and not res.trace


# ---------------------------------------------------------------- criterion 7

@pytest.mark.criterion(7)
def test_c7_rank():
    c = load_golden("E4full").coeffs
    coeffs = [c[k] for k in sorted(c, key=lambda s: int(s[1:]))]
    t0 = time.perf_counter()
    assert dependency_rank(coeffs, seed=101) == 15
    assert dependency_rank(coeffs, seed=202) == 15
    assert time.perf_counter() - t0 < 60


# ---------------------------------------------------------------- criterion 8

@pytest.mark.criterion(8)
def test_c8_integral_oracle():
    pats = random_patterns(20, seed=11)
    assert {p[-1] for p in pats} == {2, 4, 6}
    for pat in pats:
        assert relative_error(*pat, dps=50) < mpmath.mpf(10) ** -20, pat


# ---------------------------------------------------------------- criterion 9

SUITES = [
    "test_tensor.py::test_canonicalization_confluence",
    "test_colim.py::test_symmetrized_derivatives_vanish",
    "test_symbolcalc.py::test_recursion_residual_vanishes",
    "test_pipeline.py::test_determinism_across_parallelism",
]


@pytest.mark.criterion(9)
@pytest.mark.parametrize("suite", SUITES, ids=lambda s: s.split("::")[1])
def test_c9_property_suite_standalone(suite):
    r = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(TESTS / suite)],
        capture_output=True,
        text=True,
        cwd=TESTS.parent,
    )
    assert r.returncode == 0, r.stdout[-2000:]
