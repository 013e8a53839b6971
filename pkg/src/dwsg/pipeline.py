"""Driver: coincidence tables -> amplitude jets -> momentum integrals -> E_m.

The result carries the universal prefactor ``(4 pi)^(-n/2)`` only as a
marker string; every stored coefficient omits it.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import os
import random
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from multiprocessing import get_context
from pathlib import Path
from typing import Iterable

from . import colim
from .coeffring import (
    N4Scalar,
    ParamScalar,
    PoleError,
    eval_exact,
    limit_n4,
    poly_from_str,
    poly_to_str,
    rational_to_str,
    rat,
)
from .identities import Reducer, _order_key, reducer_for
from .jets import JPoly
from .linalg import rank as exact_rank
from .momentumint import assemble, group_integrands, integral_scalar, integrate_term, scalar_from_sectors
from .symbolcalc import COL, ROW, OperatorSpec, RealityError, make_solver
from .tensor import R, W, X, TensorPoly, format_mono, lorentz_trace, parse_mono
from .tensor.core import canon

log = logging.getLogger("dwsg.pipeline")

PREFACTOR = "(4*pi)^(-n/2)"
RESULT_FORMAT = 1
DEFAULT_ORDER_CAP = 4
FORMATS = ("latex", "machine")
DIMENSIONS = ("symbolic", "n4")


class PipelineError(RuntimeError):
    pass


class GoldenFormatError(PipelineError):
    pass


class TermError(PipelineError):
    """A module error raised while processing one amplitude term."""

    def __init__(self, term: str, cause: BaseException):
        super().__init__(f"while integrating amplitude term {term}: {cause}")
        self.term = term
        self.cause = cause


# ---------------------------------------------------------------- config

@dataclass
class RunConfig:
    operator: OperatorSpec = field(default_factory=OperatorSpec)
    order: int = 2
    dimension: str = "symbolic"
    cache_dir: str | None = None
    output_dir: str | None = None
    formats: tuple = ("machine",)
    jobs: int = 1
    order_cap: int = DEFAULT_ORDER_CAP
    instrumentation: bool = False

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be nonnegative")
        if self.order > self.order_cap:
            raise ValueError(f"order {self.order} exceeds the configured cap {self.order_cap}")
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"dimension must be one of {DIMENSIONS}")
        bad = set(self.formats) - set(FORMATS)
        if bad:
            raise ValueError(f"unknown output formats {sorted(bad)}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass
class EResult:
    kind: str
    order: int
    dimension: str
    poly: TensorPoly
    trace: TensorPoly | None = None
    prefactor: str = PREFACTOR
    stats: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, EResult):
            return NotImplemented
        return (
            (self.kind, self.order, self.dimension, self.prefactor)
            == (other.kind, other.order, other.dimension, other.prefactor)
            and self.poly == other.poly
            and (self.trace or TensorPoly()) == (other.trace or TensorPoly())
        )


# ---------------------------------------------------------------- golden data

@dataclass
class GoldenReference:
    label: str
    kind: str  # "param" or "n4"
    free: tuple
    coeffs: dict  # "Ck" -> ParamScalar | N4Scalar
    terms: list  # (ck, factor, mono text)
    errata: list = field(default_factory=list)

    def _parse_scalar(self, text):
        return N4Scalar.parse(text) if self.kind == "n4" else ParamScalar.parse(text)

    @property
    def scalar_type(self):
        return N4Scalar if self.kind == "n4" else ParamScalar

    def labelled(self) -> dict:
        """Canonical monomial -> (Ck, rational factor); identically vanishing terms are skipped."""
        out = {}
        for ck, fac, text in self.terms:
            atoms, sign = parse_mono(text)
            mono, s2, npow, kpow = canon(atoms)
            if s2 == 0:
                continue
            if npow or kpow:
                raise GoldenFormatError(f"{self.label}: term {text!r} is not a basis monomial")
            if mono in out:
                raise GoldenFormatError(f"{self.label}: monomial {text!r} listed twice")
            out[mono] = (ck, fac * sign * s2)
        return out

    def poly(self) -> TensorPoly:
        out = TensorPoly()
        for mono, (ck, fac) in self.labelled().items():
            f = N4Scalar(rat(fac)) if self.kind == "n4" else ParamScalar.rational(rat(fac))
            out.add_term(mono, self.coeffs[ck] * f)
        return out

    def vanishing_terms(self) -> list:
        """Listed terms that are zero by index symmetry alone."""
        return [(ck, text) for ck, _, text in self.terms if canon(parse_mono(text)[0])[1] == 0]

    def monomials(self) -> list:
        return list(self.labelled())

    def entries(self) -> list:
        return sorted(self.poly().terms.items())


def _golden_text(label: str) -> str:
    try:
        return resources.files("dwsg").joinpath("golden", f"{label}.txt").read_text()
    except FileNotFoundError as exc:
        raise GoldenFormatError(f"no golden reference named {label!r}") from exc


def parse_golden(text: str, label: str = "?") -> GoldenReference:
    lines = text.splitlines()
    if len(lines) < 2 or lines[0] != "format dwsg-golden 1" or not lines[1].startswith("sha256 "):
        raise GoldenFormatError(f"{label}: bad header")
    body = "\n".join(lines[2:]) + "\n"
    if hashlib.sha256(body.encode()).hexdigest() != lines[1].split()[1]:
        raise GoldenFormatError(f"{label}: transcription checksum mismatch")
    head: dict = {}
    coeffs_raw: dict = {}
    terms = []
    errata = []
    for ln in lines[2:]:
        key, _, rest = ln.partition(" ")
        if key == "coeff":
            ck, _, val = rest.partition(" = ")
            coeffs_raw[ck] = val
        elif key == "term":
            ck, fac, mono = rest.split(" ", 2)
            terms.append((ck, Fraction(fac), mono))
        elif key == "erratum":
            errata.append(rest)
        else:
            head[key] = rest
    kind = head.get("kind", "param")
    ref = GoldenReference(
        label=head.get("label", label),
        kind=kind,
        free=tuple(x for x in head.get("free", "").split(",") if x),
        coeffs={},
        terms=terms,
        errata=errata,
    )
    ref.coeffs = {ck: ref._parse_scalar(v) for ck, v in coeffs_raw.items()}
    if int(head.get("ncoeff", -1)) != len(ref.coeffs) or int(head.get("nterms", -1)) != len(terms):
        raise GoldenFormatError(f"{label}: coefficient or term count differs from its header")
    missing = {ck for ck, _, _ in terms} - set(ref.coeffs)
    if missing:
        raise GoldenFormatError(f"{label}: undefined coefficients {sorted(missing)}")
    return ref


@lru_cache(maxsize=None)
def load_golden(label: str) -> GoldenReference:
    return parse_golden(_golden_text(label), label)


GOLDEN_LABELS = ("E2", "trE4", "E4full", "E4full_n4", "trE4_n4")


def _basis(order: int, traced: bool) -> frozenset:
    if order == 2:
        return frozenset() if traced else frozenset(load_golden("E2").monomials())
    if order == 4:
        return frozenset(load_golden("trE4" if traced else "E4full").monomials())
    return frozenset()


# ---------------------------------------------------------------- computeE

def _assemble_chunk(payload) -> list:
    out = []
    for mono, items in payload:
        sectors = assemble([(pat, poly_from_str(cs)) for pat, cs in items])
        out.append((mono, [(q, poly_to_str(a), poly_to_str(b)) for q, (a, b) in sectors.items()]))
    return out


def _locate_failure(jp: JPoly):
    """Re-run term by term so the error names the offending amplitude term."""
    for (mono, p, l, m), c in sorted(jp.items()):
        try:
            integrate_term(mono, p, l, m, c)
        except Exception as exc:
            text = rational_to_str(c) if hasattr(c, "denom") else poly_to_str(c)
            raise TermError(f"{format_mono(mono)} * K^{p} / D({l},{m}) [coeff {text}]", exc) from exc


def _integrate_parallel(jp: JPoly, jobs: int) -> TensorPoly:
    """Momentum integration; the per-monomial assembly is a parallel map.

    Workers exchange polynomials as strings, and the merge is a plain dict
    union over disjoint monomial sets, so the result is independent of
    ``jobs``.
    """
    try:
        groups = group_integrands(jp)
        for pat in sorted({pat for items in groups.values() for pat, _ in items}):
            integral_scalar(*pat)  # warm the cache before forking
    except Exception:
        _locate_failure(jp)
        raise
    monos = sorted(groups)
    out = TensorPoly()
    if jobs == 1 or len(monos) < 2:
        for mono in monos:
            out.add_term(mono, scalar_from_sectors(assemble(groups[mono])))
        return out
    chunks = [monos[i::jobs] for i in range(jobs) if monos[i::jobs]]
    payloads = [[(mono, [(pat, poly_to_str(c)) for pat, c in groups[mono]]) for mono in ch] for ch in chunks]
    with ProcessPoolExecutor(max_workers=len(chunks), mp_context=get_context("fork")) as ex:
        for part in ex.map(_assemble_chunk, payloads):
            for mono, secs in part:
                sectors = {q: (poly_from_str(a), poly_from_str(b)) for q, a, b in secs}
                out.add_term(mono, scalar_from_sectors(sectors))
    return out


def compute_e(cfg: RunConfig) -> EResult:
    op = cfg.operator
    m = cfg.order
    stats: dict = {}
    t0 = time.perf_counter()
    builds0 = colim.BUILD_CALLS
    solver = make_solver(op, m, cfg.cache_dir)
    stats["tables_s"] = time.perf_counter() - t0
    stats["table_builds"] = colim.BUILD_CALLS - builds0

    t = time.perf_counter()
    jets = solver.Y(m, ())
    stats["jets_s"] = time.perf_counter() - t
    stats["amplitude_terms"] = len(jets)

    t = time.perf_counter()
    raw = _integrate_parallel(jets, cfg.jobs)
    stats["integrate_s"] = time.perf_counter() - t
    stats["raw_monomials"] = len(raw)

    if m % 2:
        if raw:
            bad = format_mono(next(iter(sorted(raw.terms))))
            raise RealityError(f"odd order {m} left an imaginary contribution, e.g. {bad}")
        poly = TensorPoly()
    else:
        sign = -1 if m % 4 == 2 else 1
        poly = raw.relabel({ROW: 0, COL: 1}).scale(ParamScalar.rational(sign))

    t = time.perf_counter()
    red = reducer_for(_basis(m, False))
    poly = red.normal_form(poly)
    trace = TensorPoly()
    if poly:
        tred = reducer_for(_basis(m, True))
        trace = tred.normal_form(lorentz_trace(poly))
    stats["identities_s"] = time.perf_counter() - t
    stats["closure_monomials"] = len(red.seen)
    stats["relations"] = len(red.rref)

    if cfg.dimension == "n4":
        poly = poly.map_coeffs(limit_n4)
        trace = trace.map_coeffs(limit_n4)
    stats["total_s"] = time.perf_counter() - t0
    if cfg.instrumentation:
        log.info("computeE %s m=%d: %s", op.kind, m, stats)
    return EResult(op.kind, m, cfg.dimension, poly, trace, PREFACTOR, stats)


def drop_atoms(p: TensorPoly, kinds=(R, W, X)) -> TensorPoly:
    """Flat limit: discard every monomial containing one of ``kinds``."""
    return TensorPoly({mono: c for mono, c in p.terms.items() if not any(a[0] in kinds for a in mono)})


# ---------------------------------------------------------------- compareGolden

@dataclass
class Mismatch:
    monomial: str
    label: str | None
    computed: object
    expected: object
    difference: object


@dataclass
class DiffReport:
    reference: str
    mismatches: list
    closure_used: bool
    relations_used: int = 0

    @property
    def equal(self) -> bool:
        return not self.mismatches

    def labels(self) -> set:
        return {mm.label for mm in self.mismatches}

    def summary(self) -> str:
        how = "identity closure" if self.closure_used else "direct"
        if self.equal:
            return f"{self.reference}: no differences ({how} comparison)"
        lines = [f"{self.reference}: {len(self.mismatches)} differing monomial(s) ({how} comparison)"]
        for mm in self.mismatches:
            lines.append(f"  [{mm.label or '-'}] {mm.monomial}")
            lines.append(f"      computed   {_ser(mm.computed)}")
            lines.append(f"      expected   {_ser(mm.expected)}")
            lines.append(f"      difference {_ser(mm.difference)}")
        return "\n".join(lines)


def _ser(x) -> str:
    return x.serialize() if hasattr(x, "serialize") else str(x)


def _zero_like(ref: GoldenReference):
    return N4Scalar() if ref.kind == "n4" else ParamScalar()


def _coerce(p: TensorPoly, ref: GoldenReference) -> TensorPoly:
    if ref.kind != "n4":
        return p
    return p.map_coeffs(lambda c: c if isinstance(c, N4Scalar) else limit_n4(c))


def compare_golden(result, ref: GoldenReference | str, closure: bool = True) -> DiffReport:
    """Coefficient-wise comparison; falls back to identity-closure matching."""
    if isinstance(ref, str):
        ref = load_golden(ref)
    if isinstance(result, EResult):
        result = result.trace if not ref.free else result.poly
    exp = ref.poly()
    labels = ref.labelled()
    zero = _zero_like(ref)
    got = _coerce(result, ref)
    if set(got.terms) == set(exp.terms) or not closure:
        diff = got - exp
        mism = []
        for mono, d in sorted(diff.terms.items()):
            mism.append(Mismatch(format_mono(mono), labels.get(mono, (None,))[0],
                                 got.terms.get(mono, zero), exp.terms.get(mono, zero), d))
        return DiffReport(ref.label, mism, False)
    # monomial sets differ: reduce the residual modulo the identity relations
    # relations have rational coefficients, so this commutes with the n -> 4 limit
    red = Reducer(_order_key(frozenset(labels)))
    diff = red.normal_form(got - exp)
    nf_got = red.normal_form(got)
    nf_exp = red.normal_form(exp)
    mism = []
    for mono, d in sorted(diff.terms.items()):
        mism.append(Mismatch(format_mono(mono), labels.get(mono, (None,))[0],
                             nf_got.terms.get(mono, zero), nf_exp.terms.get(mono, zero), d))
    log.info("compare %s: identity-closure matching used (%d relations)", ref.label, red.relations_used)
    return DiffReport(ref.label, mism, True, red.relations_used)


# ---------------------------------------------------------------- dependencyRank

def _sample_point(rng: random.Random) -> tuple[Fraction, int]:
    u = Fraction(rng.randint(1, 29), rng.randint(31, 61))
    return 1 - u * u, rng.choice([5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25])


def _eval_at(c, a: Fraction, n: int) -> Fraction:
    if isinstance(c, ParamScalar):
        # with a = 1 - u^2 and odd n, (1-a)^(n/2) = u^n is rational
        total = Fraction(0)
        u = _sqrt_fraction(1 - a)
        for q, r in c.sectors.items():
            v = eval_exact(ParamScalar.rational(r), a, n)
            total += v * u ** (-q * n)
        return total
    return Fraction(c)


def _sqrt_fraction(x: Fraction) -> Fraction:
    from math import isqrt

    p, q = isqrt(x.numerator), isqrt(x.denominator)
    if p * p != x.numerator or q * q != x.denominator:
        raise ValueError("not a rational square")
    return Fraction(p, q)


def _sample_rank(coeffs: list, rng: random.Random) -> int:
    rows = []
    need = 2 * len(coeffs)
    while len(rows) < need:
        a, n = _sample_point(rng)
        try:
            rows.append([_eval_at(c, a, n) for c in coeffs])
        except PoleError:
            continue
    return exact_rank(rows)


def dependency_rank(coeffs: Iterable, seed: int | None = None, max_rounds: int = 10) -> int:
    """Dimension of the Q-linear span, by exact evaluation at random points."""
    coeffs = list(coeffs)
    if not coeffs:
        raise ValueError("dependency_rank needs at least one coefficient")
    rng = random.Random(seed)
    prev = None
    best = 0
    for _ in range(max_rounds):
        r = _sample_rank(coeffs, rng)
        best = max(best, r)
        if r == prev:
            return r
        prev = r
    return best


# ---------------------------------------------------------------- emit

def _scalar_kind(p: TensorPoly) -> str:
    return "n4" if any(isinstance(c, N4Scalar) for c in p.terms.values()) else "param"


def dumps_machine(res: EResult) -> str:
    lines = [
        f"dwsg-result formatVersion={RESULT_FORMAT}",
        f"kind {res.kind}",
        f"order {res.order}",
        f"dimension {res.dimension}",
        f"prefactor {res.prefactor}",
        f"scalars {'n4' if res.dimension == 'n4' else 'param'}",
    ]
    for name, p in (("E", res.poly), ("trace", res.trace)):
        if p is None:
            continue
        lines.append(f"section {name} {len(p)}")
        for mono, c in sorted(p.terms.items()):
            lines.append(f"{c.serialize()} | {format_mono(mono)}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads_machine(text: str) -> EResult:
    lines = text.splitlines()
    if not lines or lines[0] != f"dwsg-result formatVersion={RESULT_FORMAT}":
        raise PipelineError("not a dwsg result file (or unsupported formatVersion)")
    head = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("section") and lines[i] != "end":
        k, _, v = lines[i].partition(" ")
        head[k] = v
        i += 1
    scalar = N4Scalar if head.get("scalars") == "n4" else ParamScalar
    sections: dict = {}
    while i < len(lines) and lines[i] != "end":
        _, name, count = lines[i].split()
        p = TensorPoly()
        for ln in lines[i + 1:i + 1 + int(count)]:
            cs, _, ms = ln.rpartition(" | ")
            atoms, sign = parse_mono(ms)
            mono, s2, _, _ = canon(atoms)
            c = scalar.parse(cs)
            p.add_term(mono, c if sign * s2 == 1 else -c)
        sections[name] = p
        i += 1 + int(count)
    return EResult(head["kind"], int(head["order"]), head["dimension"], sections.get("E", TensorPoly()),
                   sections.get("trace"), head.get("prefactor", PREFACTOR))


def _ratio(x, y):
    """Rational r with x == r*y, or None."""
    if isinstance(x, N4Scalar) or isinstance(y, N4Scalar):
        cand = [(x.rational, y.rational), (x.log, y.log)]
        for xs, ys in cand:
            if ys != 0:
                r = xs / ys
                break
        else:
            return None
        if not (r.numer.is_ground and r.denom.is_ground):
            return None
        fr = Fraction(str(r.numer.LC)) / Fraction(str(r.denom.LC))
        return fr if x == y * N4Scalar(rat(fr)) else None
    xs, ys = x.sectors, y.sectors
    if set(xs) != set(ys):
        return None
    q = next(iter(xs))
    r = xs[q] / ys[q]
    if not (r.numer.is_ground and r.denom.is_ground):
        return None
    fr = Fraction(str(r.numer.LC)) / Fraction(str(r.denom.LC))
    return fr if x == y * ParamScalar.rational(rat(fr)) else None


def coefficient_legend(p: TensorPoly) -> tuple[list, dict]:
    """Group coefficients equal up to a rational factor: ([C values], mono -> (i, factor))."""
    legend: list = []
    where: dict = {}
    for mono, c in sorted(p.terms.items()):
        for i, v in enumerate(legend):
            r = _ratio(c, v)
            if r is not None:
                where[mono] = (i + 1, r)
                break
        else:
            legend.append(c)
            where[mono] = (len(legend), Fraction(1))
    return legend, where


def _latex_mono(text: str) -> str:
    return text.replace(" ", "\\,")


def dumps_latex(res: EResult) -> str:
    out = ["% dwsg result", f"% kind={res.kind} order={res.order} dimension={res.dimension}"]
    for name, p in (("E", res.poly), ("trace", res.trace)):
        if p is None:
            continue
        legend, where = coefficient_legend(p)
        head = f"E_{{{res.order}}}" if name == "E" else f"{{\\rm tr}}_L E_{{{res.order}}}"
        parts = []
        for mono in sorted(p.terms):
            i, f = where[mono]
            fs = "" if f == 1 else ("-" if f == -1 else f"{f}\\,")
            parts.append(f"{fs}C_{{{i}}}\\,{_latex_mono(format_mono(mono))}")
        body = " + ".join(parts).replace("+ -", "- ") if parts else "0"
        out.append("\\begin{equation}")
        out.append(f"{head} = (4\\pi)^{{-n/2}}\\left( {body} \\right)")
        out.append("\\end{equation}")
        out.append("\\begin{eqnarray*}")
        for i, v in enumerate(legend, 1):
            out.append(f"C_{{{i}}} &=& {v.latex()} \\\\")
        out.append("\\end{eqnarray*}")
    return "\n".join(out) + "\n"


def _atomic_write(path: Path, data: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(data)
    os.replace(tmp, path)


def emit(res: EResult, fmt: str, destination) -> Path:
    """Write ``res`` as ``fmt``; a directory destination gets a default file name."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    data = dumps_machine(res) if fmt == "machine" else dumps_latex(res)
    path = Path(destination)
    if path.is_dir():
        ext = "txt" if fmt == "machine" else "tex"
        path = path / f"E{res.order}_{res.kind}_{res.dimension}.{ext}"
    try:
        _atomic_write(path, data)
    except OSError as exc:
        raise PipelineError(f"cannot write {path}: {exc}") from exc
    return path


def run(cfg: RunConfig) -> tuple[EResult, list]:
    res = compute_e(cfg)
    paths = []
    if cfg.output_dir:
        try:
            Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise PipelineError(f"cannot create {cfg.output_dir}: {exc}") from exc
        for fmt in cfg.formats:
            paths.append(emit(res, fmt, Path(cfg.output_dir)))
    return res, paths
