"""Command line entry point: ``dwsg compute|verify|colim|rank``.

Settings come from defaults, then a TOML file (``--config``), then the
``DWSG_CACHE_DIR`` environment variable, then explicit flags.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

EXIT_OK, EXIT_DIFF, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
CACHE_ENV = "DWSG_CACHE_DIR"

# verify target -> (order, dimension)
REFS = {
    "E2": (2, "symbolic"),
    "trE4": (4, "symbolic"),
    "E4full": (4, "symbolic"),
    "E4full_n4": (4, "n4"),
    "trE4_n4": (4, "n4"),
}

_KEYS = {"kind", "order", "dimension", "cache_dir", "output_dir", "formats", "jobs", "order_cap", "with_x",
         "instrumentation"}


class UsageError(Exception):
    pass


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"invalid TOML in {path}: {exc}") from exc
    data = data.get("run", data)
    unknown = set(data) - _KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def _settings(args) -> dict:
    s: dict = {"kind": "nonminimal", "order": 2, "dimension": "symbolic", "cache_dir": None, "output_dir": None,
               "formats": ["machine"], "jobs": 1, "order_cap": 4, "with_x": True, "instrumentation": False}
    if getattr(args, "config", None):
        s.update(load_config(args.config))
    if os.environ.get(CACHE_ENV):
        s["cache_dir"] = os.environ[CACHE_ENV]
    for k in _KEYS:
        v = getattr(args, k, None)
        if v is not None:
            s[k] = v
    return s


def _run_config(s: dict):
    from .pipeline import RunConfig
    from .symbolcalc import OperatorSpec

    try:
        op = OperatorSpec(s["kind"], with_x=bool(s["with_x"]))
        return RunConfig(operator=op, order=int(s["order"]), dimension=s["dimension"], cache_dir=s["cache_dir"],
                         output_dir=s["output_dir"], formats=tuple(s["formats"]), jobs=int(s["jobs"]),
                         order_cap=int(s["order_cap"]), instrumentation=bool(s["instrumentation"]))
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_compute(args) -> int:
    from .pipeline import dumps_machine, run

    cfg = _run_config(_settings(args))
    res, paths = run(cfg)
    for p in paths:
        print(f"wrote {p}")
    if not paths:
        sys.stdout.write(dumps_machine(res))
    if cfg.instrumentation:
        for k, v in sorted(res.stats.items()):
            print(f"# {k} = {v}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .pipeline import compare_golden, compute_e, load_golden

    s = _settings(args)
    order, dim = REFS[args.ref]
    s.update(kind="nonminimal", order=order, dimension=dim)
    res = compute_e(_run_config(s))
    report = compare_golden(res, load_golden(args.ref))
    print(report.summary())
    return EXIT_OK if report.equal else EXIT_DIFF


def cmd_colim(args) -> int:
    from .colim import load_or_build

    s = _settings(args)
    if s["cache_dir"] is None:
        raise UsageError("colim needs --cache-dir (or DWSG_CACHE_DIR)")
    order = args.order if args.order is not None else s["order"]
    for fn, k in (("l", order + 1), ("I", order)):
        t = load_or_build(fn, k, s["cache_dir"])
        print(f"{fn}: orders 0..{t.max_order} in {s['cache_dir']}")
    return EXIT_OK


def cmd_rank(args) -> int:
    from .pipeline import dependency_rank, load_golden

    ref = load_golden(args.ref)
    coeffs = [ref.coeffs[k] for k in sorted(ref.coeffs, key=lambda c: int(c[1:]))]
    if ref.kind != "param":
        raise UsageError("rank needs a reference with symbolic-n coefficients")
    r = dependency_rank(coeffs, seed=args.seed)
    print(f"{args.ref}: {len(coeffs)} coefficients, rank {r}, {len(coeffs) - r} linear dependencies")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dwsg", description="Heat-kernel coefficients of -g Box + a D D + X.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, compute=True):
        sp.add_argument("--config", help="TOML file with run settings")
        sp.add_argument("--cache-dir", dest="cache_dir")
        if compute:
            sp.add_argument("--jobs", "-j", type=int)
            sp.add_argument("--stats", dest="instrumentation", action="store_const", const=True)

    c = sub.add_parser("compute", help="compute E_m")
    common(c)
    c.add_argument("--kind", choices=["minimal", "nonminimal"])
    c.add_argument("--order", "-m", type=int)
    c.add_argument("--dimension", choices=["symbolic", "n4"])
    c.add_argument("--output-dir", dest="output_dir")
    c.add_argument("--format", dest="formats", action="append", choices=["latex", "machine"])
    c.add_argument("--no-x", dest="with_x", action="store_const", const=False, help="drop the X term")
    c.set_defaults(func=cmd_compute)

    v = sub.add_parser("verify", help="compute and compare against a stored reference")
    common(v)
    v.add_argument("--ref", required=True, choices=sorted(REFS))
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("colim", help="prebuild coincidence-limit tables")
    common(t, compute=False)
    t.add_argument("--order", "-m", type=int)
    t.set_defaults(func=cmd_colim)

    r = sub.add_parser("rank", help="linear dependency rank of a reference coefficient list")
    r.add_argument("--ref", default="E4full", choices=["E2", "trE4", "E4full"])
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_rank)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dwsg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        logging.getLogger("dwsg").debug("internal error", exc_info=True)
        print(f"dwsg: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
