"""polydet command line.

Exit status: 0 on success, 1 for computation or validation failures, 2 for
configuration errors (bad arguments, missing or malformed input files).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .asymptotics import (RankDeficientDesign, SweepRecord, fit_expansion, parse_L_spec,
                          sigma_ratio_experiment, sweep, worker_count)
from .connection import CUT_DIRECTIONS, build_connection, make_punctures, scale_punctures
from .continuum import continuum_zeta_prime_zero, rectangle_heat_trace, rectangle_kac
from .geometry import GeometryError, build_graph, parse_region, summarize_geometry
from .spectral import NotPositiveDefinite, assemble, heat_trace, logdet
from .store import ResultStore, StoreVersionError, resume_sweep, sigma_hash
from .walker import mc_dirichlet_kernel

log = logging.getLogger("polydet")


class ConfigError(Exception):
    """Bad user input; maps to exit status 2."""


# ---------------------------------------------------------------------------
# argument helpers

def _count(text: str) -> int:
    """Sample counts such as '100000' or '1e5'."""
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(val) or val < 1 or val != int(val):
        raise argparse.ArgumentTypeError(f"sample count must be a positive integer: {text!r}")
    return int(val)


def _positive(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not val > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return val


def _half_point(text: str):
    """'2.5,2.5' -> doubled (5, 5)."""
    try:
        parts = [Fraction(p) for p in text.split(",")]
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad point {text!r}") from None
    if len(parts) != 2 or any((2 * p).denominator != 1 for p in parts):
        raise argparse.ArgumentTypeError(f"point must be 'x,y' with half-integer entries: {text!r}")
    return int(2 * parts[0]), int(2 * parts[1])


def _lattice_point(text: str):
    try:
        x, y = (int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"lattice point must be 'x,y' integers: {text!r}") from None
    return x, y


def _load_region(path):
    if not Path(path).exists():
        raise ConfigError(f"domain file not found: {path}")
    try:
        return parse_region(Path(path))
    except GeometryError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _setup(args):
    """Scaled region, graph and connection for commands that take --domain/--scale."""
    base = _load_region(args.domain)
    try:
        sigma = scale_punctures(base, args.sigma, args.scale)
    except GeometryError as exc:
        raise ConfigError(str(exc)) from None
    graph = build_graph(base.scaled(args.scale))
    return base, graph, build_connection(graph, sigma, args.cut_dir)


def _emit_json(doc: dict, out):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _emit_csv(header, rows, out):
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if out:
            fh.close()


# ---------------------------------------------------------------------------
# subcommands

def cmd_graph(args):
    base, graph, conn = _setup(args)
    summ = summarize_geometry(graph.region)
    _emit_json({"format": 1, "domain_hash": base.digest, "scale": args.scale, "n": graph.n,
                "edges": int(len(graph.edges)), "ext_boundary": int(len(graph.ext_boundary)),
                "negative_edges": int((conn.edge_signs < 0).sum()),
                "area": str(summ.area), "perimeter": summ.perimeter,
                "corners": [{"vertex": list(v), "theta": th} for v, th in summ.corners]}, args.out)


def cmd_logdet(args):
    base, graph, conn = _setup(args)
    _emit_json({"format": 1, "domain_hash": base.digest, "sigma_hash": sigma_hash(args.sigma),
                "scale": args.scale, "n": graph.n, "logdet": logdet(assemble(graph, conn))},
               args.out)


def cmd_heat(args):
    _, graph, conn = _setup(args)
    op = assemble(graph, conn)
    rows = []
    for t in args.t:
        p = heat_trace(op, t, probes=args.probes, seed=args.seed)
        rows.append((repr(p.t), repr(p.value), repr(p.stderr), p.method))
    _emit_csv(("t", "trace", "stderr", "method"), rows, args.out)


def cmd_mc_kernel(args):
    _, graph, conn = _setup(args)
    if graph.vertex_id(args.x) < 0:
        raise ConfigError(f"{args.x} is not a site of the domain at scale {args.scale}")
    rows = []
    for k, t in enumerate(args.t):
        est = mc_dirichlet_kernel(graph, conn, args.x, t, args.samples, seed=args.seed + k)
        rows.append((repr(t), repr(est.mean), repr(est.stderr), est.samples))
    _emit_csv(("t", "mean", "se", "samples"), rows, args.out)


def cmd_continuum(args):
    a, b = args.rect
    if args.what == "zeta":
        k = rectangle_kac(a, b)
        z, err = continuum_zeta_prime_zero(a, b)
        _emit_json({"format": 1, "a": a, "b": b, "a0": k.a0, "a1": k.a1, "a2": k.a2,
                    "zeta_prime_0": z, "err_bound": err}, args.out)
    else:
        if not args.t:
            raise ConfigError("continuum heat needs --t")
        _emit_csv(("t", "trace"), [(repr(t), repr(rectangle_heat_trace(a, b, t))) for t in args.t],
                  args.out)


def _sweep_records(args, region, sigma):
    store = ResultStore(args.out) if getattr(args, "out", None) else None
    Ls = args.L
    if store is None:
        return sweep(region, sigma, Ls, workers=args.workers)
    return resume_sweep(store, region, sigma, Ls, force=args.force, workers=args.workers)


def cmd_sweep(args):
    region = _load_region(args.domain)
    try:
        make_punctures(region, args.sigma)
    except GeometryError as exc:
        raise ConfigError(str(exc)) from None
    recs = _sweep_records(args, region, args.sigma)
    for r in recs:
        print(f"L={r.L} n={r.n_sites} logdet={r.logdet!r}")


def _read_records(path, domain_hash=None, s_hash=None) -> list[SweepRecord]:
    if not Path(path).exists():
        raise ConfigError(f"records file not found: {path}")
    try:
        stored = ResultStore(path).select(domain_hash, s_hash)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    keys = {(s.domain_hash, s.sigma_hash) for s in stored}
    if len(keys) > 1:
        raise ConfigError("records file holds several (domain, sigma) keys; pass --domain/--sigma")
    return [s.record for s in stored]


def cmd_fit(args):
    region = _load_region(args.domain) if args.domain else None
    # with a domain given, an empty --sigma means the untwisted records
    s_hash = sigma_hash(args.sigma) if (args.sigma or args.domain) else None
    recs = _read_records(args.records, region.digest if region else None, s_hash)
    if not recs:
        raise ConfigError("no matching records")
    report = fit_expansion(recs, pin_alpha0=args.pin_alpha0, boundary_model=args.boundary,
                           region=region)
    _emit_json(report.to_dict(), args.out)


def cmd_ratio(args):
    region = _load_region(args.domain)
    try:
        make_punctures(region, args.sigma)
    except GeometryError as exc:
        raise ConfigError(str(exc)) from None
    if args.records:
        store = ResultStore(args.records)
        recs1 = resume_sweep(store, region, args.sigma, args.L, force=args.force, workers=args.workers)
        recs2 = resume_sweep(store, region, [], args.L, force=args.force, workers=args.workers)
    else:
        recs1 = recs2 = None
    tab = sigma_ratio_experiment(region, args.sigma, [], args.L, records1=recs1, records2=recs2,
                                 boundary_model=args.boundary)
    _emit_json(tab.to_dict(), args.out)


def cmd_validate(args):
    from .validation import run_suite
    results = run_suite(args.suite)
    if args.out:
        _emit_json({"format": 1, "suite": args.suite,
                    "results": [{"number": r.number, "name": r.name, "passed": r.passed,
                                 "detail": r.detail} for r in results]}, args.out)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polydet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"polydet {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def domain_args(sp, scale=True):
        sp.add_argument("--domain", required=True, help="JSON file with 'loops'")
        if scale:
            sp.add_argument("--scale", type=int, default=1)
        sp.add_argument("--sigma", type=_half_point, action="append", default=[],
                        help="puncture 'x,y' (half-integers, base scale); repeatable")
        sp.add_argument("--cut-dir", choices=CUT_DIRECTIONS, default="+x")
        sp.add_argument("--out")

    sp = sub.add_parser("graph", help="lattice graph summary")
    domain_args(sp)
    sp.set_defaults(func=cmd_graph)

    sp = sub.add_parser("logdet", help="log det of the twisted Dirichlet operator")
    domain_args(sp)
    sp.set_defaults(func=cmd_logdet)

    sp = sub.add_parser("heat", help="heat trace (dense or stochastic Lanczos)")
    domain_args(sp)
    sp.add_argument("--t", type=_positive, nargs="+", required=True)
    sp.add_argument("--probes", type=_count, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_heat)

    sp = sub.add_parser("mc-kernel", help="Monte Carlo diagonal heat kernel")
    domain_args(sp)
    sp.add_argument("--x", type=_lattice_point, required=True, help="site 'x,y' at the given scale")
    sp.add_argument("--t", type=_positive, nargs="+", required=True)
    sp.add_argument("--samples", type=_count, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_mc_kernel)

    sp = sub.add_parser("continuum", help="rectangle oracles")
    sp.add_argument("what", choices=("zeta", "heat"))
    sp.add_argument("--rect", type=_positive, nargs=2, required=True, metavar=("A", "B"))
    sp.add_argument("--t", type=_positive, nargs="+")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_continuum)

    def sweep_args(sp):
        sp.add_argument("--L", type=_L_spec, required=True, help="'8:256:geom', '8:64:lin:8' or '8,16'")
        sp.add_argument("--force", action="store_true")
        sp.add_argument("--workers", type=int, default=None,
                        help="process pool size (default POLYDET_THREADS or 1)")

    sp = sub.add_parser("sweep", help="log det across scales, stored as CSV")
    domain_args(sp, scale=False)
    sweep_args(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("fit", help="fit the large-L expansion to stored records")
    sp.add_argument("--records", required=True)
    sp.add_argument("--domain")
    sp.add_argument("--sigma", type=_half_point, action="append", default=[])
    sp.add_argument("--pin-alpha0", action="store_true")
    sp.add_argument("--boundary", choices=("edge", "shape"), default="edge")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("ratio", help="twisted minus untwisted log det across scales")
    domain_args(sp, scale=False)
    sweep_args(sp)
    sp.add_argument("--records", help="CSV store to reuse and extend")
    sp.add_argument("--boundary", choices=("edge", "shape"), default="edge")
    sp.set_defaults(func=cmd_ratio)

    sp = sub.add_parser("validate", help="run acceptance suites")
    sp.add_argument("--suite", choices=("quick", "full"), default="quick")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_validate)
    return p


def _L_spec(text):
    try:
        return parse_L_spec(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", None) is None and hasattr(args, "workers"):
        args.workers = worker_count()
    try:
        status = args.func(args)
    except (ConfigError, StoreVersionError, OSError) as exc:
        print(f"polydet: error: {exc}", file=sys.stderr)
        return 2
    except (NotPositiveDefinite, RankDeficientDesign, ArithmeticError, ValueError) as exc:
        print(f"polydet: computation failed: {exc}", file=sys.stderr)
        return 1
    return int(status or 0)


if __name__ == "__main__":
    sys.exit(main())
