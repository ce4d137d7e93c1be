"""Command line entry point: ``cpiscma simulate | analyze | lut``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from .analysis import abler_bound
from .index_map import build_lut, format_lut
from .sim import ConfigError, SimConfig, build_system, emit_report, load_config, load_report, run_sweep


def parse_snr_range(text: str) -> list[float]:
    """``A:B:STEP`` inclusive of B (within half a step)."""
    try:
        a, b, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B:STEP, got {text!r}") from None
    if step <= 0:
        raise argparse.ArgumentTypeError("STEP must be positive")
    count = int(np.floor((b - a) / step + 0.5)) + 1
    return [round(a + i * step, 10) for i in range(count)]


def _config(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    snr = getattr(args, "snr", None) or getattr(args, "snr_list", None)
    if snr:
        overrides["snr_db"] = tuple(snr)
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def cmd_simulate(args) -> int:
    cfg = _config(args)
    report = run_sweep(cfg, workers=args.workers)
    if args.out:
        emit_report(report, args.out, timing=not args.no_timing)
    print(f"{'snr_db':>7} {'frames':>9} {'ber':>11} {'bler':>11} {'extra':>8}")
    for p in report.points:
        print(f"{p.snr_db:7.2f} {p.frames:9d} {p.ber:11.4e} {p.bler:11.4e} {p.extra_complexity:8.4f}")
    return 0


def cmd_bound(args) -> int:
    cfg = _config(args)
    system = build_system(cfg)
    rng = np.random.default_rng(cfg.seed)
    print("snr_db,n0,bound,stderr" + (",bound_product_form" if args.paper_literal_upep else ""))
    for snr in cfg.snr_db:
        N0 = system.noise_var(snr)
        res = abler_bound(system.cb, system.lut, N0, args.user, ("monte-carlo", args.samples), cfg.scale, rng)
        line = f"{snr!r},{N0!r},{res.value!r},{res.stderr!r}"
        if args.paper_literal_upep:
            lit = abler_bound(
                system.cb, system.lut, N0, args.user, ("monte-carlo", args.samples), cfg.scale, rng, literal=True
            )
            line += f",{lit.value!r}"
        print(line)
    return 0


def cmd_patterns(args) -> int:
    report = load_report(args.report)
    ncases = len(report.points[0].delta) if report.points else 0
    print("snr_db," + ",".join(f"delta_case{g}" for g in range(ncases)) + ",reliable_ratio,extra_complexity")
    for p in report.points:
        cells = [repr(p.snr_db)] + [f"{d:.6g}" for d in p.delta] + [f"{p.reliable_ratio:.6g}", f"{p.extra_complexity:.6g}"]
        print(",".join(cells))
    return 0


def cmd_lut(args) -> int:
    print(format_lut(build_lut(args.n, args.t)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpiscma", description="CPI-SCMA link-level simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a seeded Eb/N0 sweep")
    sim.add_argument("--config", help="JSON config file (defaults: J=6, K=4, M=4, n=4, t=2)")
    sim.add_argument("--seed", type=int)
    grid = sim.add_mutually_exclusive_group()
    grid.add_argument("--snr", type=parse_snr_range, metavar="A:B:STEP")
    grid.add_argument("--snr-list", type=float, nargs="+", metavar="DB")
    sim.add_argument("--out", help="CSV report path (a .json sidecar is written next to it)")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--no-timing", action="store_true", help="write 0 in the seconds column")
    sim.set_defaults(func=cmd_simulate)

    analyze = sub.add_parser("analyze", help="bounds and pattern statistics")
    asub = analyze.add_subparsers(dest="what", required=True)
    bound = asub.add_parser("bound", help="Monte Carlo union bound on a user's block error rate")
    bound.add_argument("--config")
    bound.add_argument("--seed", type=int)
    bgrid = bound.add_mutually_exclusive_group()
    bgrid.add_argument("--snr", type=parse_snr_range, metavar="A:B:STEP")
    bgrid.add_argument("--snr-list", type=float, nargs="+", metavar="DB")
    bound.add_argument("--samples", type=int, default=100_000)
    bound.add_argument("--user", type=int, default=0, help="0-based user index")
    bound.add_argument("--paper-literal-upep", action="store_true", help="also evaluate the closed-form product (diverges; for comparison)")
    bound.set_defaults(func=cmd_bound)
    pat = asub.add_parser("patterns", help="error-pattern ratios from a report")
    pat.add_argument("--report", required=True)
    pat.set_defaults(func=cmd_patterns)

    lut = sub.add_parser("lut", help="look-up tables")
    lsub = lut.add_subparsers(dest="what", required=True)
    show = lsub.add_parser("show", help="print the LUT (1-based slots)")
    show.add_argument("--n", type=int, required=True)
    show.add_argument("--t", type=int, required=True)
    show.set_defaults(func=cmd_lut)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
