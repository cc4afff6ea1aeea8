"""Command-line entry point: ``run``, ``report`` and ``inspect``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

from .config import TRACE_LEVELS, ConfigError, parse_config
from .engine import run_tournament
from .report import ReportError, competitor_labels, report_from_dir
from .traces import (TraceError, TraceWriter, clear_partial, mark_partial, read_simulation,
                     sim_filename, trace_files, write_manifest)

log = logging.getLogger("pricing_challenge")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def trace_dir_of(path) -> Path:
    """Accept either a run directory (with ``traces/``) or the trace directory itself."""
    path = Path(path)
    return path / "traces" if (path / "traces").is_dir() else path


def _print_scores(bundle, out=sys.stdout) -> None:
    table = bundle["scores"]
    print(f"{'rank':>4}  {'strategy':<14}{'x_bar':>8}{'y_bar':>8}{'final':>8}", file=out)
    for rank, label, xb, yb, fin, *_ in sorted(table.rows):
        print(f"{rank:>4}  {label:<14}{xb:8.4f}{yb:8.4f}{fin:8.4f}", file=out)


def cmd_run(args) -> int:
    cfg = parse_config(args.config, seed=args.seed, sims=args.sims, periods=args.periods,
                       roster=args.roster, out=args.out, parallel=args.parallel,
                       trace_level=args.trace_level)
    out = Path(cfg.out)
    traces = out / "traces"
    try:
        traces.mkdir(parents=True, exist_ok=True)
        mark_partial(out, "run in progress or interrupted")
        for stale in trace_files(traces):
            stale.unlink()
    except OSError as exc:
        print(f"error: cannot prepare output directory {out}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    start = time.perf_counter()
    log.info("running %d simulations x %d periods, roster %s", cfg.sims, cfg.periods,
             ",".join(cfg.roster))
    try:
        result = run_tournament(cfg.specs(), cfg.sims, cfg.engine_config(),
                                sink=TraceWriter(str(traces), cfg.trace_level, cfg.seed),
                                parallel=cfg.parallel)
        write_manifest(out, cfg.result_fields(), cfg.config_hash(), range(cfg.sims))
        bundle = report_from_dir(traces, out / "report", args.first_k)
    except OSError as exc:
        mark_partial(out, f"I/O failure: {exc}")
        print(f"error: I/O failure, output in {out} is partial: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    clear_partial(out)
    elapsed = time.perf_counter() - start
    _print_scores(bundle)
    print(f"{cfg.sims} simulations in {elapsed:.1f}s; {result.failures} strategy failures; "
          f"traces and report in {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    src = trace_dir_of(args.dir)
    dest = Path(args.out) if args.out else Path(args.dir) / "report"
    try:
        bundle = report_from_dir(src, dest, args.first_k)
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"error: cannot write report to {dest}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    _print_scores(bundle)
    note = f" ({len(bundle.skipped)} incomplete trace(s) excluded)" if bundle.skipped else ""
    print(f"report over {len(bundle.sims)} simulations written to {dest}{note}")
    return EXIT_OK


def _find_competition(rec, kind: str, pair):
    if kind == "oligopoly":
        return rec.oligopoly
    for c in rec.duopolies:
        if pair is None or sorted(c.members) == sorted(pair):
            return c
    raise TraceError(f"simulation {rec.sim} has no duopoly {pair}")


def cmd_inspect(args) -> int:
    path = trace_dir_of(args.dir) / sim_filename(args.sim)
    pair = None
    if args.pair:
        try:
            pair = tuple(int(v) for v in args.pair.split(","))
        except ValueError:
            pair = ()
        if len(pair) != 2:
            print(f"error: --pair takes two roster slots like 0,3, got {args.pair!r}",
                  file=sys.stderr)
            return EXIT_USAGE
    try:
        rec = read_simulation(path)
        comp = _find_competition(rec, args.kind, pair)
        if comp.periods:
            series = comp.series()
        else:
            series = comp.sampled_series()
            print(f"note: revenue-level trace; periods sampled with stride "
                  f"{comp.summary['price_sample_stride']}", file=sys.stderr)
    except FileNotFoundError:
        print(f"error: no trace for simulation {args.sim} ({path})", file=sys.stderr)
        return EXIT_FAILURE
    except TraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    labels = competitor_labels(rec.roster)
    names = [labels[s] for s in comp.members]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["period"] + [f"price_{n}" for n in names] + [f"revenue_{n}" for n in names])
    for i, t in enumerate(series["t"]):
        w.writerow([int(t)] + series["prices"][i].tolist() + series["revenue"][i].tolist())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pricing-challenge",
                                     description="Dynamic pricing tournament simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a tournament, write traces and the report")
    run.add_argument("--config", help="JSON run configuration")
    run.add_argument("--sims", help="number of simulations (default 5000)")
    run.add_argument("--periods", help="periods per competition (default 1000)")
    run.add_argument("--seed", help="master seed (default 0)")
    run.add_argument("--roster", help="comma-separated strategy identifiers")
    run.add_argument("--out", help="output directory (default results)")
    run.add_argument("--parallel", help="worker processes (default 1)")
    run.add_argument("--trace-level", choices=TRACE_LEVELS, help="full or revenue (default)")
    run.add_argument("--first-k", type=int, help="limit per-simulation shares to the first K")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="rebuild report tables from traces")
    rep.add_argument("dir", help="run directory or trace directory")
    rep.add_argument("--out", help="report directory (default DIR/report)")
    rep.add_argument("--first-k", type=int, help="limit per-simulation shares to the first K")
    rep.set_defaults(func=cmd_report)

    ins = sub.add_parser("inspect", help="print one competition's price and revenue series")
    ins.add_argument("dir", help="run directory or trace directory")
    ins.add_argument("--sim", type=int, required=True)
    ins.add_argument("--kind", choices=("oligopoly", "duopoly"), default="oligopoly")
    ins.add_argument("--pair", help="roster slots of the duopoly, e.g. 0,3")
    ins.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
