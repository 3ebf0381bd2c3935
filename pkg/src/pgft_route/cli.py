"""``pgft-route`` command line.

Exit codes: 0 success, 1 validation or verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import analysis
from .dmodc import RoutingError, build_routing_tables, compute_costs_and_dividers, dump_tables, parse_tables, route
from .dmodk import NotCompletePgft, build_dmodk_tables
from .fabric import prepare
from .topology import (
    FaultInjectionError,
    FaultSpec,
    PgftSpec,
    TopologyError,
    build_pgft,
    inject_faults,
    read_topology,
    write_topology,
)
from .verification import sweep

log = logging.getLogger("pgft_route")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    threads: int = 1
    seed: int = 0
    log_level: str = "WARNING"

    def __post_init__(self):
        if self.threads < 1:
            raise UsageError("--threads must be >= 1")


def run_bench(t, threads=(1,), repetitions: int = 3, *, mode: str = "updown") -> list[dict]:
    """Median wall time of preprocessing and table building per thread count.

    The reported phases come from the repetition with the median total, so
    ``total`` is exactly the sum of the two phases.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    f = prepare(t)
    rows = []
    for n in threads:
        runs = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            pre = compute_costs_and_dividers(f, threads=n)
            t1 = time.perf_counter()
            build_routing_tables(f, pre, mode=mode, threads=n)
            t2 = time.perf_counter()
            runs.append((t1 - t0, t2 - t1))
        totals = [a + b for a, b in runs]
        med = statistics.median_low(totals)
        pre_s, routes_s = runs[totals.index(med)]
        for phase, secs in (("costs_dividers", pre_s), ("routes", routes_s), ("total", pre_s + routes_s)):
            rows.append({
                "nodes": f.n_nodes,
                "switches": f.n_switches,
                "threads": n,
                "phase": phase,
                "seconds": secs,
            })
    return rows


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _input(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _amount(text: str):
    return float(text) if any(ch in text for ch in ".eE") else int(text)


def _default_threads() -> int:
    try:
        return int(os.environ.get("PGFT_ROUTE_THREADS", "1"))
    except ValueError:
        return 1


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pgft-route", description="PGFT generation, Dmodc routing and analysis")
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", help="write a complete PGFT topology")
    g.add_argument("--pgft", required=True, help='e.g. "3;2.2.3;1.2.2;1.2.1"')
    g.add_argument("-o", "--output")

    d = sub.add_parser("degrade", help="inject seeded faults")
    d.add_argument("-i", "--input", required=True)
    d.add_argument("--remove-links", type=_amount, default=0)
    d.add_argument("--remove-switches", type=_amount, default=0)
    d.add_argument("--switch-rank", type=int, default=None, help="only remove switches of this rank (-1 = top)")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--preserve-connectivity", action="store_true")
    d.add_argument("-o", "--output")
    d.add_argument("--log", dest="removal_log")

    threads_kw = dict(type=int, default=_default_threads())
    r = sub.add_parser("route", help="compute forwarding tables")
    r.add_argument("-i", "--input", required=True)
    r.add_argument("-o", "--output")
    r.add_argument("--threads", **threads_kw)
    r.add_argument("--mode", choices=["plain", "updown"], default="updown")
    r.add_argument("--engine", choices=["dmodc", "dmodk"], default="dmodc")

    v = sub.add_parser("verify", help="check validity and up*down* shape of tables")
    v.add_argument("-i", "--input", required=True)
    v.add_argument("-t", "--tables", required=True)
    v.add_argument("--report")

    a = sub.add_parser("analyze", help="static link loads of a pattern")
    a.add_argument("-i", "--input", required=True)
    a.add_argument("-t", "--tables", required=True)
    a.add_argument("--pattern", default="all2all", help="all2all | shift:K | perm:SEED")
    a.add_argument("-o", "--output")

    c = sub.add_parser("compare", help="engine comparison table")
    c.add_argument("-i", "--input", required=True)
    c.add_argument("--pattern", action="append", help="repeatable; default all2all and shift:1")
    c.add_argument("--engines", default="dmodc,dmodk")
    c.add_argument("-o", "--output")

    b = sub.add_parser("bench", help="time preprocessing and table building")
    b.add_argument("-i", "--input")
    b.add_argument("--pgft", help="generate in memory instead of reading a file")
    b.add_argument("--threads", default=None, help="comma-separated list, e.g. 1,2,4")
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("-o", "--output")
    return ap


def _cmd_generate(args) -> int:
    t = build_pgft(PgftSpec.parse(args.pgft))
    if args.output:
        write_topology(t, args.output)
    else:
        from .topology import serialize_topology
        sys.stdout.write(serialize_topology(t))
    return 0


def _cmd_degrade(args) -> int:
    t = read_topology(_input(args.input))
    spec = FaultSpec(args.remove_links, args.remove_switches, args.seed, args.preserve_connectivity,
                     switch_rank=args.switch_rank)
    try:
        out, removed = inject_faults(t, spec)
    except FaultInjectionError as exc:
        print(f"pgft-route: {exc}", file=sys.stderr)
        return 1
    if args.output:
        write_topology(out, args.output)
    else:
        from .topology import serialize_topology
        sys.stdout.write(serialize_topology(out))
    if args.removal_log:
        Path(args.removal_log).write_text("".join(f"{line}\n" for line in removed), encoding="utf-8")
    return 0


def _cmd_route(args) -> int:
    RunConfig("route", threads=args.threads)
    f = prepare(read_topology(_input(args.input)))
    if args.engine == "dmodk":
        try:
            tables = build_dmodk_tables(f)
        except NotCompletePgft as exc:
            print(f"pgft-route: {exc}", file=sys.stderr)
            return 1
    else:
        tables = route(f, mode=args.mode, threads=args.threads)
    _write(args.output, dump_tables(tables))
    return 0


def _load_tables(args):
    f = prepare(read_topology(_input(args.input)))
    tables = parse_tables(_input(args.tables).read_text(encoding="utf-8"), f)
    return f, tables


def _cmd_verify(args) -> int:
    f, tables = _load_tables(args)
    report = sweep(tables, compute_costs_and_dividers(f))
    text = json.dumps(report.to_json(), indent=2) + "\n"
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if not report.valid:
        print(f"pgft-route: verification failed ({len(report.holes)} hole(s), "
              f"{len(report.violations)} violation(s))", file=sys.stderr)
    return 0 if report.valid else 1


def _cmd_analyze(args) -> int:
    f, tables = _load_tables(args)
    try:
        pattern = analysis.parse_pattern(args.pattern, f.n_nodes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        report = analysis.link_loads(tables, pattern)
    except analysis.AnalysisError as exc:
        print(f"pgft-route: {exc}", file=sys.stderr)
        return 1
    _write(args.output, report.to_csv())
    print(f"max_load={report.max_load} mean_load={float(report.mean_load):.4f} "
          f"floor={report.theoretical_floor}", file=sys.stderr)
    return 0


def _cmd_compare(args) -> int:
    f = prepare(read_topology(_input(args.input)))
    try:
        patterns = [analysis.parse_pattern(p, f.n_nodes) for p in (args.pattern or ["all2all", "shift:1"])]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    engines = tuple(e.strip() for e in args.engines.split(",") if e.strip())
    _write(args.output, analysis.rows_to_csv(analysis.compare_engines(f, patterns, engines)))
    return 0


def _cmd_bench(args) -> int:
    if bool(args.input) == bool(args.pgft):
        raise UsageError("bench needs exactly one of -i/--input or --pgft")
    t = read_topology(_input(args.input)) if args.input else build_pgft(PgftSpec.parse(args.pgft))
    try:
        threads = [int(x) for x in args.threads.split(",")] if args.threads else [_default_threads()]
    except ValueError:
        raise UsageError(f"bad thread list {args.threads!r}") from None
    for n in threads:
        RunConfig("bench", threads=n)
    try:
        rows = run_bench(t, threads, args.reps)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = io.StringIO()
    w = csv.DictWriter(out, ["nodes", "switches", "threads", "phase", "seconds"], lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({**row, "seconds": f"{row['seconds']:.6f}"})
    _write(args.output, out.getvalue())
    return 0


COMMANDS = {
    "generate": _cmd_generate,
    "degrade": _cmd_degrade,
    "route": _cmd_route,
    "verify": _cmd_verify,
    "analyze": _cmd_analyze,
    "compare": _cmd_compare,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except UsageError as exc:
        print(f"pgft-route: {exc}", file=sys.stderr)
        return 2
    except (TopologyError, RoutingError) as exc:
        print(f"pgft-route: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"pgft-route: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
