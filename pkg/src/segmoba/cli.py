"""segmoba command line: split, verify, bench, gen."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from contextlib import contextmanager
from typing import Optional, Sequence, TextIO

from . import bench
from .prefix import ParseError, PrefixError, parse_ruleset, write_ruleset
from .segmentation import PlanError, build_cost_matrix, dp_split, format_plan, parse_plan
from .workload import (GenConfig, GenError, TraceConfig, gen_ruleset, gen_trace, gen_update_stream,
                       parse_histogram, read_trace, read_updates, write_trace, write_updates)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2

log = logging.getLogger("segmoba")


class UsageError(Exception):
    pass


@contextmanager
def _open_out(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _load_ruleset(args):
    if not args.ruleset:
        raise UsageError("--ruleset is required")
    with open(args.ruleset, encoding="utf-8") as fh:
        return parse_ruleset(fh, args.width)


def _load_trace(args):
    if not args.trace:
        raise UsageError("--trace is required")
    with open(args.trace, encoding="utf-8") as fh:
        return read_trace(fh, args.width)


def _plan(args):
    return parse_plan(args.plan, args.width) if args.plan else None


def split_report(ruleset, out: TextIO) -> None:
    t0 = time.perf_counter()
    C = build_cost_matrix(ruleset)
    table, plan = dp_split(C)
    elapsed = time.perf_counter() - t0
    w = ruleset.width
    out.write(f"plan\t{format_plan(plan)}\n")
    out.write("lo\thi\thash_cost\ttree_cost\tcost\n")
    for s in plan:
        out.write(f"{s.lo}\t{s.hi}\t{C.hash_part[s.lo][s.hi]}\t{C.tree_part[s.lo][s.hi]}\t{C[s.lo, s.hi]}\n")
    out.write(f"total_cost\t{table.S[0][w]}\n")
    out.write(f"seconds\t{elapsed:.3f}\n")


def cmd_split(args) -> int:
    split_report(_load_ruleset(args), sys.stdout)
    return EXIT_OK


def cmd_verify(args) -> int:
    rs = _load_ruleset(args)
    trace = _load_trace(args)
    engine = bench.build_engine(args.engine, rs, _plan(args))
    res = bench.verify(engine, rs, trace)
    print(f"engine={args.engine} checked={res.checked} mismatches={res.mismatches}")
    if res.first is not None:
        print("first_mismatch=" + bench.describe_mismatch(res.first, rs.width))
    return EXIT_OK if res.ok else EXIT_MISMATCH


def cmd_bench(args) -> int:
    rs = _load_ruleset(args)
    trace = _load_trace(args)
    updates = None
    if args.updates:
        with open(args.updates, encoding="utf-8") as fh:
            updates = list(read_updates(fh, args.width))
    report = bench.run_bench(args.engine, rs, trace, updates=updates, plan=_plan(args),
                             ruleset_id=args.ruleset, threads=args.threads)
    print(report.table() if args.report == "table" else "\n".join(report.kv_lines()))
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.kind == "ruleset":
        base = _load_ruleset(args) if args.ruleset else None
        cfg = GenConfig(width=args.width, rule_count=args.count, length_histogram=parse_histogram(args.hist),
                        seed=args.seed, base_ruleset=base)
        rs = gen_ruleset(cfg)
        with _open_out(args.out) as fh:
            write_ruleset(rs, fh)
    elif args.kind == "trace":
        rs = _load_ruleset(args)
        cfg = TraceConfig(packet_count=args.count, repeat_factor=args.repeat,
                          match_fraction=args.match_fraction, seed=args.seed)
        with _open_out(args.out) as fh:
            write_trace(gen_trace(rs, cfg), rs.width, fh)
    else:
        rs = _load_ruleset(args)
        with _open_out(args.out) as fh:
            write_updates(gen_update_stream(rs, args.count, args.seed), rs.width, fh)
    return EXIT_OK


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=int, default=128, help="address width in bits (default 128)")
    p.add_argument("--ruleset", help="ruleset file: '<address>/<len> <next_hop> [weight]' per line")
    p.add_argument("--seed", type=int, default=0)


def _engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--engine", choices=bench.ENGINES, default="segmoba")
    p.add_argument("--trace", help="one address per line")
    p.add_argument("--plan", help="override the DP plan, e.g. 0-15,16-31,32-128")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segmoba", description="Segmented multilayer balanced-tree LPM toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="compute the cost-optimal prefix-length segments")
    _common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("verify", help="check an engine against the linear-scan oracle")
    _common(p)
    _engine_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="count memory accesses and time lookups/updates")
    _common(p)
    _engine_flags(p)
    p.add_argument("--updates", help="update stream: 'I <prefix> <next_hop>' / 'D <prefix>' lines")
    p.add_argument("--report", choices=("table", "kv"), default="table")
    p.add_argument("--threads", type=int, default=1, help="reader threads over disjoint trace shards")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="generate rulesets, traces and update streams")
    p.add_argument("kind", choices=("ruleset", "trace", "updates"))
    _common(p)
    p.add_argument("--count", type=int, default=1000, help="rules, base packets or updates")
    p.add_argument("--hist", default="64:1.0", help="length fractions, e.g. 64:0.5,96:0.3,128:0.2")
    p.add_argument("--repeat", type=int, default=1, help="copies of each packet in a trace")
    p.add_argument("--match-fraction", type=float, default=1.0)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ParseError, PrefixError, PlanError, GenError, ValueError, OSError) as exc:
        print(f"segmoba {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
