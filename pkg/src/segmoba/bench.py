"""Benchmark and verification harness shared by the CLI and the tests."""
from __future__ import annotations

import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .baselines import LinearTable, Treap, linear_lookup
from .engine import SegMobaTree
from .mobatree import AccessCounter, MobaTree
from .prefix import Rule, RuleSet, format_address, format_prefix
from .segmentation import Segment, format_plan
from .workload import Update, apply_updates

ENGINES = ("segmoba", "moba", "treap", "linear")
# treaps are built in a seeded shuffled order; sorted input would degenerate
# them into a chain
TREAP_BUILD_SEED = 0x5EED


def build_engine(name: str, ruleset: RuleSet, plan: Optional[Sequence[Segment]] = None):
    if name == "segmoba":
        return SegMobaTree.build(ruleset, plan)
    if name == "moba":
        return MobaTree(ruleset.width, ruleset)
    if name == "treap":
        rules = list(ruleset)
        random.Random(TREAP_BUILD_SEED).shuffle(rules)
        return Treap(ruleset.width, rules)
    if name == "linear":
        return LinearTable(ruleset.width, ruleset)
    raise ValueError(f"unknown engine {name!r}; choose from {', '.join(ENGINES)}")


@dataclass
class LookupStats:
    lookups: int = 0
    total_accesses: int = 0
    node_visits: int = 0
    bucket_probes: int = 0
    worst_accesses: int = 0
    seconds: float = 0.0

    @property
    def avg_accesses(self) -> Fraction:
        return Fraction(self.total_accesses, self.lookups) if self.lookups else Fraction(0)

    def merge(self, other: "LookupStats") -> None:
        self.lookups += other.lookups
        self.total_accesses += other.total_accesses
        self.node_visits += other.node_visits
        self.bucket_probes += other.bucket_probes
        self.worst_accesses = max(self.worst_accesses, other.worst_accesses)


def count_lookups(engine, trace: Sequence[int]) -> LookupStats:
    """Per-lookup access counting; one fresh counter per address."""
    stats = LookupStats()
    c = AccessCounter()
    lookup = engine.lookup
    worst = 0
    for ip in trace:
        c.node_visits = c.bucket_probes = 0
        lookup(ip, c)
        t = c.node_visits + c.bucket_probes
        stats.node_visits += c.node_visits
        stats.bucket_probes += c.bucket_probes
        if t > worst:
            worst = t
    stats.lookups = len(trace)
    stats.total_accesses = stats.node_visits + stats.bucket_probes
    stats.worst_accesses = worst
    return stats


def time_lookups(engine, trace: Sequence[int], threads: int = 1) -> float:
    """Wall-clock seconds for an uninstrumented pass over ``trace``."""
    lookup = engine.lookup
    if threads <= 1:
        t0 = time.perf_counter()
        for ip in trace:
            lookup(ip)
        return time.perf_counter() - t0
    shards = [trace[i::threads] for i in range(threads)]

    def run(shard):
        for ip in shard:
            lookup(ip)

    t0 = time.perf_counter()
    with ThreadPoolExecutor(threads) as pool:
        list(pool.map(run, shards))
    return time.perf_counter() - t0


def count_lookups_threaded(engine, trace: Sequence[int], threads: int) -> LookupStats:
    """Readers only: shards of the trace counted in parallel, totals summed."""
    if threads <= 1:
        return count_lookups(engine, trace)
    shards = [trace[i::threads] for i in range(threads)]
    total = LookupStats()
    with ThreadPoolExecutor(threads) as pool:
        for part in pool.map(lambda s: count_lookups(engine, s), shards):
            total.merge(part)
    return total


@dataclass
class Mismatch:
    address: int
    expected: Optional[Rule]
    got: Optional[Rule]


@dataclass
class VerifyResult:
    checked: int = 0
    mismatches: int = 0
    first: Optional[Mismatch] = None

    @property
    def ok(self) -> bool:
        return self.mismatches == 0


def same_match(a: Optional[Rule], b: Optional[Rule]) -> bool:
    if a is None or b is None:
        return a is b
    return a.prefix == b.prefix and a.next_hop == b.next_hop


def verify(engine, ruleset: RuleSet, trace: Sequence[int]) -> VerifyResult:
    res = VerifyResult()
    rules = list(ruleset)
    w = ruleset.width
    for ip in trace:
        expected = linear_lookup(rules, ip, w)
        got = engine.lookup(ip)
        res.checked += 1
        if not same_match(expected, got):
            res.mismatches += 1
            if res.first is None:
                res.first = Mismatch(ip, expected, got)
    return res


def describe_mismatch(m: Mismatch, width: int) -> str:
    def show(r):
        return "none" if r is None else f"{format_prefix(r.prefix, width)} nh={r.next_hop}"
    return f"address {format_address(m.address, width)}: expected {show(m.expected)}, got {show(m.got)}"


@dataclass
class BenchReport:
    engine: str
    ruleset: str
    rules: int
    lookups: int
    avg_memory_accesses: Fraction
    worst_memory_accesses: int
    avg_node_visits: Fraction
    avg_bucket_probes: Fraction
    lookups_per_second: float
    updates: int = 0
    updates_per_second: Optional[float] = None
    estimated_bytes: Optional[int] = None
    plan: Optional[str] = None
    phase_seconds: dict[str, float] = field(default_factory=dict)

    def kv_lines(self) -> list[str]:
        out = [
            f"engine={self.engine}",
            f"ruleset={self.ruleset}",
            f"rules={self.rules}",
            f"lookups={self.lookups}",
            f"avg_memory_accesses={float(self.avg_memory_accesses):.6f}",
            f"avg_memory_accesses_exact={self.avg_memory_accesses}",
            f"worst_memory_accesses={self.worst_memory_accesses}",
            f"avg_node_visits={float(self.avg_node_visits):.6f}",
            f"avg_bucket_probes={float(self.avg_bucket_probes):.6f}",
            f"lookups_per_second={self.lookups_per_second:.1f}",
        ]
        if self.updates_per_second is not None:
            out.append(f"updates={self.updates}")
            out.append(f"updates_per_second={self.updates_per_second:.1f}")
        if self.estimated_bytes is not None:
            out.append(f"estimated_bytes={self.estimated_bytes}")
        if self.plan is not None:
            out.append(f"plan={self.plan}")
        for phase, secs in self.phase_seconds.items():
            out.append(f"seconds_{phase}={secs:.6f}")
        return out

    def table(self) -> str:
        rows = [(k, v) for k, v in (line.split("=", 1) for line in self.kv_lines())
                if not k.endswith("_exact")]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def estimated_bytes(engine) -> Optional[int]:
    if isinstance(engine, SegMobaTree):
        return engine.stats().estimated_bytes
    if isinstance(engine, (MobaTree, Treap)):
        return len(engine) * SegMobaTree.NODE_BYTES
    return None


def run_bench(engine_name: str, ruleset: RuleSet, trace: Sequence[int], *,
              updates: Optional[Sequence[Update]] = None,
              plan: Optional[Sequence[Segment]] = None,
              ruleset_id: str = "-", threads: int = 1) -> BenchReport:
    phases: dict[str, float] = {}
    t0 = time.perf_counter()
    engine = build_engine(engine_name, ruleset, plan)
    phases["build"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    counted = count_lookups_threaded(engine, trace, threads)
    phases["count"] = time.perf_counter() - t0

    secs = time_lookups(engine, trace, threads)
    phases["lookup"] = secs
    lps = len(trace) / secs if secs > 0 else float("inf")

    ups = None
    n_updates = 0
    if updates is not None:
        n_updates = len(updates)
        t0 = time.perf_counter()
        apply_updates(engine, updates)
        usecs = time.perf_counter() - t0
        phases["update"] = usecs
        ups = n_updates / usecs if usecs > 0 else float("inf")

    n = counted.lookups
    return BenchReport(
        engine=engine_name,
        ruleset=ruleset_id,
        rules=len(ruleset),
        lookups=n,
        avg_memory_accesses=counted.avg_accesses,
        worst_memory_accesses=counted.worst_accesses,
        avg_node_visits=Fraction(counted.node_visits, n) if n else Fraction(0),
        avg_bucket_probes=Fraction(counted.bucket_probes, n) if n else Fraction(0),
        lookups_per_second=lps,
        updates=n_updates,
        updates_per_second=ups,
        estimated_bytes=estimated_bytes(engine),
        plan=format_plan(engine.plan) if isinstance(engine, SegMobaTree) else None,
        phase_seconds=phases,
    )
