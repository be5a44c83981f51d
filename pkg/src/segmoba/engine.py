"""SegMobaTree: one hash table of MobaTrees per prefix-length segment.

A rule of length ``l`` lives in the table of the segment containing ``l``,
in the bucket selected by its first ``lo`` bits.  Lookup walks the tables
from the longest segment to the shortest and stops at the first match.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .mobatree import AccessCounter, MobaNode, MobaTree, _delete, _insert, iter_nodes, moba_lookup
from .prefix import NotFound, Prefix, PrefixError, Rule, RuleSet, check_width
from .segmentation import Segment, optimal_plan, validate_plan

MIN_CAPACITY = 16
_M64 = (1 << 64) - 1


def bucket_hash(key: int, lo: int) -> int:
    """splitmix64-style mix of (segment lower bound, reduced key)."""
    h = (lo * 0x9E3779B97F4A7C15) & _M64
    while True:
        h ^= key & _M64
        h = ((h ^ (h >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        h = ((h ^ (h >> 27)) * 0x94D049BB133111EB) & _M64
        h ^= h >> 31
        key >>= 64
        if not key:
            return h


def _capacity_for(keys: int) -> int:
    cap = MIN_CAPACITY
    while cap < 2 * keys:
        cap *= 2
    return cap


class SegmentTable:
    """Hash table for one segment; each bucket is the root of a MobaTree."""

    def __init__(self, segment: Segment, width: int, capacity: int = MIN_CAPACITY):
        self.segment = segment
        self.width = width
        self.shift = width - segment.lo
        self.capacity = 1 if segment.lo == 0 else capacity
        self.buckets: list[Optional[MobaNode]] = [None] * self.capacity
        self.key_counts: dict[int, int] = {}
        self.size = 0

    @property
    def distinct_keys(self) -> int:
        return len(self.key_counts)

    def index(self, key: int) -> int:
        if self.capacity == 1:
            return 0
        return bucket_hash(key, self.segment.lo) & (self.capacity - 1)

    def insert(self, rule: Rule) -> Optional[Rule]:
        key = rule.prefix.bits >> self.shift
        i = self.index(key)
        self.buckets[i], old = _insert(self.buckets[i], MobaNode(rule, self.width))
        if old is None:
            self.size += 1
            self.key_counts[key] = self.key_counts.get(key, 0) + 1
            if self.capacity > 1 and len(self.key_counts) > self.capacity // 2:
                self._rehash(self.capacity * 2)
        return old

    def delete(self, prefix: Prefix) -> Optional[Rule]:
        key = prefix.bits >> self.shift
        i = self.index(key)
        self.buckets[i], node = _delete(self.buckets[i], prefix, self.width)
        if node is None:
            return None
        self.size -= 1
        left = self.key_counts[key] - 1
        if left:
            self.key_counts[key] = left
        else:
            del self.key_counts[key]
        return node.rule

    def lookup(self, ip: int, counter: Optional[AccessCounter] = None) -> Optional[Rule]:
        if counter is not None:
            counter.bucket_probes += 1
        return moba_lookup(self.buckets[self.index(ip >> self.shift)], ip, counter)

    def nodes(self) -> Iterator[MobaNode]:
        for root in self.buckets:
            if root is not None:
                yield from iter_nodes(root)

    def bucket_trees(self) -> Iterator[MobaTree]:
        """Wrap each non-empty bucket as a MobaTree view (shares nodes)."""
        for root in self.buckets:
            if root is not None:
                t = MobaTree(self.width)
                t.root = root
                t.size = sum(1 for _ in iter_nodes(root))
                yield t

    def _rehash(self, capacity: int) -> None:
        rules = [n.rule for n in self.nodes()]
        self.capacity = capacity
        self.buckets = [None] * capacity
        for r in rules:
            i = self.index(r.prefix.bits >> self.shift)
            self.buckets[i], _ = _insert(self.buckets[i], MobaNode(r, self.width))


@dataclass
class EngineStats:
    node_count: int
    bucket_count: int
    distinct_keys: dict[str, int] = field(default_factory=dict)
    estimated_bytes: int = 0


class SegMobaTree:
    # byte model for the memory estimate: a node holds a 128-bit begin and
    # end, a rule pointer, three links and a height
    NODE_BYTES = 64
    BUCKET_BYTES = 8

    def __init__(self, width: int, plan: Sequence[Segment]):
        self.width = check_width(width)
        self.plan = validate_plan(plan, width)
        self._by_segment = [SegmentTable(s, width) for s in self.plan]
        # lookup order: long to short
        self.tables = sorted(self._by_segment, key=lambda t: -t.segment.lo)
        self._seg_of_len = [0] * (width + 1)
        for i, s in enumerate(self.plan):
            for length in range(s.lo, s.hi + 1):
                self._seg_of_len[length] = i
        self.rule_count = 0

    def __len__(self) -> int:
        return self.rule_count

    def __repr__(self) -> str:
        return f"SegMobaTree(width={self.width}, plan={self.plan}, rules={self.rule_count})"

    @classmethod
    def build(cls, ruleset: RuleSet, plan: Optional[Sequence[Segment]] = None) -> "SegMobaTree":
        if plan is None:
            plan = optimal_plan(ruleset)
        eng = cls(ruleset.width, plan)
        per_table: list[list[Rule]] = [[] for _ in eng.plan]
        for r in ruleset:
            per_table[eng._seg_of_len[r.prefix.length]].append(r)
        for table, rules in zip(eng._by_segment, per_table):
            keys = {r.prefix.bits >> table.shift for r in rules}
            if table.capacity > 1:
                table.capacity = _capacity_for(len(keys))
                table.buckets = [None] * table.capacity
            for r in rules:
                table.insert(r)
        eng.rule_count = len(ruleset)
        return eng

    def table_for(self, length: int) -> SegmentTable:
        return self._by_segment[self._seg_of_len[length]]

    def lookup(self, ip: int, counter: Optional[AccessCounter] = None) -> Optional[Rule]:
        for table in self.tables:
            if not table.size:
                continue
            rule = table.lookup(ip, counter)
            if rule is not None:
                return rule
        return None

    def insert(self, rule: Rule) -> Optional[Rule]:
        self._check(rule.prefix)
        old = self.table_for(rule.prefix.length).insert(rule)
        if old is None:
            self.rule_count += 1
        return old

    def delete(self, prefix: Prefix) -> Rule:
        self._check(prefix)
        rule = self.table_for(prefix.length).delete(prefix)
        if rule is None:
            raise NotFound(prefix)
        self.rule_count -= 1
        return rule

    def rules(self) -> Iterator[Rule]:
        for table in self._by_segment:
            for node in table.nodes():
                yield node.rule

    def ruleset(self) -> RuleSet:
        return RuleSet(self.width, self.rules())

    def nonempty_segments(self) -> int:
        return sum(1 for t in self.tables if t.size)

    def resplit(self, ruleset: Optional[RuleSet] = None) -> "SegMobaTree":
        """Rebuild aside with a freshly optimised plan; this engine is left untouched."""
        return self.build(ruleset if ruleset is not None else self.ruleset())

    def stats(self, node_bytes: int = NODE_BYTES, bucket_bytes: int = BUCKET_BYTES) -> EngineStats:
        live = [t for t in self._by_segment if t.size]
        nodes = sum(t.size for t in live)
        buckets = sum(t.capacity for t in live)
        return EngineStats(
            node_count=nodes,
            bucket_count=buckets,
            distinct_keys={str(t.segment): t.distinct_keys for t in live},
            estimated_bytes=nodes * node_bytes + buckets * bucket_bytes,
        )

    def validate(self) -> list[str]:
        from .mobatree import moba_validate

        problems = []
        total = 0
        for table in self._by_segment:
            count = 0
            for i, root in enumerate(table.buckets):
                if root is None:
                    continue
                for node in iter_nodes(root):
                    count += 1
                    p = node.rule.prefix
                    if not table.segment.lo <= p.length <= table.segment.hi:
                        problems.append(f"{node!r} stored in segment {table.segment}")
                    if table.index(p.bits >> table.shift) != i:
                        problems.append(f"{node!r} stored in bucket {i} of segment {table.segment}")
            for tree in table.bucket_trees():
                problems.extend(f"segment {table.segment}: {m}" for m in moba_validate(tree))
            if count != table.size:
                problems.append(f"segment {table.segment}: size {table.size}, found {count}")
            total += count
        if total != self.rule_count:
            problems.append(f"rule_count {self.rule_count}, found {total}")
        return problems

    def _check(self, prefix: Prefix) -> None:
        try:
            prefix.validate(self.width)
        except PrefixError as exc:
            raise PrefixError(f"width mismatch for engine of width {self.width}: {exc}") from None


def build(ruleset: RuleSet, plan: Optional[Iterable[Segment]] = None) -> SegMobaTree:
    return SegMobaTree.build(ruleset, list(plan) if plan is not None else None)
