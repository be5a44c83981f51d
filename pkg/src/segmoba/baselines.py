"""Reference structures: linear-scan oracle, length-indexed oracle, Treap, and
an exhaustive segmentation search used to check the DP."""
from __future__ import annotations

from typing import Iterable, Optional

from .mobatree import AccessCounter
from .prefix import NotFound, Prefix, Rule, RuleSet, check_width
from .segmentation import CostMatrix, Segment

BRUTE_FORCE_MAX_WIDTH = 16


def linear_lookup(rules: Iterable[Rule], ip: int, width: int,
                  counter: Optional[AccessCounter] = None) -> Optional[Rule]:
    best = None
    scanned = 0
    for r in rules:
        scanned += 1
        p = r.prefix
        shift = width - p.length
        if ip >> shift == p.bits >> shift and (best is None or p.length > best.prefix.length):
            best = r
    if counter is not None:
        counter.node_visits += scanned
    return best


class LinearTable:
    """Mutable rule list answered by full scan."""

    def __init__(self, width: int, rules: Iterable[Rule] = ()):
        self.width = check_width(width)
        self._rules: dict[Prefix, Rule] = {}
        for r in rules:
            self.insert(r)

    def __len__(self) -> int:
        return len(self._rules)

    def insert(self, rule: Rule) -> Optional[Rule]:
        rule.prefix.validate(self.width)
        old = self._rules.get(rule.prefix)
        self._rules[rule.prefix] = rule
        return old

    def delete(self, prefix: Prefix) -> Rule:
        try:
            return self._rules.pop(prefix)
        except KeyError:
            raise NotFound(prefix) from None

    def lookup(self, ip: int, counter: Optional[AccessCounter] = None) -> Optional[Rule]:
        return linear_lookup(self._rules.values(), ip, self.width, counter)

    def rules(self):
        return iter(self._rules.values())


class LengthIndex:
    """Exact-match dictionary per prefix length, probed longest length first.

    Shares no code with the trees; used as the oracle when a full linear
    scan per address would be too slow.
    """

    def __init__(self, width: int, rules: Iterable[Rule] = ()):
        self.width = check_width(width)
        self._by_len: dict[int, dict[int, Rule]] = {}
        self._lengths: list[int] = []
        for r in rules:
            self.insert(r)

    def __len__(self) -> int:
        return sum(len(d) for d in self._by_len.values())

    def insert(self, rule: Rule) -> Optional[Rule]:
        p = rule.prefix
        table = self._by_len.get(p.length)
        if table is None:
            table = self._by_len[p.length] = {}
            self._lengths = sorted(self._by_len, reverse=True)
        key = p.bits >> (self.width - p.length)
        old = table.get(key)
        table[key] = rule
        return old

    def delete(self, prefix: Prefix) -> Rule:
        table = self._by_len.get(prefix.length)
        key = prefix.bits >> (self.width - prefix.length)
        if table is None or key not in table:
            raise NotFound(prefix)
        rule = table.pop(key)
        if not table:
            del self._by_len[prefix.length]
            self._lengths = sorted(self._by_len, reverse=True)
        return rule

    def lookup(self, ip: int, counter: Optional[AccessCounter] = None) -> Optional[Rule]:
        w = self.width
        for length in self._lengths:
            if counter is not None:
                counter.bucket_probes += 1
            r = self._by_len[length].get(ip >> (w - length))
            if r is not None:
                return r
        return None

    def rules(self):
        for table in self._by_len.values():
            yield from table.values()


# -- Treap -------------------------------------------------------------------

class TreapNode:
    __slots__ = ("rule", "key", "end", "length", "left", "right")

    def __init__(self, rule: Rule, width: int):
        p = rule.prefix
        self.rule = rule
        self.key = p.bits
        self.end = p.bits + (1 << (width - p.length)) - 1
        self.length = p.length
        self.left: Optional[TreapNode] = None
        self.right: Optional[TreapNode] = None

    def order(self) -> tuple[int, int]:
        # equal begins: the shorter prefix sorts first so it can sit above
        return (self.key, self.length)

    def __repr__(self) -> str:
        return f"TreapNode({self.key}/{self.length})"


def _rot_right(y: TreapNode) -> TreapNode:
    x = y.left
    y.left = x.right
    x.right = y
    return x


def _rot_left(x: TreapNode) -> TreapNode:
    y = x.right
    x.right = y.left
    y.left = x
    return y


class Treap:
    """BST on range begin, min-heap on prefix length.

    A newly inserted node rises above parents of equal length, which is what
    produces the long chain of the six disjoint example rules.
    """

    def __init__(self, width: int, rules: Iterable[Rule] = ()):
        self.width = check_width(width)
        self.root: Optional[TreapNode] = None
        self.size = 0
        for r in rules:
            self.insert(r)

    def __len__(self) -> int:
        return self.size

    def insert(self, rule: Rule) -> Optional[Rule]:
        rule.prefix.validate(self.width)
        self._replaced = None
        self.root = self._insert(self.root, TreapNode(rule, self.width))
        if self._replaced is None:
            self.size += 1
        return self._replaced

    def _insert(self, node: Optional[TreapNode], new: TreapNode) -> TreapNode:
        if node is None:
            return new
        if new.rule.prefix == node.rule.prefix:
            self._replaced = node.rule
            node.rule = new.rule
            return node
        if new.order() < node.order():
            node.left = self._insert(node.left, new)
            if node.left.length <= node.length:
                node = _rot_right(node)
        else:
            node.right = self._insert(node.right, new)
            if node.right.length <= node.length:
                node = _rot_left(node)
        return node

    def delete(self, prefix: Prefix) -> Rule:
        self._removed = None
        self.root = self._delete(self.root, (prefix.bits, prefix.length))
        if self._removed is None:
            raise NotFound(prefix)
        self.size -= 1
        return self._removed

    def _delete(self, node: Optional[TreapNode], key: tuple[int, int]) -> Optional[TreapNode]:
        if node is None:
            return None
        k = node.order()
        if key < k:
            node.left = self._delete(node.left, key)
        elif key > k:
            node.right = self._delete(node.right, key)
        else:
            if self._removed is None:
                self._removed = node.rule
            if node.left is None:
                return node.right
            if node.right is None:
                return node.left
            # rotate the shorter child up, then keep sinking the target
            if node.left.length <= node.right.length:
                node = _rot_right(node)
                node.right = self._delete(node.right, key)
            else:
                node = _rot_left(node)
                node.left = self._delete(node.left, key)
        return node

    def lookup(self, ip: int, counter: Optional[AccessCounter] = None) -> Optional[Rule]:
        """Descend by begin address to a leaf, keeping the last matching rule.

        A node whose begin is <= ip can have no match in its left subtree: such
        a match would overlap the node while being no shorter than it, so it
        would have to lie inside the node and start at or after its begin.
        Lengths grow along the path, so the last match is the longest.
        """
        best = None
        node = self.root
        visits = 0
        while node is not None:
            visits += 1
            if ip < node.key:
                node = node.left
            else:
                if ip <= node.end:
                    best = node.rule
                node = node.right
        if counter is not None:
            counter.node_visits += visits
        return best

    def height(self) -> int:
        def h(n):
            return 0 if n is None else 1 + max(h(n.left), h(n.right))
        return h(self.root)

    def rules(self):
        stack = [self.root] if self.root else []
        while stack:
            n = stack.pop()
            yield n.rule
            stack.extend(c for c in (n.left, n.right) if c is not None)

    def validate(self) -> list[str]:
        problems: list[str] = []
        count = 0
        # iterative: (node, lower bound, upper bound) on the composite order
        stack: list[tuple[TreapNode, Optional[tuple], Optional[tuple]]] = []
        if self.root is not None:
            stack.append((self.root, None, None))
        while stack:
            node, lo, hi = stack.pop()
            count += 1
            k = node.order()
            if (lo is not None and k < lo) or (hi is not None and k >= hi):
                problems.append(f"{node!r}: key order violated")
            for child in (node.left, node.right):
                if child is not None and child.length < node.length:
                    problems.append(f"{node!r}: child {child!r} has a shorter prefix")
            if node.left is not None:
                stack.append((node.left, lo, k))
            if node.right is not None:
                stack.append((node.right, k, hi))
        if count != self.size:
            problems.append(f"size {self.size}, found {count}")
        return problems


# -- segmentation oracle ------------------------------------------------------

def brute_force_min_cost(C: CostMatrix) -> tuple[object, list[Segment]]:
    """Try every contiguous partition of lengths 0..w (2**w of them)."""
    w = C.width
    if w > BRUTE_FORCE_MAX_WIDTH:
        raise ValueError(f"refusing exhaustive search over 2**{w} partitions (max width {BRUTE_FORCE_MAX_WIDTH})")
    cost = C.C
    best = None
    best_plan: list[Segment] = []
    for mask in range(1 << w):
        # bit i set: cut between lengths i and i + 1
        total = 0
        plan = []
        lo = 0
        for i in range(w):
            if mask >> i & 1:
                total += cost[lo][i]
                plan.append(Segment(lo, i))
                lo = i + 1
        total += cost[lo][w]
        plan.append(Segment(lo, w))
        if best is None or total < best:
            best, best_plan = total, plan
    return best, best_plan
