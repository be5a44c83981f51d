"""Lookup-cost model for prefix-length segments and the splitting DP.

A segment ``[lo, hi]`` gets one hash table keyed by the first ``lo`` bits of
each rule; every bucket holds one tree.  Its modeled cost is

* hash part: total weight of rules with length <= hi (every packet whose
  best match is that short probes this table on the long-to-short walk);
* tree part: for each group of rules sharing a reduced key, with ``n`` rules
  and weight ``W``, ``(ceil(log2 n) + 1) * W``.

Costs stay exact (ints, or Fractions for weighted rules) so ties in the DP
are well defined.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .prefix import RuleSet, Weight, check_width


def depth_bound(n: int) -> int:
    """``ceil(log2 n) + 1`` for a tree of ``n >= 1`` rules."""
    return (n - 1).bit_length() + 1


class Segment(NamedTuple):
    lo: int
    hi: int

    def __str__(self) -> str:
        return f"{self.lo}-{self.hi}"


class PlanError(ValueError):
    pass


@dataclass
class LengthHistogram:
    width: int
    count: list[int]
    weight_sum: list[Weight]

    @classmethod
    def from_ruleset(cls, rs: RuleSet) -> "LengthHistogram":
        count = [0] * (rs.width + 1)
        weight: list[Weight] = [0] * (rs.width + 1)
        for r in rs:
            count[r.prefix.length] += 1
            weight[r.prefix.length] += r.weight
        return cls(rs.width, count, weight)

    def cumulative_weight(self) -> list[Weight]:
        out: list[Weight] = []
        acc: Weight = 0
        for w in self.weight_sum:
            acc += w
            out.append(acc)
        return out


def hash_cost(hist: LengthHistogram, seg: Segment) -> Weight:
    return sum(hist.weight_sum[: seg.hi + 1])


def tree_cost(rs: RuleSet, seg: Segment) -> Weight:
    shift = rs.width - seg.lo
    groups: dict[int, list] = defaultdict(lambda: [0, 0])
    for r in rs:
        if seg.lo <= r.prefix.length <= seg.hi:
            g = groups[r.prefix.bits >> shift]
            g[0] += 1
            g[1] += r.weight
    return sum(depth_bound(n) * w for n, w in groups.values())


class CostMatrix:
    """``C[x][y]`` for ``0 <= x <= y <= width``; split into hash and tree parts."""

    def __init__(self, width: int, hash_part: list[list], tree_part: list[list]):
        self.width = width
        self.hash_part = hash_part
        self.tree_part = tree_part
        n = width + 1
        self.C = [[hash_part[x][y] + tree_part[x][y] if y >= x else None for y in range(n)]
                  for x in range(n)]

    def __getitem__(self, xy: tuple[int, int]):
        x, y = xy
        if not 0 <= x <= y <= self.width:
            raise IndexError(xy)
        return self.C[x][y]


def build_cost_matrix(rs: RuleSet) -> CostMatrix:
    if rs.unit_weights:
        return _cost_matrix_unit(rs)
    return _cost_matrix_weighted(rs)


def _hash_rows(hist: LengthHistogram) -> list[list]:
    n = hist.width + 1
    cum = hist.cumulative_weight()
    return [[cum[y] if y >= x else None for y in range(n)] for x in range(n)]


def _cost_matrix_weighted(rs: RuleSet) -> CostMatrix:
    """Row by row: grow the segment one length at a time, updating only touched groups."""
    w = rs.width
    by_len: list[list] = [[] for _ in range(w + 1)]
    for r in rs:
        by_len[r.prefix.length].append(r)
    tree: list[list] = [[None] * (w + 1) for _ in range(w + 1)]
    for x in range(w + 1):
        shift = w - x
        groups: dict[int, list] = {}
        total: Weight = 0
        for y in range(x, w + 1):
            for r in by_len[y]:
                key = r.prefix.bits >> shift
                g = groups.get(key)
                if g is None:
                    g = groups[key] = [0, 0]
                total -= depth_bound(g[0]) * g[1] if g[0] else 0
                g[0] += 1
                g[1] += r.weight
                total += depth_bound(g[0]) * g[1]
            tree[x][y] = total
    return CostMatrix(w, _hash_rows(LengthHistogram.from_ruleset(rs)), tree)


def _split_words(values: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    mask = (1 << 64) - 1
    hi = np.fromiter(((v >> 64) & mask for v in values), dtype=np.uint64, count=len(values))
    lo = np.fromiter((v & mask for v in values), dtype=np.uint64, count=len(values))
    return hi, lo


def _top_bits(hi: np.ndarray, lo: np.ndarray, width: int, x: int) -> tuple[np.ndarray, np.ndarray]:
    """First ``x`` bits of each ``width``-bit value, as two 64-bit words."""
    shift = width - x
    if shift >= 128:
        z = np.zeros_like(lo)
        return z, z
    if shift >= 64:
        return np.zeros_like(lo), hi >> np.uint64(shift - 64)
    if shift == 0:
        return hi, lo
    s = np.uint64(shift)
    return hi >> s, (lo >> s) | (hi << np.uint64(64 - shift))


def _cost_matrix_unit(rs: RuleSet) -> CostMatrix:
    """Vectorised unit-weight path.

    For each lower bound ``x`` the rules with length >= x are sorted by
    (reduced key, length); a rule that is the k-th of its group to arrive
    adds ``f(k) - f(k-1)`` with ``f(n) = (ceil(log2 n) + 1) * n``.  Summing
    those increments per length and taking a running sum over ``y`` gives
    the whole row at once.
    """
    w = rs.width
    rules = rs.rules
    n = w + 1
    tree = [[None] * n for _ in range(n)]
    if not rules:
        for x in range(n):
            for y in range(x, n):
                tree[x][y] = 0
        return CostMatrix(w, _hash_rows(LengthHistogram.from_ruleset(rs)), tree)

    lengths_all = np.fromiter((r.prefix.length for r in rules), dtype=np.int64, count=len(rules))
    hi_all, lo_all = _split_words([r.prefix.bits for r in rules])

    for x in range(n):
        sel = lengths_all >= x
        lengths = lengths_all[sel]
        if lengths.size == 0:
            for y in range(x, n):
                tree[x][y] = 0
            continue
        khi, klo = _top_bits(hi_all[sel], lo_all[sel], w, x)
        order = np.lexsort((lengths, klo, khi))
        khi, klo, lengths = khi[order], klo[order], lengths[order]
        new_group = np.ones(lengths.size, dtype=bool)
        new_group[1:] = (khi[1:] != khi[:-1]) | (klo[1:] != klo[:-1])
        idx = np.arange(lengths.size, dtype=np.int64)
        starts = np.maximum.accumulate(np.where(new_group, idx, 0))
        k = idx - starts + 1  # arrival rank inside the group
        delta = _f(k) - _f(k - 1)
        per_len = np.zeros(n, dtype=np.int64)
        np.add.at(per_len, lengths, delta)
        row = np.cumsum(per_len[x:])
        for y in range(x, n):
            tree[x][y] = int(row[y - x])
    return CostMatrix(w, _hash_rows(LengthHistogram.from_ruleset(rs)), tree)


def _f(k: np.ndarray) -> np.ndarray:
    # (ceil(log2 k) + 1) * k, with f(0) = 0; frexp gives bit_length(k - 1) exactly
    km1 = np.maximum(k - 1, 0).astype(np.float64)
    bits = np.frexp(km1)[1].astype(np.int64)
    return np.where(k > 0, (bits + 1) * k, 0)


@dataclass
class SplitTable:
    S: list[list]
    split: list[list]  # argmin k, or None when the unsplit segment is best
    segments: list[list]  # segment count of the chosen partition


def dp_split(C: CostMatrix) -> tuple[SplitTable, list[Segment]]:
    """Minimum-cost contiguous partition of lengths ``0..width``.

    Windows are filled from narrow to wide.  Among equal-cost candidates the
    one with fewer segments wins (so the unsplit segment wins any tie it is
    part of), then the smallest split point.  Without the segment count,
    zero-cost empty length ranges would be split off for nothing.
    """
    w = C.width
    n = w + 1
    S = [[None] * n for _ in range(n)]
    N = [[0] * n for _ in range(n)]
    split = [[None] * n for _ in range(n)]
    cost = C.C
    for span in range(n):
        for x in range(n - span):
            y = x + span
            best = cost[x][y]
            best_n = 1
            arg = None
            Sx, Nx = S[x], N[x]
            for k in range(x, y):
                cand = Sx[k] + S[k + 1][y]
                if cand < best or (cand == best and Nx[k] + N[k + 1][y] < best_n):
                    best = cand
                    best_n = Nx[k] + N[k + 1][y]
                    arg = k
            S[x][y] = best
            N[x][y] = best_n
            split[x][y] = arg
    table = SplitTable(S, split, N)
    return table, backtrack(table, 0, w)


def backtrack(table: SplitTable, x: int, y: int) -> list[Segment]:
    out: list[Segment] = []
    stack = [(x, y)]
    while stack:
        a, b = stack.pop()
        k = table.split[a][b]
        if k is None:
            out.append(Segment(a, b))
        else:
            stack.append((k + 1, b))
            stack.append((a, k))
    return out


def validate_plan(plan: Sequence[Segment], width: int) -> list[Segment]:
    check_width(width)
    segs = [Segment(*s) for s in plan]
    if not segs:
        raise PlanError("empty plan")
    if segs[0].lo != 0:
        raise PlanError(f"plan must start at length 0, starts at {segs[0].lo}")
    if segs[-1].hi != width:
        raise PlanError(f"plan must end at length {width}, ends at {segs[-1].hi}")
    for s in segs:
        if not 0 <= s.lo <= s.hi <= width:
            raise PlanError(f"bad segment {s}")
    for a, b in zip(segs, segs[1:]):
        if a.hi + 1 != b.lo:
            raise PlanError(f"segments {a} and {b} are not contiguous")
    return segs


def plan_cost(plan: Sequence[Segment], C: CostMatrix) -> Weight:
    return sum(C[s.lo, s.hi] for s in validate_plan(plan, C.width))


def parse_plan(text: str, width: int) -> list[Segment]:
    """Parse ``lo-hi,lo-hi,...``."""
    segs = []
    for part in text.split(","):
        lo, sep, hi = part.strip().partition("-")
        if not sep:
            raise PlanError(f"bad segment {part!r}, expected lo-hi")
        try:
            segs.append(Segment(int(lo), int(hi)))
        except ValueError:
            raise PlanError(f"bad segment {part!r}") from None
    return validate_plan(segs, width)


def format_plan(plan: Iterable[Segment]) -> str:
    return ",".join(str(s) for s in plan)


def optimal_plan(rs: RuleSet) -> list[Segment]:
    return dp_split(build_cost_matrix(rs))[1]
