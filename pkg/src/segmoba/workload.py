"""Seeded generators for edge-style rulesets, lookup traces and update streams."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, TextIO

from .prefix import (NotFound, ParseError, Prefix, Rule, RuleSet, check_width, format_address,
                     format_prefix, parse_address, parse_prefix)

# synthetic backbone: random /48s under 2000::/3, scaled down for narrow widths
BACKBONE_LENGTH = 48
BACKBONE_SHARE = 32  # one backbone prefix per this many generated rules
MAX_REJECTS = 1000
# synthetic mode: chance that a rule extends an earlier (shorter) generated
# rule rather than a backbone prefix, giving /64 > /96 > /128 style nesting
NEST_PROBABILITY = 0.5


class GenError(ValueError):
    pass


@dataclass
class GenConfig:
    width: int = 128
    rule_count: int = 1000
    length_histogram: dict[int, float] = field(default_factory=lambda: {64: 1.0})
    seed: int = 0
    base_ruleset: Optional[RuleSet] = None

    def __post_init__(self):
        check_width(self.width)
        if self.rule_count < 1:
            raise GenError("rule_count must be at least 1")
        total = sum(self.length_histogram.values())
        if abs(total - 1.0) > 1e-9:
            raise GenError(f"length fractions sum to {total}, not 1")
        for length, frac in self.length_histogram.items():
            if not 0 <= length <= self.width:
                raise GenError(f"length {length} outside 0..{self.width}")
            if frac < 0:
                raise GenError(f"negative fraction for length {length}")
        if self.base_ruleset is not None and self.base_ruleset.width != self.width:
            raise GenError("base ruleset width differs from config width")


@dataclass
class TraceConfig:
    packet_count: int = 1000
    repeat_factor: int = 1
    match_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.repeat_factor < 1:
            raise GenError("repeat_factor must be >= 1")
        if not 0.0 <= self.match_fraction <= 1.0:
            raise GenError("match_fraction must lie in [0, 1]")
        if self.packet_count < 0:
            raise GenError("packet_count must be >= 0")


def parse_histogram(text: str) -> dict[int, float]:
    """``64:0.5,96:0.25,128:0.25`` -> {64: 0.5, ...}"""
    hist: dict[int, float] = {}
    for part in text.split(","):
        length, sep, frac = part.strip().partition(":")
        if not sep:
            raise GenError(f"bad histogram entry {part!r}, expected len:fraction")
        try:
            hist[int(length)] = hist.get(int(length), 0.0) + float(frac)
        except ValueError:
            raise GenError(f"bad histogram entry {part!r}") from None
    return hist


def _allocate(hist: dict[int, float], total: int) -> dict[int, int]:
    """Largest-remainder rounding of fractions to integer counts."""
    raw = {length: frac * total for length, frac in hist.items()}
    counts = {length: int(v) for length, v in raw.items()}
    short = total - sum(counts.values())
    for length in sorted(raw, key=lambda k: (-(raw[k] - counts[k]), k))[:short]:
        counts[length] += 1
    return counts


def _random_prefix(rng: random.Random, width: int, length: int, under: Optional[Prefix] = None) -> Prefix:
    if under is None or under.length > length:
        head, head_len = 0, 0
    else:
        head, head_len = under.bits >> (width - under.length), under.length
    free = length - head_len
    top = (head << free) | rng.getrandbits(free) if free else head
    return Prefix(top << (width - length), length)


def _synthetic_base(rng: random.Random, width: int, count: int) -> list[Prefix]:
    length = min(BACKBONE_LENGTH, (width * 3) // 8)
    lead = Prefix(1 << (width - 3), 3) if length >= 3 else None  # 2000::/3 at full width
    return [_random_prefix(rng, width, length, lead) for _ in range(count)]


def gen_ruleset(cfg: GenConfig) -> RuleSet:
    """Rules with distinct prefixes whose length histogram follows ``cfg``.

    Every rule extends a randomly picked base prefix with random bits.  Base
    prefixes longer than the sampled length are emitted unchanged when a
    base ruleset is given.  Without one, a synthetic backbone of /48s is
    used (truncated for shorter lengths), and rules may also extend earlier
    generated rules so that longer prefixes nest under shorter ones.
    """
    w = cfg.width
    rng = random.Random(cfg.seed)
    counts = _allocate(cfg.length_histogram, cfg.rule_count)
    for length, n in counts.items():
        if n > 1 << length:
            raise GenError(f"{n} distinct /{length} prefixes requested, only {1 << length} exist")

    if cfg.base_ruleset is not None:
        base = sorted(r.prefix for r in cfg.base_ruleset)
        if not base:
            raise GenError("base ruleset is empty")
        synthetic = False
    else:
        base = _synthetic_base(rng, w, max(1, cfg.rule_count // BACKBONE_SHARE))
        synthetic = True

    seen: set[Prefix] = set()
    rules: list[Rule] = []
    for length in sorted(counts):
        for _ in range(counts[length]):
            for attempt in range(MAX_REJECTS):
                if synthetic and rules and rng.random() < NEST_PROBABILITY:
                    b = rules[rng.randrange(len(rules))].prefix
                else:
                    b = base[rng.randrange(len(base))]
                if synthetic and attempt >= 8:
                    # the synthetic base is only a shape hint; fall back to free bits
                    p = _random_prefix(rng, w, length)
                elif b.length <= length:
                    p = _random_prefix(rng, w, length, b)
                elif synthetic:
                    shift = w - length
                    p = Prefix((b.bits >> shift) << shift, length)
                else:
                    p = b
                if p not in seen:
                    break
            else:
                raise GenError(f"could not find a fresh /{length} prefix after {MAX_REJECTS} tries")
            seen.add(p)
            rules.append(Rule(p, rng.randrange(1 << 16)))
    return RuleSet(w, rules)


def gen_trace(ruleset: RuleSet, cfg: TraceConfig) -> list[int]:
    rng = random.Random(cfg.seed)
    w = ruleset.width
    rules = sorted(ruleset, key=lambda r: (r.prefix.length, r.prefix.bits))
    if cfg.match_fraction > 0 and not rules:
        raise GenError("cannot draw matching addresses from an empty ruleset")
    matched = round(cfg.packet_count * cfg.match_fraction)
    base: list[int] = []
    for _ in range(matched):
        p = rules[rng.randrange(len(rules))].prefix
        host = w - p.length
        base.append(p.bits | (rng.getrandbits(host) if host else 0))
    for _ in range(cfg.packet_count - matched):
        base.append(rng.getrandbits(w))
    rng.shuffle(base)
    return [a for a in base for _ in range(cfg.repeat_factor)]


@dataclass(frozen=True)
class Update:
    op: str  # "I" or "D"
    rule: Optional[Rule] = None
    prefix: Optional[Prefix] = None

    @property
    def target(self) -> Prefix:
        return self.rule.prefix if self.rule is not None else self.prefix


def gen_update_stream(ruleset: RuleSet, n: int, seed: int) -> list[Update]:
    """Alternate deleting a random live rule with inserting a fresh prefix.

    Fresh prefixes copy the length of a random live rule and re-draw its
    trailing bits, keeping the length histogram and nesting roughly stable.
    """
    rng = random.Random(seed)
    w = ruleset.width
    live = sorted(r.prefix for r in ruleset)
    index = {p: i for i, p in enumerate(live)}
    out: list[Update] = []

    def remove(p: Prefix) -> None:
        i = index.pop(p)
        last = live.pop()
        if i < len(live):
            live[i] = last
            index[last] = i

    def fresh() -> Prefix:
        for _ in range(MAX_REJECTS):
            if live:
                t = live[rng.randrange(len(live))]
                length = t.length
                keep = max(0, length - 16)
                shift = w - keep
                anchor = Prefix((t.bits >> shift) << shift, keep) if keep else None
                p = _random_prefix(rng, w, length, anchor)
            else:
                p = _random_prefix(rng, w, rng.randint(0, w))
            if p not in index:
                return p
        raise GenError("could not find a fresh prefix for the update stream")

    delete_next = True
    for _ in range(n):
        if delete_next and live:
            p = live[rng.randrange(len(live))]
            remove(p)
            out.append(Update("D", prefix=p))
        else:
            p = fresh()
            index[p] = len(live)
            live.append(p)
            out.append(Update("I", rule=Rule(p, rng.randrange(1 << 16))))
        delete_next = not delete_next
    return out


def apply_updates(engine, updates: Iterable[Update]) -> None:
    for u in updates:
        if u.op == "I":
            engine.insert(u.rule)
        else:
            try:
                engine.delete(u.prefix)
            except NotFound:
                pass


# -- file formats ---------------------------------------------------------------

def write_trace(trace: Iterable[int], width: int, out: TextIO) -> None:
    for a in trace:
        out.write(format_address(a, width))
        out.write("\n")


def read_trace(stream: Iterable[str], width: int) -> list[int]:
    out = []
    for lineno, line in enumerate(stream, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(parse_address(line, width))
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
    return out


def format_update(u: Update, width: int) -> str:
    if u.op == "I":
        return f"I {format_prefix(u.rule.prefix, width)} {u.rule.next_hop}"
    return f"D {format_prefix(u.prefix, width)}"


def write_updates(updates: Iterable[Update], width: int, out: TextIO) -> None:
    for u in updates:
        out.write(format_update(u, width))
        out.write("\n")


def read_updates(stream: Iterable[str], width: int) -> Iterator[Update]:
    for lineno, line in enumerate(stream, 1):
        fields = line.split()
        if not fields or fields[0].startswith("#"):
            continue
        try:
            if fields[0] == "I" and len(fields) == 3:
                yield Update("I", rule=Rule(parse_prefix(fields[1], width), int(fields[2])))
            elif fields[0] == "D" and len(fields) == 2:
                yield Update("D", prefix=parse_prefix(fields[1], width))
            else:
                raise ValueError(f"expected 'I <prefix> <next_hop>' or 'D <prefix>', got {line.strip()!r}")
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
