"""Address and prefix arithmetic, rules, and the ruleset text format.

Addresses are plain ints right-aligned in ``width`` bits.  A prefix keeps
its network address (low ``width - length`` bits zero) together with its
length, so ``Prefix.bits`` is also the first address of its range.
"""
from __future__ import annotations

import enum
import ipaddress
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple, TextIO, Union

log = logging.getLogger(__name__)

MAX_WIDTH = 128

Weight = Union[int, Fraction]


class PrefixError(ValueError):
    """Raised for prefixes or addresses that are not valid under a width."""


class ParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class NotFound(KeyError):
    """Delete of a prefix that is not stored."""


def check_width(width: int) -> int:
    if not isinstance(width, int) or not 1 <= width <= MAX_WIDTH:
        raise PrefixError(f"address width must be in 1..{MAX_WIDTH}, got {width!r}")
    return width


@dataclass(frozen=True, order=True)
class Prefix:
    bits: int
    length: int

    def validate(self, width: int) -> "Prefix":
        if not 0 <= self.length <= width:
            raise PrefixError(f"prefix length {self.length} outside 0..{width}")
        if not 0 <= self.bits < (1 << width):
            raise PrefixError(f"prefix value {self.bits} does not fit in {width} bits")
        if self.bits & ((1 << (width - self.length)) - 1):
            raise PrefixError(f"prefix {self.bits}/{self.length} has host bits set")
        return self


class AddrRange(NamedTuple):
    begin: int
    end: int


class PrefixRelation(enum.Enum):
    DISJOINT = "disjoint"
    EQUAL = "equal"
    FIRST_CONTAINS_SECOND = "first_contains_second"
    SECOND_CONTAINS_FIRST = "second_contains_first"


@dataclass(frozen=True)
class Rule:
    prefix: Prefix
    next_hop: int
    weight: Weight = 1

    def __post_init__(self):
        if not 0 <= self.next_hop < 1 << 32:
            raise ValueError(f"next hop {self.next_hop} is not a 32-bit identifier")
        if self.weight <= 0:
            raise ValueError(f"rule weight must be positive, got {self.weight}")


def prefix_range(p: Prefix, width: int) -> AddrRange:
    p.validate(width)
    return AddrRange(p.bits, p.bits + (1 << (width - p.length)) - 1)


def prefix_relation(a: Prefix, b: Prefix, width: int) -> PrefixRelation:
    a.validate(width)
    b.validate(width)
    if a == b:
        return PrefixRelation.EQUAL
    # aligned ranges: the shorter one contains the longer iff they agree on
    # the shorter one's leading bits
    shift = width - min(a.length, b.length)
    if a.bits >> shift != b.bits >> shift:
        return PrefixRelation.DISJOINT
    if a.length < b.length:
        return PrefixRelation.FIRST_CONTAINS_SECOND
    return PrefixRelation.SECOND_CONTAINS_FIRST


def contains(outer: Prefix, inner: Prefix, width: int) -> bool:
    """True when ``outer`` covers ``inner`` (equal prefixes included)."""
    if outer.length > inner.length:
        return False
    shift = width - outer.length
    return outer.bits >> shift == inner.bits >> shift


def reduce_prefix(p: Prefix, x: int, width: int) -> Prefix:
    """Truncate ``p`` to its first ``x`` bits."""
    if not 0 <= x <= p.length:
        raise PrefixError(f"cannot reduce a /{p.length} prefix to /{x}")
    shift = width - x
    return Prefix((p.bits >> shift) << shift, x)


def address_matches(p: Prefix, addr: int, width: int) -> bool:
    shift = width - p.length
    return addr >> shift == p.bits >> shift


# -- text encodings ---------------------------------------------------------

def parse_address(token: str, width: int) -> int:
    if ":" in token:
        if width != 128:
            raise PrefixError(f"IPv6 text address {token!r} needs width 128")
        try:
            return int(ipaddress.IPv6Address(token))
        except ipaddress.AddressValueError as exc:
            raise PrefixError(str(exc)) from None
    try:
        value = int(token, 10)
    except ValueError:
        raise PrefixError(f"bad address {token!r}") from None
    if not 0 <= value < (1 << width):
        raise PrefixError(f"address {token} does not fit in {width} bits")
    return value


def format_address(addr: int, width: int) -> str:
    if width == 128:
        return str(ipaddress.IPv6Address(addr))
    return str(addr)


def parse_prefix(token: str, width: int) -> Prefix:
    addr, sep, length = token.partition("/")
    if not sep:
        raise PrefixError(f"missing '/<len>' in {token!r}")
    try:
        n = int(length, 10)
    except ValueError:
        raise PrefixError(f"bad prefix length in {token!r}") from None
    return Prefix(parse_address(addr, width), n).validate(width)


def format_prefix(p: Prefix, width: int) -> str:
    return f"{format_address(p.bits, width)}/{p.length}"


def parse_weight(token: str) -> Weight:
    try:
        w = Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"bad weight {token!r}") from None
    return int(w) if w.denominator == 1 else w


class RuleSet:
    """An immutable collection of rules with distinct prefixes."""

    def __init__(self, width: int, rules: Iterable[Rule] = ()):
        self.width = check_width(width)
        by_prefix: dict[Prefix, Rule] = {}
        for r in rules:
            r.prefix.validate(width)
            by_prefix[r.prefix] = r
        self._rules = by_prefix
        self.duplicates = 0

    def __len__(self) -> int:
        return len(self._rules)

    def __iter__(self) -> Iterator[Rule]:
        return iter(self._rules.values())

    def __contains__(self, p: Prefix) -> bool:
        return p in self._rules

    def __eq__(self, other) -> bool:
        if not isinstance(other, RuleSet):
            return NotImplemented
        return self.width == other.width and self._rules == other._rules

    def __repr__(self) -> str:
        return f"RuleSet(width={self.width}, rules={len(self)})"

    def get(self, p: Prefix) -> Rule | None:
        return self._rules.get(p)

    @property
    def rules(self) -> list[Rule]:
        return list(self._rules.values())

    @property
    def unit_weights(self) -> bool:
        return all(r.weight == 1 for r in self._rules.values())


def parse_ruleset(stream: TextIO | Iterable[str], width: int) -> RuleSet:
    """Read ``<address>/<len> <next_hop> [weight]`` lines.

    Duplicate prefixes keep the last line; their number is stored on the
    returned set as ``duplicates``.
    """
    check_width(width)
    rules: dict[Prefix, Rule] = {}
    dups = 0
    for lineno, raw in enumerate(stream, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) not in (2, 3):
            raise ParseError(lineno, f"expected '<address>/<len> <next_hop> [weight]', got {line!r}")
        try:
            prefix = parse_prefix(fields[0], width)
            next_hop = int(fields[1], 10)
            weight = parse_weight(fields[2]) if len(fields) == 3 else 1
            rule = Rule(prefix, next_hop, weight)
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
        if prefix in rules:
            dups += 1
        rules[prefix] = rule
    if dups:
        log.warning("%d duplicate prefixes in ruleset, last occurrence kept", dups)
    rs = RuleSet(width, rules.values())
    rs.duplicates = dups
    return rs


def format_rule(rule: Rule, width: int) -> str:
    line = f"{format_prefix(rule.prefix, width)} {rule.next_hop}"
    if rule.weight != 1:
        line += f" {rule.weight}"
    return line


def write_ruleset(rs: RuleSet, out: TextIO) -> None:
    for rule in rs:
        out.write(format_rule(rule, rs.width))
        out.write("\n")


def serialize_ruleset(rs: RuleSet) -> str:
    return "".join(format_rule(r, rs.width) + "\n" for r in rs)
