"""Multilayer online balanced tree.

Each layer is an AVL tree over pairwise-disjoint address ranges keyed by
range begin.  A node whose rule contains other rules carries those rules in
its own ``next_layer`` AVL tree, recursively, so a lookup walks at most one
root-to-node path per layer and descends only when it has already matched.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

from .prefix import NotFound, Prefix, PrefixError, Rule, check_width


@dataclass
class AccessCounter:
    node_visits: int = 0
    bucket_probes: int = 0

    @property
    def total(self) -> int:
        return self.node_visits + self.bucket_probes

    def reset(self) -> None:
        self.node_visits = 0
        self.bucket_probes = 0


class MobaNode:
    __slots__ = ("rule", "begin", "end", "left", "right", "height", "next_layer")

    def __init__(self, rule: Rule, width: int):
        self.rule = rule
        p = rule.prefix
        self.begin = p.bits
        self.end = p.bits + (1 << (width - p.length)) - 1
        self.left: Optional[MobaNode] = None
        self.right: Optional[MobaNode] = None
        self.height = 1
        self.next_layer: Optional[MobaNode] = None

    def __repr__(self) -> str:
        p = self.rule.prefix
        return f"MobaNode({p.bits}/{p.length}, [{self.begin}, {self.end}])"


# -- AVL primitives over one layer ------------------------------------------

def _h(node: Optional[MobaNode]) -> int:
    return node.height if node is not None else 0


def _fix(node: MobaNode) -> None:
    hl = node.left.height if node.left is not None else 0
    hr = node.right.height if node.right is not None else 0
    node.height = (hl if hl > hr else hr) + 1


def _rot_right(y: MobaNode) -> MobaNode:
    x = y.left
    y.left = x.right
    x.right = y
    _fix(y)
    _fix(x)
    return x


def _rot_left(x: MobaNode) -> MobaNode:
    y = x.right
    x.right = y.left
    y.left = x
    _fix(x)
    _fix(y)
    return y


def _rebalance(node: MobaNode) -> MobaNode:
    _fix(node)
    bf = _h(node.left) - _h(node.right)
    if bf > 1:
        if _h(node.left.left) < _h(node.left.right):
            node.left = _rot_left(node.left)
        return _rot_right(node)
    if bf < -1:
        if _h(node.right.right) < _h(node.right.left):
            node.right = _rot_right(node.right)
        return _rot_left(node)
    return node


def _layer_insert(root: Optional[MobaNode], new: MobaNode) -> MobaNode:
    """Insert ``new`` into a layer it is known to be disjoint from."""
    if root is None:
        new.left = new.right = None
        new.height = 1
        return new
    if new.begin < root.begin:
        root.left = _layer_insert(root.left, new)
    else:
        root.right = _layer_insert(root.right, new)
    return _rebalance(root)


def _pop_min(root: MobaNode) -> tuple[Optional[MobaNode], MobaNode]:
    if root.left is None:
        return root.right, root
    root.left, smallest = _pop_min(root.left)
    return _rebalance(root), smallest


def _layer_remove(root: Optional[MobaNode], begin: int) -> Optional[MobaNode]:
    """Unlink the node keyed ``begin`` from its layer (the node keeps its next layer)."""
    if root is None:
        raise KeyError(begin)
    if begin < root.begin:
        root.left = _layer_remove(root.left, begin)
    elif begin > root.begin:
        root.right = _layer_remove(root.right, begin)
    else:
        if root.left is None:
            return root.right
        if root.right is None:
            return root.left
        rest, succ = _pop_min(root.right)
        succ.right = rest
        succ.left = root.left
        return _rebalance(succ)
    return _rebalance(root)


def _build_balanced(nodes: list[MobaNode], lo: int = 0, hi: int | None = None) -> Optional[MobaNode]:
    if hi is None:
        hi = len(nodes)
    if lo >= hi:
        return None
    mid = (lo + hi) // 2
    node = nodes[mid]
    node.left = _build_balanced(nodes, lo, mid)
    node.right = _build_balanced(nodes, mid + 1, hi)
    _fix(node)
    return node


def iter_layer(root: Optional[MobaNode]) -> Iterator[MobaNode]:
    """In-order walk of a single layer (does not enter next layers)."""
    stack: list[MobaNode] = []
    node = root
    while stack or node is not None:
        while node is not None:
            stack.append(node)
            node = node.left
        node = stack.pop()
        nxt = node.right
        yield node
        node = nxt


def _collect_range(root: Optional[MobaNode], lo: int, hi: int, out: list[MobaNode]) -> None:
    if root is None:
        return
    if lo < root.begin:
        _collect_range(root.left, lo, hi, out)
    if lo <= root.begin <= hi:
        out.append(root)
    if root.begin < hi:
        _collect_range(root.right, lo, hi, out)


def layer_height(root: Optional[MobaNode]) -> int:
    return _h(root)


# -- the multilayer tree ----------------------------------------------------

class MobaTree:
    """One multilayer tree over rules of a fixed address width."""

    def __init__(self, width: int, rules=()):
        self.width = check_width(width)
        self.root: Optional[MobaNode] = None
        self.size = 0
        for r in rules:
            self.insert(r)

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"MobaTree(width={self.width}, size={self.size})"

    def lookup(self, ip: int, counter: AccessCounter | None = None) -> Optional[Rule]:
        return moba_lookup(self.root, ip, counter)

    def insert(self, rule: Rule) -> Optional[Rule]:
        """Add or replace ``rule``; returns the replaced rule for an equal prefix."""
        self._check(rule.prefix)
        self.root, old = _insert(self.root, MobaNode(rule, self.width))
        if old is None:
            self.size += 1
        return old

    def delete(self, prefix: Prefix) -> Rule:
        self._check(prefix)
        self.root, node = _delete(self.root, prefix, self.width)
        if node is None:
            raise NotFound(prefix)
        self.size -= 1
        return node.rule

    def find(self, prefix: Prefix) -> Optional[MobaNode]:
        shift = self.width - prefix.length
        node = self.root
        while node is not None:
            if prefix.bits < node.begin:
                node = node.left
            elif prefix.bits > node.end:
                node = node.right
            elif node.rule.prefix == prefix:
                return node
            elif node.rule.prefix.length < prefix.length:
                node = node.next_layer
            else:
                return None
        return None

    def rules(self) -> Iterator[Rule]:
        for node in iter_nodes(self.root):
            yield node.rule

    def validate(self) -> list[str]:
        return moba_validate(self)

    def _check(self, prefix: Prefix) -> None:
        try:
            prefix.validate(self.width)
        except PrefixError as exc:
            raise PrefixError(f"width mismatch for tree of width {self.width}: {exc}") from None


def moba_lookup(root: Optional[MobaNode], ip: int, counter: AccessCounter | None = None) -> Optional[Rule]:
    rule = None
    node = root
    visits = 0
    while node is not None:
        visits += 1
        if ip < node.begin:
            node = node.left
        elif ip > node.end:
            node = node.right
        else:
            rule = node.rule
            node = node.next_layer
    if counter is not None:
        counter.node_visits += visits
    return rule


def _insert(root: Optional[MobaNode], new: MobaNode) -> tuple[MobaNode, Optional[Rule]]:
    node = root
    while node is not None:
        if new.begin < node.begin:
            node = node.left
        elif new.begin > node.end:
            node = node.right
        else:
            break
    if node is not None:
        plen, nlen = new.rule.prefix.length, node.rule.prefix.length
        if plen == nlen:
            old = node.rule
            node.rule = new.rule
            return root, old
        if nlen < plen:
            # an existing rule covers the new one: it belongs one layer down
            node.next_layer, old = _insert(node.next_layer, new)
            return root, old
    # the new rule covers every node starting inside its range; those move
    # with their own sub-layers into the new node's next layer
    covered: list[MobaNode] = []
    _collect_range(root, new.begin, new.end, covered)
    for c in covered:
        root = _layer_remove(root, c.begin)
    if covered:
        new.next_layer = _build_balanced(covered)
    return _layer_insert(root, new), None


def _delete(root: Optional[MobaNode], prefix: Prefix, width: int) -> tuple[Optional[MobaNode], Optional[MobaNode]]:
    node = root
    while node is not None:
        if prefix.bits < node.begin:
            node = node.left
        elif prefix.bits > node.end:
            node = node.right
        elif node.rule.prefix == prefix:
            break
        elif node.rule.prefix.length < prefix.length:
            node.next_layer, found = _delete(node.next_layer, prefix, width)
            return root, found
        else:
            return root, None
    if node is None:
        return root, None
    root = _layer_remove(root, node.begin)
    orphans = list(iter_layer(node.next_layer))
    node.next_layer = None
    for child in orphans:
        root = _layer_insert(root, child)
    node.left = node.right = None
    return root, node


def iter_nodes(root: Optional[MobaNode]) -> Iterator[MobaNode]:
    """Every node of every layer below ``root``."""
    pending = [root] if root is not None else []
    while pending:
        for node in iter_layer(pending.pop()):
            yield node
            if node.next_layer is not None:
                pending.append(node.next_layer)


def iter_layers(root: Optional[MobaNode], depth: int = 1) -> Iterator[tuple[int, Optional[MobaNode], MobaNode]]:
    """Yield ``(depth, owner, layer_root)`` for every layer tree; owner is None at the top."""
    if root is None:
        return
    pending: list[tuple[int, Optional[MobaNode], MobaNode]] = [(depth, None, root)]
    while pending:
        d, owner, layer = pending.pop()
        yield d, owner, layer
        for node in iter_layer(layer):
            if node.next_layer is not None:
                pending.append((d + 1, node, node.next_layer))


def moba_validate(tree: MobaTree) -> list[str]:
    """Check ordering, disjointness, containment, balance and size; returns violations."""
    problems: list[str] = []
    width = tree.width
    seen = 0

    def check_subtree(node: MobaNode, lo: int, hi: int, owner: Optional[MobaNode]) -> int:
        nonlocal seen
        seen += 1
        p = node.rule.prefix
        expect_end = p.bits + (1 << (width - p.length)) - 1
        if node.begin != p.bits or node.end != expect_end:
            problems.append(f"{node!r}: cached range does not match prefix")
        if node.begin < lo or node.end > hi:
            problems.append(f"{node!r}: ordering violated, range outside ({lo}, {hi})")
        if owner is not None:
            if not (owner.begin <= node.begin and node.end <= owner.end) or (
                    p.length <= owner.rule.prefix.length):
                problems.append(f"{node!r}: not strictly contained by layer owner {owner!r}")
        hl = check_subtree(node.left, lo, node.begin - 1, owner) if node.left is not None else 0
        hr = check_subtree(node.right, node.end + 1, hi, owner) if node.right is not None else 0
        if node.height != max(hl, hr) + 1:
            problems.append(f"{node!r}: stored height {node.height}, actual {max(hl, hr) + 1}")
        if abs(hl - hr) > 1:
            problems.append(f"{node!r}: unbalanced, left height {hl} vs right {hr}")
        if node.next_layer is not None:
            check_subtree(node.next_layer, node.begin, node.end, node)
        return max(hl, hr) + 1

    if tree.root is not None:
        check_subtree(tree.root, 0, (1 << width) - 1, None)
    if seen != tree.size:
        problems.append(f"size is {tree.size} but {seen} nodes are reachable")
    return problems
