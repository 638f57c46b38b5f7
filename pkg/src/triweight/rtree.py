"""Incremental bounding-box index for pair discovery.

A small in-memory R-tree (Guttman-style, quadratic split) keyed by
integer ids. The packing reasoner keeps one box per circle, moves only
the circles that moved, and asks for all intersecting pairs each
iteration; everything here is built around making those three calls
cheap at a few thousand entries.

Overlap uses closed intervals: boxes sharing only a boundary point
count as intersecting. Mutation is single-writer (the global-reasoner
section); reads between mutations are safe from any thread.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnknownId

MIN_FILL = 2
MAX_FILL = 8


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box, min corner through max corner."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self) -> None:
        if not (self.min_x <= self.max_x and self.min_y <= self.max_y):
            raise ValueError(f"box has min > max: {self}")

    def intersects(self, other: "Aabb") -> bool:
        return (
            self.min_x <= other.max_x
            and other.min_x <= self.max_x
            and self.min_y <= other.max_y
            and other.min_y <= self.max_y
        )

    def contains(self, other: "Aabb") -> bool:
        return (
            self.min_x <= other.min_x
            and self.min_y <= other.min_y
            and self.max_x >= other.max_x
            and self.max_y >= other.max_y
        )

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(
            min(self.min_x, other.min_x),
            min(self.min_y, other.min_y),
            max(self.max_x, other.max_x),
            max(self.max_y, other.max_y),
        )

    @property
    def area(self) -> float:
        return (self.max_x - self.min_x) * (self.max_y - self.min_y)


def _union_all(boxes: list[Aabb]) -> Aabb:
    out = boxes[0]
    for b in boxes[1:]:
        out = out.union(b)
    return out


class _Node:
    __slots__ = ("leaf", "entries", "parent", "box")

    def __init__(self, leaf: bool):
        self.leaf = leaf
        # leaf: list[(Aabb, id)]; internal: list[(Aabb, _Node)]
        self.entries: list[tuple[Aabb, object]] = []
        self.parent: _Node | None = None
        self.box: Aabb | None = None

    def recompute_box(self) -> None:
        self.box = _union_all([b for b, _ in self.entries]) if self.entries else None


class RTree:
    """Mutable id -> box index with all-pairs intersection queries."""

    def __init__(self) -> None:
        self._root = _Node(leaf=True)
        self._leaf_of: dict[int, _Node] = {}
        self._box_of: dict[int, Aabb] = {}

    def __len__(self) -> int:
        return len(self._box_of)

    def __contains__(self, eid: int) -> bool:
        return eid in self._box_of

    def box_of(self, eid: int) -> Aabb:
        try:
            return self._box_of[eid]
        except KeyError:
            raise UnknownId(f"id {eid} not in index") from None

    # -- mutation ----------------------------------------------------------

    def upsert(self, eid: int, box: Aabb) -> None:
        """Insert or move an entry; present ids keep exactly one box."""
        leaf = self._leaf_of.get(eid)
        if leaf is not None:
            old = self._box_of[eid]
            if old == box:
                return
            # fast path: the leaf's region still covers the new box, so
            # swapping the entry in place cannot break containment above
            if leaf.box is not None and leaf.box.contains(box):
                for i, (_, val) in enumerate(leaf.entries):
                    if val == eid:
                        leaf.entries[i] = (box, eid)
                        break
                self._box_of[eid] = box
                self._tighten_upward(leaf)
                return
            self.remove(eid)
        self._insert(eid, box)

    def remove(self, eid: int) -> None:
        leaf = self._leaf_of.get(eid)
        if leaf is None:
            raise UnknownId(f"id {eid} not in index")
        leaf.entries = [(b, v) for b, v in leaf.entries if v != eid]
        del self._leaf_of[eid]
        del self._box_of[eid]
        self._condense(leaf)

    # -- queries -----------------------------------------------------------

    def query(self, box: Aabb) -> list[int]:
        """Ids whose boxes intersect the probe box."""
        out: list[int] = []
        if self._root.box is None:
            return out
        stack = [self._root]
        while stack:
            node = stack.pop()
            for b, val in node.entries:
                if b.intersects(box):
                    if node.leaf:
                        out.append(val)  # type: ignore[arg-type]
                    else:
                        stack.append(val)  # type: ignore[arg-type]
        return out

    def query_pairs(self) -> set[tuple[int, int]]:
        """Every unordered id pair whose boxes intersect."""
        out: set[tuple[int, int]] = set()
        if self._root.box is None:
            return out
        self._self_join(self._root, out)
        return out

    def _self_join(self, node: _Node, out: set[tuple[int, int]]) -> None:
        n = len(node.entries)
        for i in range(n):
            bi, vi = node.entries[i]
            for j in range(i + 1, n):
                bj, vj = node.entries[j]
                if bi.intersects(bj):
                    if node.leaf:
                        a, b = vi, vj  # type: ignore[assignment]
                        out.add((a, b) if a < b else (b, a))
                    else:
                        self._cross_join(vi, vj, out)  # type: ignore[arg-type]
            if not node.leaf:
                self._self_join(vi, out)  # type: ignore[arg-type]

    def _cross_join(self, na: _Node, nb: _Node, out: set[tuple[int, int]]) -> None:
        for ba, va in na.entries:
            for bb, vb in nb.entries:
                if not ba.intersects(bb):
                    continue
                if na.leaf and nb.leaf:
                    a, b = va, vb  # type: ignore[assignment]
                    out.add((a, b) if a < b else (b, a))
                elif na.leaf:
                    self._cross_join_entry(va, ba, vb, out)  # type: ignore[arg-type]
                elif nb.leaf:
                    self._cross_join_entry(vb, bb, va, out)  # type: ignore[arg-type]
                else:
                    self._cross_join(va, vb, out)  # type: ignore[arg-type]

    def _cross_join_entry(
        self, eid: object, ebox: Aabb, node: _Node, out: set[tuple[int, int]]
    ) -> None:
        for b, val in node.entries:
            if not b.intersects(ebox):
                continue
            if node.leaf:
                a, c = eid, val  # type: ignore[assignment]
                out.add((a, c) if a < c else (c, a))  # type: ignore[operator]
            else:
                self._cross_join_entry(eid, ebox, val, out)  # type: ignore[arg-type]

    # -- internals ---------------------------------------------------------

    def _insert(self, eid: int, box: Aabb) -> None:
        leaf = self._choose_leaf(box)
        leaf.entries.append((box, eid))
        self._leaf_of[eid] = leaf
        self._box_of[eid] = box
        self._split_upward(leaf)

    def _choose_leaf(self, box: Aabb) -> _Node:
        node = self._root
        while not node.leaf:
            best = None
            best_key = None
            for b, child in node.entries:
                enlargement = b.union(box).area - b.area
                key = (enlargement, b.area)
                if best_key is None or key < best_key:
                    best_key = key
                    best = child
            node = best  # type: ignore[assignment]
        return node

    def _split_upward(self, node: _Node) -> None:
        while True:
            if len(node.entries) <= MAX_FILL:
                node.recompute_box()
                parent = node.parent
                while parent is not None:
                    self._refresh_child_box(parent, node)
                    node = parent
                    parent = node.parent
                return
            sibling = self._split(node)
            parent = node.parent
            if parent is None:
                new_root = _Node(leaf=False)
                node.parent = new_root
                sibling.parent = new_root
                new_root.entries = [(node.box, node), (sibling.box, sibling)]
                new_root.recompute_box()
                self._root = new_root
                return
            self._refresh_child_box(parent, node)
            parent.entries.append((sibling.box, sibling))
            sibling.parent = parent
            node = parent

    def _refresh_child_box(self, parent: _Node, child: _Node) -> None:
        for i, (_, val) in enumerate(parent.entries):
            if val is child:
                parent.entries[i] = (child.box, child)
                break
        parent.recompute_box()

    def _split(self, node: _Node) -> _Node:
        """Quadratic split: node keeps one group, the returned sibling the other."""
        entries = node.entries
        worst = None
        seeds = (0, 1)
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                waste = (
                    entries[i][0].union(entries[j][0]).area
                    - entries[i][0].area
                    - entries[j][0].area
                )
                if worst is None or waste > worst:
                    worst = waste
                    seeds = (i, j)
        g1 = [entries[seeds[0]]]
        g2 = [entries[seeds[1]]]
        b1 = g1[0][0]
        b2 = g2[0][0]
        rest = [e for k, e in enumerate(entries) if k not in seeds]
        while rest:
            if len(g1) + len(rest) == MIN_FILL:
                g1.extend(rest)
                rest = []
                break
            if len(g2) + len(rest) == MIN_FILL:
                g2.extend(rest)
                rest = []
                break
            # pick the entry with the strongest preference for one group
            best_k = 0
            best_diff = -1.0
            for k, (b, _) in enumerate(rest):
                d1 = b1.union(b).area - b1.area
                d2 = b2.union(b).area - b2.area
                diff = abs(d1 - d2)
                if diff > best_diff:
                    best_diff = diff
                    best_k = k
            b, val = rest.pop(best_k)
            d1 = b1.union(b).area - b1.area
            d2 = b2.union(b).area - b2.area
            if (d1, b1.area, len(g1)) <= (d2, b2.area, len(g2)):
                g1.append((b, val))
                b1 = b1.union(b)
            else:
                g2.append((b, val))
                b2 = b2.union(b)
        node.entries = g1
        node.recompute_box()
        sibling = _Node(leaf=node.leaf)
        sibling.entries = g2
        sibling.recompute_box()
        for _, val in g2:
            if node.leaf:
                self._leaf_of[val] = sibling  # type: ignore[index]
            else:
                val.parent = sibling  # type: ignore[union-attr]
        return sibling

    def _tighten_upward(self, node: _Node) -> None:
        node.recompute_box()
        parent = node.parent
        while parent is not None:
            self._refresh_child_box(parent, node)
            node = parent
            parent = node.parent

    def _condense(self, leaf: _Node) -> None:
        orphans: list[tuple[Aabb, int]] = []
        node = leaf
        while node.parent is not None:
            parent = node.parent
            if len(node.entries) < MIN_FILL:
                parent.entries = [(b, v) for b, v in parent.entries if v is not node]
                self._collect_leaf_entries(node, orphans)
            else:
                node.recompute_box()
                self._refresh_child_box(parent, node)
            node = parent
        node.recompute_box()
        # shrink a root with a single internal child
        while not self._root.leaf and len(self._root.entries) == 1:
            child = self._root.entries[0][1]
            child.parent = None  # type: ignore[union-attr]
            self._root = child  # type: ignore[assignment]
        if not self._root.leaf and not self._root.entries:
            self._root = _Node(leaf=True)
        for box, eid in orphans:
            del self._leaf_of[eid]
            del self._box_of[eid]
        for box, eid in orphans:
            self._insert(eid, box)

    def _collect_leaf_entries(self, node: _Node, out: list[tuple[Aabb, int]]) -> None:
        if node.leaf:
            out.extend(node.entries)  # type: ignore[arg-type]
            return
        for _, child in node.entries:
            self._collect_leaf_entries(child, out)  # type: ignore[arg-type]

    # -- diagnostics -------------------------------------------------------

    def validate(self) -> list[str]:
        """Structural invariant walk; returns human-readable problems."""
        problems: list[str] = []
        seen: set[int] = set()

        def walk(node: _Node, depth: int) -> int:
            if node is not self._root and not (MIN_FILL <= len(node.entries) <= MAX_FILL):
                problems.append(f"node at depth {depth} has {len(node.entries)} entries")
            if node is self._root and len(node.entries) > MAX_FILL:
                problems.append(f"root has {len(node.entries)} entries")
            leaf_depth = -1
            for b, val in node.entries:
                if node.box is not None and not node.box.contains(b):
                    problems.append(f"node box does not contain entry at depth {depth}")
                if node.leaf:
                    if val in seen:
                        problems.append(f"duplicate id {val}")
                    seen.add(val)  # type: ignore[arg-type]
                    if self._leaf_of.get(val) is not node:
                        problems.append(f"leaf map stale for id {val}")
                    if self._box_of.get(val) != b:
                        problems.append(f"box map stale for id {val}")
                    leaf_depth = depth
                else:
                    if val.parent is not node:  # type: ignore[union-attr]
                        problems.append(f"parent link broken at depth {depth}")
                    d = walk(val, depth + 1)  # type: ignore[arg-type]
                    if leaf_depth == -1:
                        leaf_depth = d
                    elif d != leaf_depth:
                        problems.append("leaves at unequal depths")
            return leaf_depth if leaf_depth != -1 else depth

        walk(self._root, 0)
        if seen != set(self._box_of):
            problems.append("id set mismatch between tree and box map")
        return problems
