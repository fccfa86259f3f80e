"""Suffix-grouping hierarchy over observed contexts.

Level ``i`` of the tree holds one node per distinct length-``i`` suffix
``(v_i, ..., v_1)`` of the observed context tuples; the leaves (level L)
are exactly the distinct contexts, and every node aggregates the event
counts of the leaves below it.  Moving a node's whole context group at
once gives the clustering reliable statistics for contexts that are
individually rare.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from clusterlm.events import ContextTuple, EventTable


@dataclass
class TreeNode:
    key: ContextTuple
    level: int
    count: int = 0
    children: list["TreeNode"] = field(default_factory=list, repr=False)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def contexts(self) -> Iterator[ContextTuple]:
        """Leaf context tuples below this node, in child-key order."""
        if self.is_leaf:
            yield self.key
        else:
            for child in self.children:
                yield from child.contexts()

    @property
    def n_leaves(self) -> int:
        return 1 if self.is_leaf else sum(c.n_leaves for c in self.children)


@dataclass
class ContextTree:
    depth: int
    root: TreeNode
    levels: list[list[TreeNode]] = field(repr=False)

    def nodes_at_level(self, level: int) -> list[TreeNode]:
        if not 0 <= level <= self.depth:
            raise ValueError(f"level {level} outside [0, {self.depth}]")
        return self.levels[level]

    def dump(self) -> str:
        """Indented text rendering, for debugging."""
        out: list[str] = []

        def walk(node: TreeNode, indent: int):
            key = " ".join(str(v) for v in node.key) if node.key else "*"
            out.append(f"{'  ' * indent}({key}) n={node.count}")
            for child in node.children:
                walk(child, indent + 1)

        walk(self.root, 0)
        return "\n".join(out)


def build_suffix_tree(table: EventTable) -> ContextTree:
    """Group the table's contexts by shared suffixes of every length.

    The level-``i`` key of a context ``(v_L, ..., v_1)`` is its last
    ``i`` values.  Children are sorted by key, so construction and all
    traversals are deterministic.
    """
    if not table.counts:
        raise ValueError("empty event table")
    depth = table.spec.depth
    contexts = sorted(table.context_marginals)

    root = TreeNode(key=(), level=0)
    levels: list[list[TreeNode]] = [[root]]
    by_key: dict[ContextTuple, TreeNode] = {(): root}
    for lvl in range(1, depth + 1):
        level_nodes: list[TreeNode] = []
        seen: dict[ContextTuple, TreeNode] = {}
        for ctx in contexts:
            key = ctx[depth - lvl :]
            node = seen.get(key)
            if node is None:
                node = TreeNode(key=key, level=lvl)
                seen[key] = node
                by_key[key] = node
                parent = by_key[key[1:]]
                parent.children.append(node)
                level_nodes.append(node)
        level_nodes.sort(key=lambda n: n.key)
        levels.append(level_nodes)
    for level_nodes in levels:
        for node in level_nodes:
            node.children.sort(key=lambda n: n.key)

    for ctx in contexts:
        n = table.context_marginals[ctx]
        for lvl in range(depth + 1):
            by_key[ctx[depth - lvl :]].count += n
    return ContextTree(depth=depth, root=root, levels=levels)


def nodes_at_level(tree: ContextTree, level: int) -> list[TreeNode]:
    return tree.nodes_at_level(level)
