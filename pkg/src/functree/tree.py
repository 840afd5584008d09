"""Dependency tree of function units.

Nodes are keyed by function name (names are unique within a tree: ancestor
collisions are rejected as circular, other collisions dedup to the existing
node). Children edges may share nodes across subtrees, so the structure is a
rooted DAG; "tree" follows the divide process that grows it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import CircularReference, DepthExceeded
from .funcs import FunctionUnit

DIVIDED = "divided"
CONQUERED = "conquered"

DEFAULT_MAX_DEPTH = 6


@dataclass
class FunctionTree:
    root_id: str
    nodes: dict[str, FunctionUnit] = field(default_factory=dict)
    children: dict[str, list[str]] = field(default_factory=dict)
    status: dict[str, str] = field(default_factory=dict)
    parent: dict[str, str | None] = field(default_factory=dict)
    depth: dict[str, int] = field(default_factory=dict)
    max_depth: int = DEFAULT_MAX_DEPTH

    @classmethod
    def new(cls, root: FunctionUnit, max_depth: int = DEFAULT_MAX_DEPTH) -> "FunctionTree":
        tree = cls(root_id=root.name, max_depth=max_depth)
        tree.nodes[root.name] = root
        tree.children[root.name] = []
        tree.parent[root.name] = None
        tree.depth[root.name] = 1
        return tree

    def ancestors(self, node_id: str) -> list[str]:
        """Primary-parent chain from ``node_id``'s parent up to the root."""
        chain = []
        cur = self.parent.get(node_id)
        while cur is not None:
            chain.append(cur)
            cur = self.parent.get(cur)
        return chain

    def _reachable(self, start: str) -> set[str]:
        seen: set[str] = set()
        stack = [start]
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(self.children.get(cur, ()))
        return seen

    def add_child(self, parent_id: str, unit: FunctionUnit) -> str:
        """Attach ``unit`` under ``parent_id`` and return its node id.

        A unit named like an ancestor (or like any node that can already reach
        the parent) is rejected as circular. A unit named like an existing
        non-ancestor node dedups to that node: an edge is added, no new node.
        """
        if parent_id not in self.nodes:
            raise KeyError(f"unknown parent node {parent_id!r}")
        if unit.name == parent_id or unit.name in self.ancestors(parent_id):
            raise CircularReference(f"{unit.name!r} is an ancestor of {parent_id!r}")
        if unit.name in self.nodes:
            if parent_id in self._reachable(unit.name):
                raise CircularReference(f"edge {parent_id!r} -> {unit.name!r} closes a cycle")
            if unit.name not in self.children[parent_id]:
                self.children[parent_id].append(unit.name)
            return unit.name
        if self.depth[parent_id] >= self.max_depth:
            raise DepthExceeded(f"parent {parent_id!r} is at the depth limit {self.max_depth}")
        self.nodes[unit.name] = unit
        self.children[unit.name] = []
        self.children[parent_id].append(unit.name)
        self.parent[unit.name] = parent_id
        self.depth[unit.name] = self.depth[parent_id] + 1
        return unit.name

    def set_unit(self, node_id: str, unit: FunctionUnit) -> None:
        if unit.name != node_id:
            raise ValueError(f"unit name {unit.name!r} does not match node {node_id!r}")
        self.nodes[node_id] = unit

    def mark(self, node_id: str, state: str) -> None:
        if state not in (DIVIDED, CONQUERED):
            raise ValueError(f"unknown status {state!r}")
        self.status[node_id] = state

    def postorder(self, start: str | None = None) -> list[str]:
        """Children-before-parents order; shared nodes appear once."""
        order: list[str] = []
        seen: set[str] = set()

        def visit(node_id: str) -> None:
            if node_id in seen:
                return
            seen.add(node_id)
            for child in self.children.get(node_id, ()):
                visit(child)
            order.append(node_id)

        visit(start or self.root_id)
        return order

    def render_context(self, focus: str, mode: str) -> str:
        """Source text for prompts and outputs.

        divide-context: ancestors' current code, focus as a stub.
        conquer-context: conquered descendants of focus, focus as a stub.
        final-program: whole tree, children before parents, focus ignored.
        """
        if focus not in self.nodes:
            raise KeyError(f"unknown node {focus!r}")
        if mode == "divide-context":
            ids = list(reversed(self.ancestors(focus)))
            parts = [self.nodes[i].render() for i in ids]
            parts.append(self.nodes[focus].render(as_stub=True))
            imports = self._imports(ids + [focus])
        elif mode == "conquer-context":
            ids = [i for i in self.postorder(focus) if i != focus and self.status.get(i) == CONQUERED]
            parts = [self.nodes[i].render() for i in ids]
            parts.append(self.nodes[focus].render(as_stub=True))
            imports = self._imports(ids + [focus])
        elif mode == "final-program":
            ids = self.postorder()
            parts = [self.nodes[i].render() for i in ids]
            imports = self._imports(ids)
        else:
            raise ValueError(f"unknown render mode {mode!r}")
        return "\n\n".join(imports + parts) if imports else "\n\n".join(parts)

    def render_standalone(self, focus: str, unit: FunctionUnit) -> str:
        """Runnable program: conquered descendants of ``focus`` plus ``unit``
        in place of the focus node (used to build candidate programs)."""
        ids = [
            i
            for i in self.postorder(focus)
            if i != focus and self.status.get(i) == CONQUERED
        ]
        seen: set[str] = set()
        imports: list[str] = []
        for imp_list in [self.nodes[i].imports for i in ids] + [unit.imports]:
            for imp in imp_list:
                if imp not in seen:
                    seen.add(imp)
                    imports.append(imp)
        parts = [self.nodes[i].render() for i in ids] + [unit.render()]
        if imports:
            parts.insert(0, "\n".join(imports))
        return "\n\n".join(parts)

    def _imports(self, ids: list[str]) -> list[str]:
        seen: set[str] = set()
        ordered: list[str] = []
        for node_id in ids:
            for imp in self.nodes[node_id].imports:
                if imp not in seen:
                    seen.add(imp)
                    ordered.append(imp)
        return ["\n".join(ordered)] if ordered else []

    def to_json(self) -> dict:
        return {
            "root": self.root_id,
            "nodes": {name: unit.to_json() for name, unit in self.nodes.items()},
            "edges": {name: list(kids) for name, kids in self.children.items()},
            "status": dict(self.status),
        }

    @classmethod
    def from_json(cls, doc: dict, max_depth: int = DEFAULT_MAX_DEPTH) -> "FunctionTree":
        tree = cls(root_id=doc["root"], max_depth=max_depth)
        tree.nodes = {name: FunctionUnit.from_json(u) for name, u in doc["nodes"].items()}
        tree.children = {name: list(kids) for name, kids in doc["edges"].items()}
        tree.status = dict(doc["status"])
        tree.parent[tree.root_id] = None
        tree.depth[tree.root_id] = 1
        stack = [tree.root_id]
        while stack:
            cur = stack.pop()
            for child in tree.children.get(cur, ()):
                if child not in tree.parent:
                    tree.parent[child] = cur
                    tree.depth[child] = tree.depth[cur] + 1
                    stack.append(child)
        return tree

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)
