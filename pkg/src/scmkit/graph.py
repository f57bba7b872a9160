"""Acyclic directed mixed graphs and the graphical criteria built on them.

Directed edges carry causal influence.  A bidirected edge stands for an
unnamed exogenous cause shared by its two endpoints, so d-separation treats
``A <-> B`` exactly like ``A <- H -> B`` for a hidden ``H`` that can never be
conditioned on.

Graphs are immutable after construction and every function in this module is
pure, so instances can be shared freely across threads.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

__all__ = [
    "Admg",
    "CiStatement",
    "GraphError",
    "CycleError",
    "UnknownVariable",
    "parse_graph",
    "serialize_graph",
    "d_separated",
    "c_components",
    "testable_implications",
]

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class GraphError(ValueError):
    """Malformed graph structure or graph file."""


class CycleError(GraphError):
    """The directed part of the graph contains a cycle."""

    def __init__(self, cycle: list[str]):
        self.cycle = list(cycle)
        super().__init__("cycle detected: " + " -> ".join(self.cycle))


class UnknownVariable(GraphError):
    """A referenced variable is not a node of the graph."""


class Admg:
    """Acyclic directed mixed graph over named nodes.

    Parameters
    ----------
    nodes:
        Iterable of node names (identifiers).
    directed:
        Iterable of ``(parent, child)`` pairs.
    bidirected:
        Iterable of unordered pairs; each pair is stored once, canonically
        sorted.
    """

    __slots__ = ("nodes", "directed", "bidirected", "__dict__")

    def __init__(
        self,
        nodes: Iterable[str],
        directed: Iterable[tuple[str, str]] = (),
        bidirected: Iterable[tuple[str, str]] = (),
    ):
        self.nodes: frozenset[str] = frozenset(nodes)
        self.directed: frozenset[tuple[str, str]] = frozenset(
            (a, b) for a, b in directed
        )
        self.bidirected: frozenset[tuple[str, str]] = frozenset(
            tuple(sorted((a, b))) for a, b in bidirected
        )
        self._validate()

    def _validate(self) -> None:
        for name in self.nodes:
            if not _NAME_RE.fullmatch(name):
                raise GraphError(f"invalid node name: {name!r}")
        for a, b in itertools.chain(self.directed, self.bidirected):
            if a == b:
                raise GraphError(f"self-loop on {a}")
            for end in (a, b):
                if end not in self.nodes:
                    raise GraphError(f"undeclared endpoint: {end}")
        cycle = self._find_cycle()
        if cycle is not None:
            raise CycleError(cycle)

    def _find_cycle(self) -> list[str] | None:
        color: dict[str, int] = {}  # 0 visiting, 1 done
        stack_path: list[str] = []

        def visit(v: str) -> list[str] | None:
            color[v] = 0
            stack_path.append(v)
            for c in sorted(self.children(v)):
                if color.get(c) == 0:
                    return stack_path[stack_path.index(c):] + [c]
                if c not in color:
                    found = visit(c)
                    if found:
                        return found
            stack_path.pop()
            color[v] = 1
            return None

        for v in sorted(self.nodes):
            if v not in color:
                found = visit(v)
                if found:
                    return found
        return None

    # --- basic structure -------------------------------------------------

    @cached_property
    def _parents(self) -> dict[str, frozenset[str]]:
        out: dict[str, set[str]] = {v: set() for v in self.nodes}
        for a, b in self.directed:
            out[b].add(a)
        return {v: frozenset(s) for v, s in out.items()}

    @cached_property
    def _children(self) -> dict[str, frozenset[str]]:
        out: dict[str, set[str]] = {v: set() for v in self.nodes}
        for a, b in self.directed:
            out[a].add(b)
        return {v: frozenset(s) for v, s in out.items()}

    @cached_property
    def _siblings(self) -> dict[str, frozenset[str]]:
        out: dict[str, set[str]] = {v: set() for v in self.nodes}
        for a, b in self.bidirected:
            out[a].add(b)
            out[b].add(a)
        return {v: frozenset(s) for v, s in out.items()}

    def parents(self, v: str) -> frozenset[str]:
        self._check(v)
        return self._parents[v]

    def children(self, v: str) -> frozenset[str]:
        self._check(v)
        return self._children[v]

    def siblings(self, v: str) -> frozenset[str]:
        """Nodes joined to ``v`` by a bidirected edge."""
        self._check(v)
        return self._siblings[v]

    def adjacent(self, u: str, v: str) -> bool:
        """True if any edge (directed either way, or bidirected) joins u, v."""
        self._check(u)
        self._check(v)
        return (
            (u, v) in self.directed
            or (v, u) in self.directed
            or tuple(sorted((u, v))) in self.bidirected
        )

    def _check(self, v: str) -> None:
        if v not in self.nodes:
            raise UnknownVariable(f"unknown variable: {v}")

    def ancestors(self, sources: Iterable[str]) -> frozenset[str]:
        """All nodes with a directed path into ``sources``, sources included."""
        frontier = list(sources)
        for v in frontier:
            self._check(v)
        seen = set(frontier)
        while frontier:
            v = frontier.pop()
            for p in self._parents[v]:
                if p not in seen:
                    seen.add(p)
                    frontier.append(p)
        return frozenset(seen)

    def descendants(self, sources: Iterable[str]) -> frozenset[str]:
        """All nodes reachable from ``sources`` by directed paths, sources included."""
        frontier = list(sources)
        for v in frontier:
            self._check(v)
        seen = set(frontier)
        while frontier:
            v = frontier.pop()
            for c in self._children[v]:
                if c not in seen:
                    seen.add(c)
                    frontier.append(c)
        return frozenset(seen)

    def topological_order(self) -> tuple[str, ...]:
        """Topological order of the directed part, lexicographic tie-break."""
        indeg = {v: len(self._parents[v]) for v in self.nodes}
        ready = sorted(v for v, d in indeg.items() if d == 0)
        order: list[str] = []
        import heapq

        heapq.heapify(ready)
        while ready:
            v = heapq.heappop(ready)
            order.append(v)
            for c in self._children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        return tuple(order)

    # --- derived graphs ---------------------------------------------------

    def induced(self, keep: Iterable[str]) -> "Admg":
        keep = frozenset(keep)
        for v in keep:
            self._check(v)
        return Admg(
            keep,
            ((a, b) for a, b in self.directed if a in keep and b in keep),
            ((a, b) for a, b in self.bidirected if a in keep and b in keep),
        )

    def without_incoming(self, xs: Iterable[str]) -> "Admg":
        """Drop every edge with an arrowhead at a member of ``xs``."""
        xs = frozenset(xs)
        return Admg(
            self.nodes,
            ((a, b) for a, b in self.directed if b not in xs),
            ((a, b) for a, b in self.bidirected if a not in xs and b not in xs),
        )

    def without_outgoing(self, xs: Iterable[str]) -> "Admg":
        """Drop every directed edge leaving a member of ``xs``."""
        xs = frozenset(xs)
        return Admg(
            self.nodes,
            ((a, b) for a, b in self.directed if a not in xs),
            self.bidirected,
        )

    # --- dunder ------------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Admg):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.directed == other.directed
            and self.bidirected == other.bidirected
        )

    def __hash__(self) -> int:
        return hash((self.nodes, self.directed, self.bidirected))

    def __repr__(self) -> str:
        return (
            f"Admg(nodes={sorted(self.nodes)}, directed={sorted(self.directed)}, "
            f"bidirected={sorted(self.bidirected)})"
        )


@dataclass(frozen=True)
class CiStatement:
    """A conditional-independence statement: left independent of right given `given`."""

    left: frozenset[str]
    right: frozenset[str]
    given: frozenset[str]

    def __post_init__(self):
        if not self.left or not self.right:
            raise GraphError("left and right sides must be nonempty")
        if self.left & self.right or self.left & self.given or self.right & self.given:
            raise GraphError("left/right/given must be pairwise disjoint")

    def render(self) -> str:
        lhs = ", ".join(sorted(self.left))
        rhs = ", ".join(sorted(self.right))
        if self.given:
            return f"{lhs} _||_ {rhs} | " + ", ".join(sorted(self.given))
        return f"{lhs} _||_ {rhs}"


# --- file format -----------------------------------------------------------


def parse_graph(text: str) -> Admg:
    """Parse the line-based graph format.

    ``#`` starts a comment, ``var NAME`` declares a node, ``A -> B`` adds a
    directed edge and ``A <-> B`` a bidirected one.  Declarations may appear
    in any order; every edge endpoint must be declared somewhere in the file.
    """
    declared: dict[str, int] = {}
    directed: list[tuple[str, str]] = []
    bidirected: list[tuple[str, str]] = []
    edge_lines: list[tuple[int, str, str]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        kind, payload = _scan_graph_line(line, lineno)
        if kind == "var":
            name = payload[0]
            if name in declared:
                raise GraphError(
                    f"line {lineno}: duplicate declaration of {name}"
                    f" (first declared on line {declared[name]})"
                )
            declared[name] = lineno
        else:
            a, op, b = payload
            if op == "->":
                directed.append((a, b))
            else:
                bidirected.append((a, b))
            edge_lines.append((lineno, a, b))

    for lineno, a, b in edge_lines:
        for end in (a, b):
            if end not in declared:
                raise GraphError(f"line {lineno}: undeclared endpoint: {end}")
    return Admg(declared, directed, bidirected)


def _scan_graph_line(line: str, lineno: int) -> tuple[str, tuple[str, ...]]:
    pos = 0

    def err(msg: str) -> GraphError:
        return GraphError(f"line {lineno}, column {pos + 1}: {msg}")

    def skip_ws():
        nonlocal pos
        while pos < len(line) and line[pos].isspace():
            pos += 1

    def ident() -> str:
        nonlocal pos
        m = _NAME_RE.match(line, pos)
        if not m:
            raise err("expected a name")
        pos = m.end()
        return m.group()

    skip_ws()
    first = ident()
    skip_ws()
    if first == "var" and pos < len(line) and _NAME_RE.match(line, pos):
        name = ident()
        skip_ws()
        if pos != len(line):
            raise err("unexpected text after declaration")
        return "var", (name,)
    if line.startswith("<->", pos):
        op = "<->"
        pos += 3
    elif line.startswith("->", pos):
        op = "->"
        pos += 2
    else:
        raise err("expected '->' or '<->'")
    skip_ws()
    second = ident()
    skip_ws()
    if pos != len(line):
        raise err("unexpected text after edge")
    return "edge", (first, op, second)


def serialize_graph(g: Admg) -> str:
    """Render a graph in the file format; ``parse_graph`` round-trips it."""
    lines = [f"var {v}" for v in sorted(g.nodes)]
    lines += [f"{a} -> {b}" for a, b in sorted(g.directed)]
    lines += [f"{a} <-> {b}" for a, b in sorted(g.bidirected)]
    return "\n".join(lines) + "\n"


# --- d-separation ----------------------------------------------------------


def _augmented(g: Admg) -> tuple[dict[str, list[str]], dict[str, list[str]]]:
    """Parent/child maps with one hidden root per bidirected edge."""
    parents: dict[str, list[str]] = {v: sorted(g.parents(v)) for v in g.nodes}
    children: dict[str, list[str]] = {v: sorted(g.children(v)) for v in g.nodes}
    for i, (a, b) in enumerate(sorted(g.bidirected)):
        h = f"\x00h{i}"  # not a legal identifier, cannot clash with node names
        parents[h] = []
        children[h] = [a, b]
        parents[a].append(h)
        parents[b].append(h)
    return parents, children


def d_separated(
    g: Admg,
    a: Iterable[str],
    b: Iterable[str],
    z: Iterable[str] = (),
) -> bool:
    """Decide whether node sets ``a`` and ``b`` are d-separated by ``z``.

    Runs the linear-time ball-style reachability over the graph with each
    bidirected edge expanded into a hidden common cause.  The exponential
    path-enumeration oracle lives in the test suite only.
    """
    a, b, z = frozenset(a), frozenset(b), frozenset(z)
    for v in itertools.chain(a, b, z):
        g._check(v)
    if a & b or a & z or b & z:
        raise GraphError("a, b, z must be pairwise disjoint")
    if not a or not b:
        return True

    parents, children = _augmented(g)

    # ancestors of z (z included), over the augmented graph
    anz = set(z)
    frontier = list(z)
    while frontier:
        v = frontier.pop()
        for p in parents[v]:
            if p not in anz:
                anz.add(p)
                frontier.append(p)

    # (node, direction) traversal: "up" entered from a child, "down" from a parent
    visited: set[tuple[str, bool]] = set()
    stack: list[tuple[str, bool]] = [(s, True) for s in a]
    while stack:
        node, up = stack.pop()
        if (node, up) in visited:
            continue
        visited.add((node, up))
        if node in b:
            return False
        if up:
            if node not in z:
                stack.extend((p, True) for p in parents[node])
                stack.extend((c, False) for c in children[node])
        else:
            if node not in z:
                stack.extend((c, False) for c in children[node])
            if node in anz:
                stack.extend((p, True) for p in parents[node])
    return True


# --- c-components ------------------------------------------------------------


def c_components(g: Admg) -> tuple[frozenset[str], ...]:
    """Partition of the nodes into connected components of the bidirected part."""
    unseen = set(g.nodes)
    comps: list[frozenset[str]] = []
    while unseen:
        start = min(unseen)
        comp = {start}
        frontier = [start]
        while frontier:
            v = frontier.pop()
            for s in g.siblings(v):
                if s not in comp:
                    comp.add(s)
                    frontier.append(s)
        unseen -= comp
        comps.append(frozenset(comp))
    return tuple(sorted(comps, key=min))


# --- testable implications ----------------------------------------------------


def testable_implications(g: Admg) -> list[CiStatement]:
    """Pairwise basis of conditional independencies implied by the graph.

    For every nonadjacent pair a separating set is searched among subsets of
    the pair's ancestors, smallest first and lexicographic within a size; the
    first set found is emitted.  Pairs with no such separator are skipped.
    """
    out: list[CiStatement] = []
    for u, v in itertools.combinations(sorted(g.nodes), 2):
        if g.adjacent(u, v):
            continue
        candidates = sorted((g.ancestors([u]) | g.ancestors([v])) - {u, v})
        found: frozenset[str] | None = None
        for size in range(len(candidates) + 1):
            for sub in itertools.combinations(candidates, size):
                if d_separated(g, {u}, {v}, sub):
                    found = frozenset(sub)
                    break
            if found is not None:
                break
        if found is not None:
            out.append(
                CiStatement(left=frozenset({u}), right=frozenset({v}), given=found)
            )
    return out
