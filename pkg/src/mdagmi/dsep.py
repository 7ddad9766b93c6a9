"""d-separation over an :class:`~mdagmi.graph.MDag`.

The boolean query is a reachability search over (node, direction) states
(the "Bayes-ball" formulation).  Path witnesses come from a separate
bounded depth-first enumerator, so truncating witnesses never changes a
verdict.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .graph import MDag, Node

DEFAULT_MAX_PATHS = 64

_UP, _DOWN = 0, 1  # arriving from a child / from a parent


def _node_set(g: MDag, refs) -> frozenset[Node]:
    if isinstance(refs, (Node, str)):
        refs = [refs]
    return frozenset(g.resolve(r) for r in refs)


def _conditioned_ancestry(g: MDag, c: frozenset[Node]) -> frozenset[Node]:
    out = set(c)
    for n in c:
        out |= g.ancestors(n)
    return frozenset(out)


def reachable(g: MDag, sources, given=()) -> frozenset[Node]:
    """Nodes d-connected to any of ``sources`` given ``given``.

    Conditioned nodes are never reported as reachable, and sources that
    are themselves conditioned start no trail.
    """
    c = _node_set(g, given)
    starts = _node_set(g, sources) - c
    anc = _conditioned_ancestry(g, c)
    visited: set[tuple[Node, int]] = set()
    found: set[Node] = set()
    queue = deque((s, _UP) for s in starts)
    while queue:
        node, direction = queue.popleft()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in c:
            found.add(node)
        if direction == _UP and node not in c:
            queue.extend((p, _UP) for p in g._parents[node])
            queue.extend((ch, _DOWN) for ch in g._children[node])
        elif direction == _DOWN:
            if node not in c:
                queue.extend((ch, _DOWN) for ch in g._children[node])
            if node in anc:
                queue.extend((p, _UP) for p in g._parents[node])
    return frozenset(found - starts)


def d_separated(g: MDag, a, b, c=()) -> bool:
    """True iff every path between a node of ``a`` and a node of ``b`` is blocked by ``c``.

    A node that is in ``c`` is treated as separated from everything.

    Raises
    ------
    KeyError
        If any node is not in ``g``.
    ValueError
        If ``a`` and ``b`` overlap.
    """
    a_set, b_set = _node_set(g, a), _node_set(g, b)
    c_set = _node_set(g, c)
    if a_set & b_set:
        raise ValueError("a and b must be disjoint")
    return not (reachable(g, a_set, c_set) & b_set)


# -- witnesses ---------------------------------------------------------------


@dataclass(frozen=True)
class Step:
    """One inner node of a path with its local configuration."""

    node: Node
    kind: str  # "chain", "fork" or "collider"
    open: bool


@dataclass(frozen=True)
class PathWitness:
    """A simple path with per-inner-node blocking annotations.

    ``arrows[i]`` is ``"->"`` when the edge points from ``nodes[i]`` to
    ``nodes[i + 1]`` and ``"<-"`` otherwise.
    """

    nodes: tuple[Node, ...]
    arrows: tuple[str, ...]
    steps: tuple[Step, ...]

    @property
    def open(self) -> bool:
        return all(s.open for s in self.steps)

    def __len__(self) -> int:
        return len(self.arrows)

    def render(self) -> str:
        parts = [str(self.nodes[0])]
        for arrow, node in zip(self.arrows, self.nodes[1:]):
            parts.append(f" {arrow} {node}")
        return "".join(parts)

    def describe(self) -> str:
        """Path text followed by ``node: kind/state`` annotations."""
        notes = ", ".join(f"{s.node}: {s.kind}/{'open' if s.open else 'blocked'}" for s in self.steps)
        state = "open" if self.open else "blocked"
        return f"{self.render()} ({state})" + (f" [{notes}]" if notes else "")

    def to_dict(self) -> dict:
        return {
            "path": self.render(),
            "nodes": [str(n) for n in self.nodes],
            "edges": list(self.arrows),
            "inner": [{"node": str(s.node), "kind": s.kind, "open": s.open} for s in self.steps],
            "open": self.open,
        }


class WitnessList(list):
    """List of witnesses that records whether enumeration stopped early."""

    def __init__(self, items=(), truncated: bool = False):
        super().__init__(items)
        self.truncated = truncated


def _step(g: MDag, prev: Node, node: Node, nxt: Node, c: frozenset[Node], anc: frozenset[Node]) -> Step:
    into_from_prev = prev in g._parents[node]
    into_from_next = nxt in g._parents[node]
    if into_from_prev and into_from_next:
        return Step(node, "collider", node in anc)
    kind = "fork" if not into_from_prev and not into_from_next else "chain"
    return Step(node, kind, node not in c)


def _neighbours(g: MDag, node: Node) -> list[tuple[Node, str]]:
    out = [(ch, "->") for ch in g._children[node]] + [(p, "<-") for p in g._parents[node]]
    return sorted(out, key=lambda t: (t[0].sort_key, t[1]))


def _walk(g: MDag, a: Node, targets: frozenset[Node], c, anc, max_len: int | None):
    """Yield open simple paths from ``a`` to any target, depth first, in a fixed order."""
    nodes = [a]
    arrows: list[str] = []
    steps: list[Step] = []
    on_path = {a}

    def extend():
        here = nodes[-1]
        if max_len is not None and len(arrows) >= max_len:
            return
        for nxt, arrow in _neighbours(g, here):
            if nxt in on_path:
                continue
            if len(nodes) >= 2:
                st = _step(g, nodes[-2], here, nxt, c, anc)
                if not st.open:
                    continue
                steps.append(st)
            nodes.append(nxt)
            arrows.append(arrow)
            on_path.add(nxt)
            if nxt in targets:
                yield PathWitness(tuple(nodes), tuple(arrows), tuple(steps))
            else:
                yield from extend()
            on_path.discard(nxt)
            arrows.pop()
            nodes.pop()
            if len(nodes) >= 2:
                steps.pop()

    yield from extend()


def open_paths(g: MDag, a, b, c=(), max_paths: int = DEFAULT_MAX_PATHS) -> WitnessList:
    """All simple open paths between ``a`` and ``b`` given ``c`` (up to ``max_paths``).

    Endpoints in ``c`` have no open paths, matching :func:`d_separated`.
    """
    a_node, b_node = g.resolve(a), g.resolve(b)
    if a_node == b_node:
        raise ValueError("open_paths needs two distinct endpoints")
    c_set = _node_set(g, c)
    if a_node in c_set or b_node in c_set:
        return WitnessList()
    anc = _conditioned_ancestry(g, c_set)
    found = WitnessList()
    for w in _walk(g, a_node, frozenset([b_node]), c_set, anc, None):
        if len(found) >= max_paths:
            found.truncated = True
            break
        found.append(w)
    found.sort(key=lambda w: (len(w), w.render()))
    return found


def shortest_open_path(g: MDag, a, targets: Iterable, c=()) -> PathWitness | None:
    """Shortest open path from ``a`` to any of ``targets`` (ties broken by rendering)."""
    a_node = g.resolve(a)
    c_set = _node_set(g, c)
    tset = _node_set(g, list(targets)) - {a_node}
    if a_node in c_set or not (reachable(g, [a_node], c_set) & tset):
        return None
    anc = _conditioned_ancestry(g, c_set)
    for limit in range(1, len(g.nodes)):
        hits = list(_walk(g, a_node, tset - c_set, c_set, anc, limit))
        if hits:
            return min(hits, key=lambda w: (len(w), w.render()))
    return None  # pragma: no cover
