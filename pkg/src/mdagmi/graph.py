"""Immutable m-DAG data model.

An m-DAG is a causal DAG over substantive variables, augmented with one
response indicator ``R_J`` per measured incomplete variable ``J``
(``R_J = 1`` when ``J`` is observed).  Indicators are synthesized by
:func:`build`; callers never declare them as variables.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class Status(str, enum.Enum):
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"
    UNMEASURED = "unmeasured"


class Role(str, enum.Enum):
    EXPOSURE = "exposure"
    OUTCOME = "outcome"
    COVARIATE = "covariate"
    AUXILIARY = "auxiliary"
    OTHER = "other"


class GraphError(ValueError):
    """Raised when a declaration does not form a valid m-DAG.

    ``subject`` names what the error is about so that front ends (the DSL
    parser) can attach a source position: a variable name, an edge
    ``(src, dst)`` pair of :class:`Node`, or ``"analysis"``.
    """

    def __init__(self, message: str, subject=None):
        super().__init__(message)
        self.subject = subject


class CycleError(GraphError):
    def __init__(self, cycle: Sequence["Node"]):
        self.cycle = tuple(cycle)
        text = " -> ".join(str(n) for n in self.cycle + self.cycle[:1])
        super().__init__(f"cycle detected: {text}", subject=(self.cycle[0], self.cycle[1 % len(self.cycle)]))


@dataclass(frozen=True)
class Node:
    """Handle for a graph node.

    A substantive variable ``X`` is ``Node("X")``; its response indicator
    is ``Node("X", indicator=True)``, printed as ``R_X``.
    """

    name: str
    indicator: bool = False

    def __str__(self) -> str:
        return f"R_{self.name}" if self.indicator else self.name

    @property
    def owner(self) -> "Node":
        """The substantive variable an indicator belongs to (self otherwise)."""
        return Node(self.name) if self.indicator else self

    @property
    def sort_key(self) -> tuple[int, str]:
        return (int(self.indicator), self.name)

    def __lt__(self, other: "Node") -> bool:
        return self.sort_key < other.sort_key


def var(name: str) -> Node:
    return Node(name)


def R(name: str) -> Node:
    return Node(name, indicator=True)


@dataclass(frozen=True)
class Variable:
    name: str
    role: Role
    status: Status

    @property
    def measured(self) -> bool:
        return self.status is not Status.UNMEASURED


@dataclass(frozen=True)
class AnalysisSpec:
    """Target analysis: regression of ``outcome`` on ``exposure`` + ``covariates``.

    ``auxiliaries`` enter imputation models only.
    """

    exposure: str
    outcome: str
    covariates: tuple[str, ...] = ()
    auxiliaries: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "auxiliaries", tuple(self.auxiliaries))

    @property
    def model_variables(self) -> tuple[str, ...]:
        return (self.outcome, self.exposure) + self.covariates

    @property
    def imputation_variables(self) -> tuple[str, ...]:
        return self.model_variables + self.auxiliaries

    def role_of(self, name: str) -> Role:
        if name == self.exposure:
            return Role.EXPOSURE
        if name == self.outcome:
            return Role.OUTCOME
        if name in self.covariates:
            return Role.COVARIATE
        if name in self.auxiliaries:
            return Role.AUXILIARY
        return Role.OTHER


@dataclass(frozen=True, eq=False)
class MDag:
    """Validated, immutable m-DAG.  Construct with :func:`build`."""

    name: str
    variables: tuple[Variable, ...]
    edges: frozenset[tuple[Node, Node]]
    analysis: AnalysisSpec
    _parents: dict = field(repr=False, compare=False)
    _children: dict = field(repr=False, compare=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MDag):
            return NotImplemented
        return (
            self.name == other.name
            and sorted(self.variables, key=lambda v: v.name) == sorted(other.variables, key=lambda v: v.name)
            and self.edges == other.edges
            and self.analysis == other.analysis
        )

    def __hash__(self) -> int:
        return hash((self.name, frozenset(self.variables), self.edges, self.analysis))

    # -- variable queries -------------------------------------------------

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(f"unknown variable {name!r}")

    def has_variable(self, name: str) -> bool:
        return any(v.name == name for v in self.variables)

    @property
    def nodes(self) -> tuple[Node, ...]:
        return tuple(sorted(self._parents))

    @property
    def indicators(self) -> tuple[Node, ...]:
        return tuple(n for n in self.nodes if n.indicator)

    def names_with_status(self, status: Status) -> tuple[str, ...]:
        return tuple(sorted(v.name for v in self.variables if v.status is status))

    @property
    def complete(self) -> tuple[str, ...]:
        return self.names_with_status(Status.COMPLETE)

    @property
    def incomplete(self) -> tuple[str, ...]:
        """Measured incomplete variables (the ones carrying an indicator)."""
        return self.names_with_status(Status.INCOMPLETE)

    @property
    def unmeasured(self) -> tuple[str, ...]:
        return self.names_with_status(Status.UNMEASURED)

    @property
    def exposure(self) -> Node:
        return Node(self.analysis.exposure)

    @property
    def outcome(self) -> Node:
        return Node(self.analysis.outcome)

    # -- structural queries -----------------------------------------------

    def __contains__(self, node) -> bool:
        return node in self._parents

    def resolve(self, ref) -> Node:
        """Turn ``"X"``, ``"R[X]"``, ``"M[X]"``, ``"R_X"`` or a Node into a Node of this graph."""
        if isinstance(ref, Node):
            node = ref
        else:
            text = str(ref).strip()
            if len(text) > 3 and text[0] in "RM" and text[1] == "[" and text[-1] == "]":
                node = Node(text[2:-1].strip(), indicator=True)
            elif self.has_variable(text):
                node = Node(text)
            elif text.startswith("R_") and Node(text[2:], True) in self._parents:
                node = Node(text[2:], True)
            else:
                node = Node(text)
        if node not in self._parents:
            raise KeyError(f"unknown node {ref!s}")
        return node

    def parents(self, v) -> frozenset[Node]:
        return self._parents[self.resolve(v)]

    def children(self, v) -> frozenset[Node]:
        return self._children[self.resolve(v)]

    def ancestors(self, v) -> frozenset[Node]:
        return self._closure(self.resolve(v), self._parents)

    def descendants(self, v) -> frozenset[Node]:
        return self._closure(self.resolve(v), self._children)

    @staticmethod
    def _closure(start: Node, step: dict) -> frozenset[Node]:
        seen: set[Node] = set()
        queue = deque(step[start])
        while queue:
            n = queue.popleft()
            if n not in seen:
                seen.add(n)
                queue.extend(step[n])
        return frozenset(seen)

    def topological_order(self) -> tuple[Node, ...]:
        return _toposort(self._parents, self._children)

    def with_edges(self, extra: Iterable[tuple[Node, Node]]) -> "MDag":
        """A new graph with additional edges (the original is untouched)."""
        return build(
            [(v.name, v.role, v.status) for v in self.variables],
            list(self.edges) + list(extra),
            self.analysis,
            name=self.name,
        )


def _toposort(parents: dict, children: dict) -> tuple[Node, ...]:
    indeg = {n: len(p) for n, p in parents.items()}
    ready = sorted(n for n, d in indeg.items() if d == 0)
    order: list[Node] = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        for c in sorted(children[n]):
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
        ready.sort()
    if len(order) != len(parents):
        raise CycleError(_find_cycle(parents, children))
    return tuple(order)


def _find_cycle(parents: dict, children: dict) -> list[Node]:
    white, grey, black = 0, 1, 2
    color = dict.fromkeys(parents, white)
    stack: list[Node] = []

    def visit(n: Node):
        color[n] = grey
        stack.append(n)
        for c in sorted(children[n]):
            if color[c] == grey:
                return stack[stack.index(c):]
            if color[c] == white:
                found = visit(c)
                if found:
                    return found
        stack.pop()
        color[n] = black
        return None

    for n in sorted(parents):
        if color[n] == white:
            found = visit(n)
            if found:
                return list(found)
    raise AssertionError("no cycle found")  # pragma: no cover


def _coerce_node(ref) -> Node:
    if isinstance(ref, Node):
        return ref
    text = str(ref).strip()
    if len(text) > 3 and text[0] in "RM" and text[1] == "[" and text[-1] == "]":
        return Node(text[2:-1].strip(), indicator=True)
    return Node(text)


def build(variables, edges, analysis: AnalysisSpec, name: str = "g") -> MDag:
    """Validate a declaration and return an :class:`MDag`.

    Parameters
    ----------
    variables : iterable of (name, role, status) or :class:`Variable`
        ``role`` may be ``None`` to infer it from ``analysis``; a role that
        is given must agree with ``analysis``.
    edges : iterable of (src, dst)
        Endpoints are :class:`Node` objects or strings (``"X"``,
        ``"R[X]"``, ``"M[X]"``).
    analysis : AnalysisSpec
    """
    table: dict[str, Variable] = {}
    for entry in variables:
        vname, role, status = (entry.name, entry.role, entry.status) if isinstance(entry, Variable) else entry
        if not isinstance(vname, str) or not vname.strip():
            raise GraphError("variable names must be nonempty strings", subject=vname)
        if vname in table:
            raise GraphError(f"duplicate variable {vname!r}", subject=vname)
        status = Status(status)
        inferred = analysis.role_of(vname)
        if role is None:
            role = inferred
        role = Role(role)
        if role is not inferred:
            raise GraphError(
                f"variable {vname!r} declared with role {role.value!r} but the analysis makes it {inferred.value!r}",
                subject=vname,
            )
        if status is Status.UNMEASURED and role is not Role.OTHER:
            raise GraphError(
                f"unmeasured variable {vname!r} cannot be the {role.value}; it can never be observed or imputed",
                subject=vname,
            )
        table[vname] = Variable(vname, role, status)

    _check_analysis(analysis, table)

    nodes = {Node(n) for n in table}
    nodes |= {Node(n, True) for n, v in table.items() if v.status is Status.INCOMPLETE}
    parents: dict[Node, set[Node]] = {n: set() for n in nodes}
    children: dict[Node, set[Node]] = {n: set() for n in nodes}
    seen: set[tuple[Node, Node]] = set()
    for src, dst in edges:
        src, dst = _coerce_node(src), _coerce_node(dst)
        edge = (src, dst)
        for end in edge:
            if end.name not in table:
                raise GraphError(f"unknown variable {end.name!r} in edge {src} -> {dst}", subject=edge)
            if end.indicator and table[end.name].status is not Status.INCOMPLETE:
                raise GraphError(
                    f"{end} is not a response indicator: {end.name!r} is {table[end.name].status.value}",
                    subject=edge,
                )
        if src.indicator:
            raise GraphError(f"response indicator {src} cannot have outgoing edges", subject=edge)
        if src == dst:
            raise GraphError(f"self-edge on {src}", subject=edge)
        if edge in seen:
            raise GraphError(f"duplicate edge {src} -> {dst}", subject=edge)
        seen.add(edge)
        parents[dst].add(src)
        children[src].add(dst)

    frozen_parents = {n: frozenset(p) for n, p in parents.items()}
    frozen_children = {n: frozenset(c) for n, c in children.items()}
    _toposort(frozen_parents, frozen_children)
    return MDag(
        name=name,
        variables=tuple(sorted(table.values(), key=lambda v: v.name)),
        edges=frozenset(seen),
        analysis=analysis,
        _parents=frozen_parents,
        _children=frozen_children,
    )


def _check_analysis(analysis: AnalysisSpec, table: dict[str, Variable]) -> None:
    if not analysis.exposure or not analysis.outcome:
        raise GraphError("analysis needs exactly one exposure and one outcome", subject="analysis")
    named = [analysis.outcome, analysis.exposure, *analysis.covariates, *analysis.auxiliaries]
    for n in named:
        if n not in table:
            raise GraphError(f"unknown variable {n!r} in analysis", subject="analysis")
    if len(set(named)) != len(named):
        raise GraphError(
            "exposure, outcome, covariates and auxiliaries must be pairwise disjoint", subject="analysis"
        )
