"""Finite partially ordered sets, order-preserving maps and face posets of graphs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import networkx as nx

from .errors import CycleError, MissingSelfEdge, UnknownElement

__all__ = [
    "Poset",
    "OrderMap",
    "closure",
    "up_set",
    "face_poset",
    "is_order_preserving",
    "vertex_element",
    "neighborhood_element",
]


def vertex_element(v: str) -> str:
    return f"v:{v}"


def neighborhood_element(v: str) -> str:
    return f"U:{v}"


def _digraph(edges, elements) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(elements)
    for x, y in edges:
        if x not in g or y not in g:
            missing = x if x not in g else y
            raise UnknownElement(missing)
        if x != y:
            g.add_edge(x, y)
    return g


def closure(hasse_edges: Iterable[tuple], elements: Iterable[Hashable]) -> frozenset:
    """Reflexive-transitive closure of a generating relation.

    Raises
    ------
    CycleError
        If the closure is not antisymmetric.
    """
    elements = list(elements)
    g = _digraph(hasse_edges, elements)
    if not nx.is_directed_acyclic_graph(g):
        cycle = nx.find_cycle(g)
        raise CycleError(f"relation contains a cycle: {cycle}")
    tc = nx.transitive_closure_dag(g)
    return frozenset(tc.edges()) | frozenset((x, x) for x in elements)


class Poset:
    """An immutable finite poset.

    ``relations`` may be any generating relation; the Hasse diagram is
    recovered by transitive reduction and the full order relation is
    computed eagerly. Element order is kept as given and serves as the
    canonical order everywhere downstream.
    """

    def __init__(self, elements: Iterable[Hashable], relations: Iterable[tuple] = ()):
        elements = tuple(elements)
        if len(set(elements)) != len(elements):
            raise ValueError("duplicate poset elements")
        relations = list(relations)
        g = _digraph(relations, elements)
        if not nx.is_directed_acyclic_graph(g):
            raise CycleError(f"relation contains a cycle: {nx.find_cycle(g)}")
        tc = nx.transitive_closure_dag(g)
        reduced = nx.transitive_reduction(g)

        self.elements = elements
        self._index = {x: i for i, x in enumerate(elements)}
        self.relation = frozenset(tc.edges()) | frozenset((x, x) for x in elements)
        self.hasse_edges = frozenset(reduced.edges())
        self._hasse = reduced
        up = {x: {x} for x in elements}
        down = {x: {x} for x in elements}
        for x, y in tc.edges():
            up[x].add(y)
            down[y].add(x)
        self._up = {x: frozenset(s) for x, s in up.items()}
        self._down = {x: frozenset(s) for x, s in down.items()}
        # strict pairs in canonical (lexicographic by index) order
        self.strict_pairs = tuple(
            sorted(
                ((x, y) for x, y in tc.edges()),
                key=lambda p: (self._index[p[0]], self._index[p[1]]),
            )
        )

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, x):
        return x in self._index

    def __repr__(self):
        return f"Poset({len(self.elements)} elements, {len(self.hasse_edges)} Hasse edges)"

    def index(self, x) -> int:
        try:
            return self._index[x]
        except KeyError:
            raise UnknownElement(x) from None

    def leq(self, x, y) -> bool:
        return (x, y) in self.relation

    def up_set(self, x) -> frozenset:
        try:
            return self._up[x]
        except KeyError:
            raise UnknownElement(x) from None

    def down_set(self, x) -> frozenset:
        try:
            return self._down[x]
        except KeyError:
            raise UnknownElement(x) from None

    def hasse_path(self, x, y) -> list:
        """One chain of covering relations from ``x`` up to ``y``."""
        if not self.leq(x, y):
            raise ValueError(f"{x!r} is not below {y!r}")
        if x == y:
            return [x]
        return nx.shortest_path(self._hasse, x, y)

    def subposet(self, elements: Iterable[Hashable]) -> Poset:
        keep = [x for x in self.elements if x in set(elements)]
        ks = set(keep)
        return Poset(keep, [(x, y) for x, y in self.relation if x in ks and y in ks and x != y])

    def n_relations(self) -> int:
        """Number of related pairs including reflexive ones."""
        return len(self.relation)


def up_set(p: Poset, x) -> frozenset:
    return p.up_set(x)


@dataclass(frozen=True)
class OrderMap:
    source: Poset
    target: Poset
    mapping: Mapping = field(default_factory=dict)

    def __call__(self, x):
        return self.mapping[x]

    @classmethod
    def identity(cls, source: Poset, target: Poset | None = None) -> OrderMap:
        return cls(source, target or source, {x: x for x in source.elements})


def is_order_preserving(m: OrderMap) -> bool:
    for x in m.source.elements:
        if x not in m.mapping or m.mapping[x] not in m.target:
            return False
    return all(m.target.leq(m.mapping[x], m.mapping[y]) for x, y in m.source.relation)


def face_poset(graph) -> tuple[Poset, dict]:
    """Two-level poset of 1-hop neighborhoods (below) and vertices (above).

    ``U:v <= v:w`` whenever ``w`` is in the 1-hop neighborhood of ``v``.
    Returns the poset and a labeling ``element -> (kind, vertex)`` with
    kind ``"neighborhood"`` or ``"vertex"``.
    """
    vertices = list(graph.vertices)
    for v in vertices:
        if (v, v) not in graph.edges:
            raise MissingSelfEdge(v)
    lower = [neighborhood_element(v) for v in vertices]
    upper = [vertex_element(v) for v in vertices]
    rels = [(neighborhood_element(v), vertex_element(w)) for w, v in sorted(graph.edges)]
    labeling = {neighborhood_element(v): ("neighborhood", v) for v in vertices}
    labeling.update({vertex_element(v): ("vertex", v) for v in vertices})
    return Poset(lower + upper, rels), labeling
