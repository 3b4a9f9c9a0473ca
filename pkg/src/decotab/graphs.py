"""Undirected labeled graphs: chordality, cliques, perfect orderings.

Vertex sets are represented throughout as tuples sorted by the graph's
canonical vertex order (the order vertices were declared in).  All
functions are pure; graphs and clique orders are immutable after
construction.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

VertexSet = tuple[str, ...]


class NotDecomposableError(ValueError):
    """The graph has a chordless cycle of length >= 4 (carried as evidence)."""

    def __init__(self, cycle: tuple[str, ...]):
        self.cycle = cycle
        super().__init__(
            "graph is not decomposable; chordless cycle: " + "-".join(cycle)
        )


@dataclass(frozen=True)
class LabeledGraph:
    """Undirected graph over named vertices.

    ``vertices`` fixes the canonical order used for sorting vertex sets and
    breaking ties in traversals.  Edges are unordered pairs of distinct
    vertex names; self-loops and unknown endpoints are rejected.
    """

    vertices: tuple[str, ...]
    edges: frozenset[frozenset[str]]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)
    _adj: dict[str, frozenset[str]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.vertices)) != len(self.vertices):
            raise ValueError("duplicate vertex names")
        index = {v: i for i, v in enumerate(self.vertices)}
        adj: dict[str, set[str]] = {v: set() for v in self.vertices}
        for e in self.edges:
            pair = tuple(e)
            if len(pair) != 2:
                raise ValueError(f"edge {sorted(e)} is not a pair of distinct vertices")
            u, v = pair
            if u not in index or v not in index:
                raise ValueError(f"edge {sorted(e)} has an unknown endpoint")
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_adj", {v: frozenset(s) for v, s in adj.items()})

    @classmethod
    def make(cls, vertices: Sequence[str], edges: Iterable[tuple[str, str]]) -> "LabeledGraph":
        return cls(tuple(vertices), frozenset(frozenset(e) for e in edges))

    @classmethod
    def from_cliques(cls, vertices: Sequence[str], cliques: Iterable[Iterable[str]]) -> "LabeledGraph":
        edges = set()
        for c in cliques:
            for u, v in itertools.combinations(c, 2):
                edges.add((u, v))
        return cls.make(vertices, edges)

    def index(self, v: str) -> int:
        return self._index[v]

    def has_edge(self, u: str, v: str) -> bool:
        return v in self._adj[u]

    def neighbors(self, v: str) -> frozenset[str]:
        return self._adj[v]

    def sort(self, names: Iterable[str]) -> VertexSet:
        """Canonically sorted tuple of vertex names (duplicates collapse)."""
        return tuple(sorted(set(names), key=self._index.__getitem__))

    def edge_pairs(self) -> list[tuple[str, str]]:
        pairs = [self.sort(e) for e in self.edges]
        return sorted(pairs, key=lambda p: (self._index[p[0]], self._index[p[1]]))


@dataclass(frozen=True)
class CliqueOrder:
    """A perfect ordering C_1..C_k of the maximal cliques of a graph.

    ``separators``, ``residuals`` and ``histories`` are stored aligned with
    ``cliques``; index 0 carries the conventions S_1 = (), R_1 = C_1,
    H_1 = C_1.  Perfectness means every S_l (l >= 2) is contained in some
    earlier clique, which makes the S_l minimal separators.
    """

    vertices: tuple[str, ...]
    cliques: tuple[VertexSet, ...]
    separators: tuple[VertexSet, ...]
    residuals: tuple[VertexSet, ...]
    histories: tuple[VertexSet, ...]

    @property
    def k(self) -> int:
        return len(self.cliques)

    def validate(self) -> None:
        index = {v: i for i, v in enumerate(self.vertices)}
        seen: set[str] = set()
        for l, c in enumerate(self.cliques):
            hist = tuple(sorted(seen | set(c), key=index.__getitem__))
            sep = tuple(sorted(seen & set(c), key=index.__getitem__)) if l else ()
            res = tuple(v for v in c if v not in sep)
            if self.histories[l] != hist or self.separators[l] != sep or self.residuals[l] != res:
                raise ValueError(f"stored history/separator/residual wrong at clique {l + 1}")
            if l and not any(set(sep) <= set(self.cliques[i]) for i in range(l)):
                raise ValueError(f"ordering is not perfect: S_{l + 1} fits no earlier clique")
            seen |= set(c)
        if tuple(sorted(seen, key=index.__getitem__)) != tuple(
            sorted(self.vertices, key=index.__getitem__)
        ):
            raise ValueError("cliques do not cover the vertex set")
        for a, b in itertools.combinations(self.cliques, 2):
            if set(a) <= set(b) or set(b) <= set(a):
                raise ValueError("clique list contains a non-maximal entry")

    def home(self, d: Iterable[str]) -> int:
        """0-based index of the unique clique l with d ⊆ C_l and d ∩ R_l ≠ ∅.

        This is the first clique containing d.  Raises for sets contained in
        no clique (equivalently, non-complete sets).
        """
        ds = set(d)
        for l, c in enumerate(self.cliques):
            if ds <= set(c):
                return l
        raise KeyError(f"{tuple(sorted(ds))} is not contained in any clique")

    def graph(self) -> LabeledGraph:
        return LabeledGraph.from_cliques(self.vertices, self.cliques)


def _max_cardinality_order(g: LabeledGraph, seed: Sequence[str] = ()) -> list[str]:
    """Visit order of maximum cardinality search.

    Ties break toward the earliest canonical vertex.  While any vertex of
    ``seed`` is unvisited, the choice is restricted to ``seed``; seeding with
    a complete set is still a legal MCS run (each seed vertex is adjacent to
    all previously visited ones, hence of maximal weight).
    """
    weight = {v: 0 for v in g.vertices}
    unvisited = set(g.vertices)
    pending_seed = set(seed)
    order: list[str] = []
    while unvisited:
        pool = pending_seed if pending_seed else unvisited
        v = min(pool, key=lambda u: (-weight[u], g.index(u)))
        order.append(v)
        unvisited.discard(v)
        pending_seed.discard(v)
        for u in g.neighbors(v):
            if u in unvisited:
                weight[u] += 1
    return order


def _peo_violation(g: LabeledGraph, order: list[str]) -> tuple[str, str, str] | None:
    """Zero fill-in check for an MCS visit order.

    Returns (v, u, w) where u is v's latest-visited earlier neighbor and w an
    earlier neighbor not adjacent to u, or None when the order is perfect.
    """
    pos = {v: i for i, v in enumerate(order)}
    for v in order:
        earlier = [u for u in g.neighbors(v) if pos[u] < pos[v]]
        if not earlier:
            continue
        parent = max(earlier, key=pos.__getitem__)
        for w in earlier:
            if w is not parent and not g.has_edge(w, parent):
                return v, parent, w
    return None


def _find_chordless_cycle(g: LabeledGraph) -> tuple[str, ...]:
    """Locate a chordless cycle of length >= 4 in a non-chordal graph.

    For every vertex v and non-adjacent pair (x, y) of its neighbors, a
    shortest x-y path avoiding the rest of N[v] closes a chordless cycle
    through v; shortest paths are induced, so the cycle has no chords.
    """
    for v in g.vertices:
        nbrs = sorted(g.neighbors(v), key=g.index)
        for x, y in itertools.combinations(nbrs, 2):
            if g.has_edge(x, y):
                continue
            blocked = (g.neighbors(v) | {v}) - {x, y}
            path = _shortest_path(g, x, y, blocked)
            if path is not None and len(path) >= 3:
                return (v, *path)
    raise AssertionError("no chordless cycle found in a non-chordal graph")


def _shortest_path(g: LabeledGraph, src: str, dst: str, blocked: set[str]) -> list[str] | None:
    prev: dict[str, str | None] = {src: None}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        if u == dst:
            path = []
            node: str | None = u
            while node is not None:
                path.append(node)
                node = prev[node]
            return path[::-1]
        for w in sorted(g.neighbors(u), key=g.index):
            if w in blocked or w in prev:
                continue
            prev[w] = u
            queue.append(w)
    return None


@dataclass(frozen=True)
class Chordality:
    """Outcome of the decomposability check: an elimination order or a witness."""

    is_decomposable: bool
    elimination_order: tuple[str, ...] | None
    bad_cycle: tuple[str, ...] | None


def check_decomposable(g: LabeledGraph) -> Chordality:
    """Recognize chordality by maximum cardinality search with fill-in check.

    On success the returned order is a perfect elimination ordering (each
    vertex's later neighbors form a complete set); on failure the witness is
    a chordless cycle of length >= 4.
    """
    order = _max_cardinality_order(g)
    if _peo_violation(g, order) is None:
        return Chordality(True, tuple(reversed(order)), None)
    return Chordality(False, None, _find_chordless_cycle(g))


def perfect_order(g: LabeledGraph, first_clique: Sequence[str] = ()) -> CliqueOrder:
    """Perfect ordering of the maximal cliques, deterministic for a given graph.

    The cliques are read off the MCS visit order and ranked by the visit
    position of their last vertex.  ``first_clique`` (a complete set) seeds
    the search so the first clique of the result contains it.
    """
    if first_clique and not is_complete(g, first_clique):
        raise ValueError("first_clique seed must be a complete set")
    visit = _max_cardinality_order(g, seed=first_clique)
    if _peo_violation(g, visit) is not None:
        raise NotDecomposableError(_find_chordless_cycle(g))
    pos = {v: i for i, v in enumerate(visit)}
    candidates = []
    for v in visit:
        earlier = [u for u in g.neighbors(v) if pos[u] < pos[v]]
        candidates.append(g.sort([v, *earlier]))
    maximal = [
        c
        for c in candidates
        if not any(set(c) < set(d) for d in candidates)
    ]
    cliques = sorted(set(maximal), key=lambda c: max(pos[v] for v in c))

    seen: set[str] = set()
    seps, resids, hists = [], [], []
    for l, c in enumerate(cliques):
        seps.append(g.sort(seen & set(c)) if l else ())
        resids.append(tuple(v for v in c if v not in seps[-1]))
        seen |= set(c)
        hists.append(g.sort(seen))
    order = CliqueOrder(g.vertices, tuple(cliques), tuple(seps), tuple(resids), tuple(hists))
    order.validate()
    if first_clique and not set(first_clique) <= set(cliques[0]):
        raise AssertionError("seeded search failed to place the seed in the first clique")
    return order


def induced_subgraph(g: LabeledGraph, a: Iterable[str]) -> LabeledGraph:
    aset = set(a)
    unknown = aset - set(g.vertices)
    if unknown:
        raise ValueError(f"unknown vertices: {sorted(unknown)}")
    vertices = tuple(v for v in g.vertices if v in aset)
    edges = frozenset(e for e in g.edges if e <= aset)
    return LabeledGraph(vertices, edges)


def connected_components(g: LabeledGraph, subset: Iterable[str]) -> list[VertexSet]:
    """Partition ``subset`` into maximal connected sets of the induced subgraph.

    Components come out sorted by their least vertex (canonical order).
    """
    sub = set(subset)
    unknown = sub - set(g.vertices)
    if unknown:
        raise ValueError(f"unknown vertices: {sorted(unknown)}")
    remaining = set(sub)
    components = []
    for start in g.vertices:
        if start not in remaining:
            continue
        comp = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for w in g.neighbors(u):
                if w in remaining and w not in comp:
                    comp.add(w)
                    queue.append(w)
        remaining -= comp
        components.append(g.sort(comp))
    return components


def boundary(g: LabeledGraph, b: Iterable[str]) -> VertexSet:
    """Vertices outside ``b`` adjacent to some vertex of ``b``."""
    bset = set(b)
    out = set()
    for v in bset:
        out |= g.neighbors(v) - bset
    return g.sort(out)


def is_complete(g: LabeledGraph, d: Iterable[str]) -> bool:
    """True iff every pair in ``d`` is an edge; vacuously true for |d| <= 1."""
    ds = list(set(d))
    return all(g.has_edge(u, v) for u, v in itertools.combinations(ds, 2))
