"""Mixed undirected graphs and their decomposability machinery.

A mixed graph carries a kind (discrete or continuous) on every vertex.  It is
decomposable when it is triangulated and has no path between two non-adjacent
discrete vertices whose interior is purely continuous.  Equivalently, the star
graph (the graph plus one auxiliary vertex joined to every discrete vertex) is
triangulated, which is what :func:`is_decomposable` checks with maximum
cardinality search.

Vertices are addressed by label everywhere in the public API.  Internally a
vertex's index is its position in :attr:`MixedGraph.labels`.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .errors import NotDecomposable, ParseError, UnknownVertex

STAR = "⋆"


class VertexKind(str, enum.Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"

    @classmethod
    def parse(cls, value: "str | VertexKind") -> "VertexKind":
        try:
            return cls(value)
        except ValueError:
            raise ParseError(f"unknown vertex kind {value!r}; expected 'discrete' or 'continuous'") from None


@dataclass(frozen=True)
class MixedGraph:
    """Immutable undirected graph whose vertices are discrete or continuous.

    Use :meth:`build` rather than the raw constructor; it validates labels and
    edges and normalises the edge set.
    """

    labels: tuple[str, ...]
    kinds: tuple[VertexKind, ...]
    edges: frozenset[frozenset[str]] = field(default_factory=frozenset)

    @classmethod
    def build(
        cls,
        vertices: Iterable[tuple[str, "str | VertexKind"]],
        edges: Iterable[Sequence[str]] = (),
    ) -> "MixedGraph":
        labels: list[str] = []
        kinds: list[VertexKind] = []
        for label, kind in vertices:
            if label in labels:
                raise ParseError(f"duplicate vertex label {label!r}")
            labels.append(str(label))
            kinds.append(VertexKind.parse(kind))
        known = set(labels)
        edge_set: set[frozenset[str]] = set()
        for pair in edges:
            if len(pair) != 2:
                raise ParseError(f"edge {pair!r} must list exactly two labels")
            u, v = pair
            if u == v:
                raise ParseError(f"self-loop on vertex {u!r}")
            for w in (u, v):
                if w not in known:
                    raise UnknownVertex(f"edge ({u!r}, {v!r}) references unknown vertex {w!r}")
            edge_set.add(frozenset((u, v)))
        return cls(tuple(labels), tuple(kinds), frozenset(edge_set))

    # -- lookups --------------------------------------------------------

    @cached_property
    def index(self) -> dict[str, int]:
        return {label: k for k, label in enumerate(self.labels)}

    @cached_property
    def kind_of(self) -> dict[str, VertexKind]:
        return dict(zip(self.labels, self.kinds))

    @cached_property
    def neighbours(self) -> dict[str, frozenset[str]]:
        nbrs: dict[str, set[str]] = {v: set() for v in self.labels}
        for e in self.edges:
            u, v = tuple(e)
            nbrs[u].add(v)
            nbrs[v].add(u)
        return {v: frozenset(s) for v, s in nbrs.items()}

    @property
    def discrete(self) -> tuple[str, ...]:
        return tuple(v for v, k in zip(self.labels, self.kinds) if k is VertexKind.DISCRETE)

    @property
    def continuous(self) -> tuple[str, ...]:
        return tuple(v for v, k in zip(self.labels, self.kinds) if k is VertexKind.CONTINUOUS)

    def is_discrete(self, v: str) -> bool:
        return self.kind_of[v] is VertexKind.DISCRETE

    def adjacent(self, u: str, v: str) -> bool:
        return v in self.neighbours[u]

    def is_complete(self, vertices: Iterable[str]) -> bool:
        vs = list(vertices)
        return all(self.adjacent(u, v) for u, v in combinations(vs, 2))

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, v: object) -> bool:
        return v in self.index

    def sorted_by_index(self, vertices: Iterable[str]) -> tuple[str, ...]:
        return tuple(sorted(vertices, key=self.index.__getitem__))


# ---------------------------------------------------------------------------
# basic constructions


def star_graph(g: MixedGraph) -> MixedGraph:
    """Return ``g`` plus a fresh vertex adjacent to exactly the discrete vertices."""
    star = _star_label(g)
    vertices = list(zip(g.labels, g.kinds)) + [(star, VertexKind.DISCRETE)]
    edges = [tuple(e) for e in g.edges] + [(star, d) for d in g.discrete]
    return MixedGraph.build(vertices, edges)


def _star_label(g: MixedGraph) -> str:
    star = STAR
    while star in g.index:
        star += "'"
    return star


def induced_subgraph(g: MixedGraph, a: Iterable[str]) -> MixedGraph:
    keep = set(a)
    for v in keep:
        if v not in g.index:
            raise UnknownVertex(f"vertex {v!r} is not in the graph")
    labels = [v for v in g.labels if v in keep]
    return MixedGraph(
        tuple(labels),
        tuple(g.kind_of[v] for v in labels),
        frozenset(e for e in g.edges if e <= keep),
    )


# ---------------------------------------------------------------------------
# maximum cardinality search


def mcs_order(g: MixedGraph, start: str | None = None) -> list[str]:
    """Maximum cardinality search visit order.

    Ties go to the lowest vertex index.  When ``start`` is given the search
    begins there; a new component is entered at its lowest-index vertex.
    """
    weight = {v: 0 for v in g.labels}
    unvisited = set(g.labels)
    order: list[str] = []
    while unvisited:
        if start is not None and not order:
            v = start
        else:
            v = min(unvisited, key=lambda u: (-weight[u], g.index[u]))
        unvisited.remove(v)
        order.append(v)
        for u in g.neighbours[v]:
            if u in unvisited:
                weight[u] += 1
    return order


def _earlier_neighbours(g: MixedGraph, order: Sequence[str]) -> list[frozenset[str]]:
    pos = {v: k for k, v in enumerate(order)}
    return [frozenset(u for u in g.neighbours[v] if pos[u] < pos[v]) for v in order]


@dataclass(frozen=True)
class Witness:
    """Evidence that a graph is not decomposable.

    ``kind`` is ``"chordless_cycle"`` (vertices listed around the cycle) or
    ``"forbidden_path"`` (two non-adjacent discrete endpoints joined through
    continuous vertices only).
    """

    kind: str
    vertices: tuple[str, ...]

    def describe(self) -> str:
        if self.kind == "chordless_cycle":
            return "chordless cycle " + " - ".join(self.vertices + self.vertices[:1])
        return "forbidden path " + " - ".join(self.vertices)


@dataclass(frozen=True)
class DecomposabilityCheck:
    decomposable: bool
    witness: Witness | None = None

    def __bool__(self) -> bool:
        return self.decomposable


def is_decomposable(g: MixedGraph) -> DecomposabilityCheck:
    star = star_graph(g)
    order = mcs_order(star, start=star.labels[-1])
    for v, earlier in zip(order, _earlier_neighbours(star, order)):
        if not star.is_complete(earlier):
            return DecomposabilityCheck(False, _find_witness(g, star))
    return DecomposabilityCheck(True)


def _find_witness(g: MixedGraph, star: MixedGraph) -> Witness:
    star_label = star.labels[-1]
    cycle = _chordless_cycle(star)
    if star_label in cycle:
        k = cycle.index(star_label)
        path = cycle[k + 1 :] + cycle[:k]
        return Witness("forbidden_path", tuple(path))
    return Witness("chordless_cycle", tuple(cycle))


def _chordless_cycle(g: MixedGraph) -> list[str]:
    # A chordless cycle through v exists iff two non-adjacent neighbours u, w of
    # v are connected outside the closed neighbourhood of v; the shortest such
    # path is induced, so closing it through v gives a chordless cycle.
    for v in g.labels:
        nbrs = g.neighbours[v]
        for u, w in combinations(g.sorted_by_index(nbrs), 2):
            if g.adjacent(u, w):
                continue
            blocked = (nbrs | {v}) - {u, w}
            path = _shortest_path(g, u, w, blocked)
            if path is not None:
                return [v] + path
    raise AssertionError("graph rejected by MCS but no chordless cycle found")


def _shortest_path(g: MixedGraph, src: str, dst: str, blocked: set[str] | frozenset[str]) -> list[str] | None:
    parent = {src: None}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        if v == dst:
            path = [v]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        for u in g.sorted_by_index(g.neighbours[v]):
            if u not in parent and u not in blocked:
                parent[u] = v
                queue.append(u)
    return None


# ---------------------------------------------------------------------------
# perfect numberings


@dataclass(frozen=True)
class PerfectNumbering:
    order: tuple[str, ...]

    def position(self) -> dict[str, int]:
        return {v: k for k, v in enumerate(self.order)}

    def __iter__(self):
        return iter(self.order)

    def __len__(self) -> int:
        return len(self.order)


def perfect_numbering(g: MixedGraph) -> PerfectNumbering:
    """Perfect numbering with every discrete vertex ahead of every continuous one.

    MCS runs on the star graph from the auxiliary vertex; dropping that vertex
    leaves a perfect numbering of ``g``.  Adjacent (continuous, discrete) pairs
    are then swapped until the discrete vertices lead.  Such a pair is never
    adjacent in a decomposable graph, so the swap leaves every B-set intact.
    """
    check = is_decomposable(g)
    if not check:
        raise NotDecomposable(f"graph is not decomposable: {check.witness.describe()}")
    star = star_graph(g)
    order = mcs_order(star, start=star.labels[-1])[1:]
    swapped = True
    while swapped:
        swapped = False
        for k in range(len(order) - 1):
            gamma, delta = order[k], order[k + 1]
            if not g.is_discrete(gamma) and g.is_discrete(delta):
                assert not g.adjacent(gamma, delta)
                order[k], order[k + 1] = delta, gamma
                swapped = True
    return PerfectNumbering(tuple(order))


def b_sets(g: MixedGraph, order: Sequence[str]) -> list[frozenset[str]]:
    """B(v_j): the closure of v_j intersected with v_1..v_j."""
    return [nb | {v} for v, nb in zip(order, _earlier_neighbours(g, order))]


def numbering_problems(g: MixedGraph, order: Sequence[str]) -> list[str]:
    """Reasons why ``order`` is not a discrete-first perfect numbering of ``g``.

    An empty list means the numbering is valid.
    """
    problems: list[str] = []
    if sorted(order) != sorted(g.labels):
        return ["order is not a permutation of the vertex set"]
    seen_continuous = False
    for v in order:
        if g.is_discrete(v) and seen_continuous:
            problems.append(f"discrete vertex {v!r} follows a continuous vertex")
        seen_continuous = seen_continuous or not g.is_discrete(v)
    problems.extend(sequence_problems(g, b_sets(g, order)))
    return problems


def sequence_problems(g: MixedGraph, sets: Sequence[frozenset[str]]) -> list[str]:
    """Check the three conditions of a perfect sequence of vertex sets."""
    problems: list[str] = []
    history: set[str] = set()
    for k, c in enumerate(sets):
        if not g.is_complete(c):
            problems.append(f"set {k} {sorted(c)} is not complete")
        sep = c & history
        res = c - history
        if k > 0:
            if not any(sep <= sets[i] for i in range(k)):
                problems.append(f"separator {sorted(sep)} of set {k} is not inside an earlier set")
            if not (all(not g.is_discrete(v) for v in res) or all(g.is_discrete(v) for v in sep)):
                problems.append(f"set {k}: residual {sorted(res)} has a discrete vertex but separator {sorted(sep)} is not discrete")
        history |= c
    if history != set(g.labels):
        problems.append("sets do not cover the vertex set")
    return problems


# ---------------------------------------------------------------------------
# cliques with the running intersection property


@dataclass(frozen=True)
class RipSequence:
    cliques: tuple[frozenset[str], ...]

    @cached_property
    def separators(self) -> tuple[frozenset[str], ...]:
        """S_1..S_K with S_1 empty."""
        seps = []
        history: frozenset[str] = frozenset()
        for c in self.cliques:
            seps.append(c & history)
            history = history | c
        return tuple(seps)

    @property
    def residuals(self) -> tuple[frozenset[str], ...]:
        return tuple(c - s for c, s in zip(self.cliques, self.separators))

    @property
    def histories(self) -> tuple[frozenset[str], ...]:
        out = []
        history: frozenset[str] = frozenset()
        for c in self.cliques:
            history = history | c
            out.append(history)
        return tuple(out)

    def __len__(self) -> int:
        return len(self.cliques)


def rip_cliques(g: MixedGraph, numbering: PerfectNumbering | None = None) -> RipSequence:
    """Maximal cliques of a decomposable graph in a perfect (RIP) order.

    The cliques are read off the B-sets of a perfect numbering: a B-set that is
    contained in another one is dropped, and when the larger set comes later
    it takes over the smaller one's position.  This keeps the sequence
    perfect.  A graph without vertices yields a single empty clique.
    """
    if numbering is None:
        numbering = perfect_numbering(g)
    if not len(g):
        return RipSequence((frozenset(),))
    seq = b_sets(g, numbering.order)
    while True:
        pair = _contained_pair(seq)
        if pair is None:
            break
        t, s = pair
        if s < t:
            del seq[t]
        else:
            seq[t] = seq[s]
            del seq[s]
    return RipSequence(tuple(seq))


def _contained_pair(seq: list[frozenset[str]]) -> tuple[int, int] | None:
    for t, small in enumerate(seq):
        for s, big in enumerate(seq):
            if s != t and small <= big:
                return t, s
    return None


def rip_problems(g: MixedGraph, rip: RipSequence) -> list[str]:
    problems = sequence_problems(g, rip.cliques)
    for c in rip.cliques:
        outside = set.intersection(*(set(g.neighbours[v]) for v in c)) - c if c else set()
        if outside:
            problems.append(f"clique {sorted(c)} is not maximal")
    return problems


# ---------------------------------------------------------------------------
# parents


@dataclass(frozen=True)
class Parents:
    """Earlier neighbours of a continuous vertex, split by kind, in numbering order."""

    discrete: tuple[str, ...]
    continuous: tuple[str, ...]

    @property
    def all(self) -> tuple[str, ...]:
        return self.discrete + self.continuous

    def __len__(self) -> int:
        return len(self.discrete) + len(self.continuous)


def continuous_parents(g: MixedGraph, numbering: PerfectNumbering) -> dict[str, Parents]:
    pos = numbering.position()
    out: dict[str, Parents] = {}
    for v in numbering.order:
        if g.is_discrete(v):
            continue
        pa = sorted((u for u in g.neighbours[v] if pos[u] < pos[v]), key=pos.__getitem__)
        out[v] = Parents(
            tuple(u for u in pa if g.is_discrete(u)),
            tuple(u for u in pa if not g.is_discrete(u)),
        )
    return out


def graph_from_mapping(doc: Mapping) -> MixedGraph:
    """Build a graph from a ``{"vertices": [...], "edges": [...]}`` mapping."""
    try:
        vertices = [(v["label"], v["kind"]) for v in doc["vertices"]]
        edges = [tuple(e) for e in doc.get("edges", [])]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed graph document: {exc}") from None
    return MixedGraph.build(vertices, edges)
