import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgoutlier.errors import NotDecomposable, ParseError, UnknownVertex
from cgoutlier.graph import (
    MixedGraph,
    PerfectNumbering,
    RipSequence,
    b_sets,
    continuous_parents,
    graph_from_mapping,
    induced_subgraph,
    is_decomposable,
    mcs_order,
    numbering_problems,
    perfect_numbering,
    rip_cliques,
    rip_problems,
    star_graph,
)
from cgoutlier.synthetic import example_graph

from oracles import C, D, brute_decomposable, brute_maximal_cliques, random_decomposable


def mixed(vertices: str, kinds: str, edges: str) -> MixedGraph:
    """Compact builder: ``mixed("abc", "ddc", "ab bc")``."""
    kind = {"d": D, "c": C}
    return MixedGraph.build(
        [(v, kind[k]) for v, k in zip(vertices, kinds)],
        [tuple(e) for e in edges.split()],
    )


# ---------------------------------------------------------------------------
# construction


def test_build_rejects_bad_input():
    with pytest.raises(ParseError, match="duplicate"):
        MixedGraph.build([("a", D), ("a", C)], [])
    with pytest.raises(ParseError, match="self-loop"):
        MixedGraph.build([("a", D)], [("a", "a")])
    with pytest.raises(UnknownVertex, match="'z'"):
        MixedGraph.build([("a", D)], [("a", "z")])
    with pytest.raises(ParseError):
        MixedGraph.build([("a", "categorical")], [])


def test_graph_from_mapping_and_kind_strings():
    g = graph_from_mapping({"vertices": [{"label": "x", "kind": "discrete"}, {"label": "y", "kind": "continuous"}], "edges": [["x", "y"]]})
    assert g.discrete == ("x",) and g.continuous == ("y",)
    assert g.adjacent("x", "y")
    with pytest.raises(ParseError):
        graph_from_mapping({"edges": []})


def test_star_graph_joins_every_discrete_vertex():
    g = example_graph()
    star = star_graph(g)
    extra = set(star.labels) - set(g.labels)
    assert len(extra) == 1
    s = extra.pop()
    assert star.neighbours[s] == frozenset(g.discrete)
    assert star.labels[-1] == s


def test_star_label_avoids_collisions():
    g = MixedGraph.build([("*", D), ("⋆", D)], [])
    assert len(star_graph(g).labels) == 3


def test_induced_subgraph_unknown_vertex():
    with pytest.raises(UnknownVertex):
        induced_subgraph(example_graph(), ["a", "nope"])


def test_mcs_lowest_index_tie_break():
    g = mixed("abcd", "cccc", "")
    assert mcs_order(g) == ["a", "b", "c", "d"]
    g = mixed("abcd", "cccc", "ad bd")
    assert mcs_order(g) == ["a", "d", "b", "c"]


# ---------------------------------------------------------------------------
# the worked example


def test_example_numbering_and_parents():
    g = example_graph()
    nb = perfect_numbering(g)
    assert nb.order == ("b", "c", "f", "d", "e", "a")
    assert numbering_problems(g, nb.order) == []
    pa = continuous_parents(g, nb)
    assert set(pa["d"].discrete) == {"b", "c"} and pa["d"].continuous == ()
    assert pa["e"].discrete == ("c",) and pa["e"].continuous == ("d",)
    assert pa["a"].discrete == ("b",) and pa["a"].continuous == ()


def test_example_alternative_numbering():
    g = example_graph()
    order = ("c", "b", "f", "d", "e", "a")
    assert numbering_problems(g, order) == []
    pa = continuous_parents(g, PerfectNumbering(order))
    assert set(pa["d"].all) == {"b", "c"}
    assert set(pa["e"].all) == {"c", "d"}
    assert set(pa["a"].all) == {"b"}


def test_example_rip_cliques():
    g = example_graph()
    rip = rip_cliques(g)
    assert rip.cliques == (frozenset("bcd"), frozenset("f"), frozenset("cde"), frozenset("ab"))
    assert rip.separators == (frozenset(), frozenset(), frozenset("cd"), frozenset("b"))
    assert rip_problems(g, rip) == []


def test_reconstructed_cover_type_subgraph():
    # Edges implied by the parent sets listed for the class-7 cover-type model;
    # each parent set is completed because B-sets of a perfect numbering are.
    parents = {
        "v1": ["v52", "v54"],
        "v5": ["v6", "v10", "v11"],
        "v7": ["v2", "v3", "v52", "v53"],
        "v8": ["v2", "v3", "v7", "v52", "v53"],
        "v9": ["v2", "v3", "v7", "v8", "v52", "v53"],
        "v10": ["v11", "v12"],
    }
    discrete = {"v11", "v12", "v52", "v53", "v54"}
    edges = set()
    for j, pa in parents.items():
        edges |= {frozenset((j, u)) for u in pa}
        edges |= {frozenset(p) for p in itertools.combinations(pa, 2)}
    labels = sorted({v for e in edges for v in e}, key=lambda s: int(s[1:]))
    g = MixedGraph.build([(v, D if v in discrete else C) for v in labels], [tuple(e) for e in edges])
    assert is_decomposable(g)
    nb = perfect_numbering(g)
    assert numbering_problems(g, nb.order) == []
    pa = continuous_parents(g, nb)
    assert set(pa["v1"].all) == {"v52", "v54"}
    assert set(pa["v1"].discrete) == {"v52", "v54"}


# ---------------------------------------------------------------------------
# witnesses


def test_chordless_cycle_witness():
    g = mixed("abcd", "cccc", "ab bc cd da")
    check = is_decomposable(g)
    assert not check
    assert check.witness.kind == "chordless_cycle"
    assert set(check.witness.vertices) == set("abcd")
    with pytest.raises(NotDecomposable, match="chordless cycle"):
        perfect_numbering(g)


def test_forbidden_path_witness():
    g = mixed("xgy", "dcd", "xg gy")
    check = is_decomposable(g)
    assert not check
    assert check.witness.kind == "forbidden_path"
    assert check.witness.vertices in (("x", "g", "y"), ("y", "g", "x"))
    assert "forbidden path" in check.witness.describe()


def test_discrete_interior_path_is_allowed():
    # x - y - z all discrete: the path passes through a discrete vertex
    assert is_decomposable(mixed("xyz", "ddd", "xy yz"))
    # continuous leaf hanging off a discrete vertex
    assert is_decomposable(mixed("xyc", "ddc", "xy yc"))


def test_witness_is_valid_on_random_failures():
    rng = np.random.default_rng(5)
    found = 0
    for _ in range(300):
        n = int(rng.integers(4, 9))
        h = nx.gnp_random_graph(n, 0.4, seed=int(rng.integers(1 << 30)))
        g = MixedGraph.build([(f"n{v}", D if rng.random() < 0.5 else C) for v in h.nodes], [(f"n{a}", f"n{b}") for a, b in h.edges])
        check = is_decomposable(g)
        assert bool(check) == brute_decomposable(g)
        if check:
            continue
        found += 1
        w = check.witness.vertices
        if check.witness.kind == "chordless_cycle":
            assert len(w) >= 4
            s = set(w)
            for k, v in enumerate(w):
                assert g.neighbours[v] & s == {w[k - 1], w[(k + 1) % len(w)]}
        else:
            assert g.is_discrete(w[0]) and g.is_discrete(w[-1])
            assert not g.adjacent(w[0], w[-1])
            assert all(not g.is_discrete(v) for v in w[1:-1]) and len(w) >= 3
            assert all(g.adjacent(a, b) for a, b in zip(w, w[1:]))
    assert found > 20


# ---------------------------------------------------------------------------
# properties on random decomposable graphs


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 10))
def test_generated_graphs_are_decomposable(seed, n):
    g = random_decomposable(np.random.default_rng(seed), n)
    assert is_decomposable(g)
    assert brute_decomposable(g)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 10))
def test_perfect_numbering_passes_checker(seed, n):
    g = random_decomposable(np.random.default_rng(seed), n)
    nb = perfect_numbering(g)
    assert numbering_problems(g, nb.order) == []


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 10), data=st.data())
def test_induced_subgraph_stays_decomposable(seed, n, data):
    g = random_decomposable(np.random.default_rng(seed), n)
    keep = data.draw(st.lists(st.sampled_from(g.labels), unique=True))
    assert is_decomposable(induced_subgraph(g, keep))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 10))
def test_rip_cliques_mechanical_checks(seed, n):
    g = random_decomposable(np.random.default_rng(seed), n)
    rip = rip_cliques(g)
    assert set().union(*rip.cliques) == set(g.labels)
    hist: set = set()
    for k, (c, s, r) in enumerate(zip(rip.cliques, rip.separators, rip.residuals)):
        assert s == c & hist
        assert r == c - hist
        assert g.is_complete(s)
        if k:
            assert any(s <= rip.cliques[i] for i in range(k))
        assert all(not g.is_discrete(v) for v in r) or all(g.is_discrete(v) for v in s)
        hist |= c
    assert set(rip.cliques) == brute_maximal_cliques(g)
    assert rip_problems(g, rip) == []


def test_b_sets_of_perfect_numbering_are_complete():
    g = example_graph()
    for b in b_sets(g, perfect_numbering(g).order):
        assert g.is_complete(b)


def test_empty_graph_single_empty_clique():
    g = MixedGraph.build([], [])
    rip = rip_cliques(g)
    assert rip.cliques == (frozenset(),)
    assert rip.separators == (frozenset(),)


def test_isolated_vertices_get_own_cliques():
    g = mixed("xyz", "ddd", "")
    rip = rip_cliques(g)
    assert sorted(map(sorted, rip.cliques)) == [["x"], ["y"], ["z"]]
    assert all(s == frozenset() for s in rip.separators)


def test_rip_sequence_views():
    rip = RipSequence((frozenset("ab"), frozenset("bc"), frozenset("cd")))
    assert rip.separators == (frozenset(), frozenset("b"), frozenset("c"))
    assert rip.residuals == (frozenset("ab"), frozenset("c"), frozenset("d"))
    assert rip.histories == (frozenset("ab"), frozenset("abc"), frozenset("abcd"))
