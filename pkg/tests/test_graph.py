import random
from fractions import Fraction

import pytest

from algebra.errors import InputError
from graph.coxeter import (
    CoxeterSystem,
    bruhat_moment_graph,
    enumerate_quotient,
    id_to_word,
    word_to_id,
)
from graph.moment_graph import Edge, MomentGraph, diamond, generic, subgeneric


@pytest.fixture(scope="module")
def a2():
    return bruhat_moment_graph(CoxeterSystem.from_type("A2"))


def test_subgeneric_is_valid():
    assert subgeneric((1,)).validate() == []


def test_edge_between_incomparable_vertices():
    g = MomentGraph(1, ("a", "b", "c"), (Edge("a", "b", (1,)),), order_from_edges=False)
    problems = g.validate()
    assert len(problems) == 1
    assert "incomparable" in problems[0]


def test_zero_label():
    g = MomentGraph(1, ("x", "y"), (Edge("x", "y", (0,)),))
    problems = g.validate()
    assert len(problems) == 1
    assert "zero label" in problems[0]


def test_cycle_detected():
    g = MomentGraph(1, ("x", "y"), relations=(("x", "y"), ("y", "x")), order_from_edges=False)
    assert any("antisymmetric" in p for p in g.validate())


def test_bruhat_graph_of_a2_is_gkm(a2):
    assert a2.is_gkm()


def test_proportional_labels_break_gkm():
    g = MomentGraph(2, ("x", "y", "z"), (Edge("x", "y", (1, 0)), Edge("x", "z", (2, 0))))
    verdict = g.is_gkm()
    assert not verdict
    assert verdict.vertex == "x"
    assert verdict.as_dict()["edges"] == ["x—y", "x—z"]


def test_generic_graph_is_gkm():
    assert generic().is_gkm()


def test_open_sets_of_subgeneric():
    g = subgeneric()
    assert g.is_open({"x"})
    assert not g.is_open({"y"})
    assert g.edges_into("y") == [0]
    assert g.edges_into("x") == []


def test_top_of_a2_lies_above_everything(a2):
    assert a2.less_eq("s1s2s1") == frozenset(a2.vertices)
    assert a2.maximal(a2.vertices) == ["s1s2s1"]
    assert a2.minimal(a2.vertices) == ["e"]


def test_open_subsets_are_downward_closed(a2):
    opens = a2.open_subsets()
    assert frozenset() in opens and frozenset(a2.vertices) in opens
    assert all(a2.is_open(I) for I in opens)
    with pytest.raises(InputError):
        a2.open_subsets(limit=3)


def test_gamma_reduction_along_a_simple_root(a2):
    k = next(k for k, e in enumerate(a2.edges) if e.endpoints == frozenset({"e", "s1"}))
    reduced = a2.gamma_reduction(a2.edges[k].label)
    components = reduced.connected_components()
    assert len(components) == 3
    assert all(reduced.component_kind(c) == "subgeneric" for c in components)
    assert reduced.less_eq("s1s2s1") == a2.less_eq("s1s2s1")


def test_gamma_reduction_without_matching_label():
    g = diamond((1, 0), (0, 1))
    reduced = g.gamma_reduction((1, 1))
    assert reduced.edges == ()
    assert all(reduced.component_kind(c) == "generic" for c in reduced.connected_components())


def test_gamma_reduction_keeps_matching_edge():
    g = subgeneric((3,))
    assert g.gamma_reduction((1,)).edges == g.edges


def test_gamma_reduction_is_idempotent(a2):
    for e in a2.edges:
        once = a2.gamma_reduction(e.label)
        assert once.gamma_reduction(e.label) == once


@pytest.mark.parametrize("kind", ["A2", "A3", "B2", "I2(6)"])
def test_gamma_reduced_bruhat_graphs_split_into_small_components(kind):
    g = bruhat_moment_graph(CoxeterSystem.from_type(kind))
    for e in g.edges:
        reduced = g.gamma_reduction(e.label)
        kinds = {reduced.component_kind(c) for c in reduced.connected_components()}
        assert kinds <= {"generic", "subgeneric"}
        assert "subgeneric" in kinds


def test_tilt_reverses_order():
    t = subgeneric().tilt()
    assert t.is_less("y", "x")
    assert t.validate() == []


def test_tilt_is_an_involution(a2):
    assert a2.tilt().tilt() == a2


def test_tilt_preserves_gkm_on_random_graphs():
    rng = random.Random(2024)
    for _ in range(20):
        n = rng.randint(2, 5)
        vertices = tuple(f"v{i}" for i in range(n))
        edges = []
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.5:
                    edges.append(Edge(vertices[i], vertices[j], (rng.randint(-2, 2) or 1, rng.randint(-2, 2))))
        g = MomentGraph(2, vertices, tuple(edges))
        assert bool(g.tilt().is_gkm()) == bool(g.is_gkm())


def test_a2_bruhat_graph_shape(a2):
    assert len(a2.vertices) == 6
    assert len(a2.edges) == 9
    assert a2.vertices[0] == "e"
    assert a2.validate() == []


def test_a1_is_subgeneric():
    g = bruhat_moment_graph(CoxeterSystem.from_type("A1"))
    assert g.vertices == ("e", "s1")
    assert len(g.edges) == 1
    assert g.component_kind(g.vertices) == "subgeneric"


def test_a2_modulo_s1_is_projective_plane():
    g = bruhat_moment_graph(CoxeterSystem.from_type("A2"), (0,))
    assert len(g.vertices) == 3
    assert len(g.edges) == 3
    assert g.is_gkm()


@pytest.mark.parametrize("kind, order", [("A3", 24), ("B2", 8), ("G2", 12), ("I2(4)", 8), ("I2(6)", 12)])
def test_group_orders(kind, order):
    assert len(enumerate_quotient(CoxeterSystem.from_type(kind)).ids) == order


def test_lengths_follow_shortlex_words():
    cosets = enumerate_quotient(CoxeterSystem.from_type("A3"))
    assert cosets.length("s2s1s3s2") == 4
    assert max(cosets.length(x) for x in cosets.ids) == 6
    assert cosets.left_multiply(1, "s1s3s2") == "s2s1s3s2"


def test_non_crystallographic_dihedral_rejected():
    with pytest.raises(InputError):
        CoxeterSystem.from_type("I2(5)")


def test_infinite_type_rejected():
    with pytest.raises(InputError):
        CoxeterSystem.from_cartan([[2, -2], [-2, 2]])


def test_word_parsing():
    assert id_to_word("s2 s1 s3 s2") == (1, 0, 2, 1)
    assert id_to_word("2,1,3,2") == (1, 0, 2, 1)
    assert id_to_word("e") == ()
    assert word_to_id((1, 0)) == "s2s1"


def test_builders():
    assert len(generic().vertices) == 1 and generic().edges == ()
    assert len(subgeneric((1,)).vertices) == 2 and len(subgeneric((1,)).edges) == 1
    d = diamond((1, 0), (0, 1))
    assert d.is_gkm()
    assert d.less("w") == frozenset({"u", "v"})
    assert d.edges[0].label == (Fraction(1), Fraction(0))
