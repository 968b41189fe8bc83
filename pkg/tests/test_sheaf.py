import pytest

from algebra.errors import InputError, NotInCategoryError
from algebra.polyeng import AmbientModule, GradedMap, full_module, image, polynomial_ring
from graph.coxeter import CoxeterSystem, bruhat_moment_graph
from graph.moment_graph import diamond, generic, subgeneric
from sheaves.sheaf import (
    EdgeStalk,
    GSheaf,
    SectionSpace,
    Stalk,
    delta_module,
    global_sections,
    is_flabby,
    is_generated_by_global_sections,
    restrict,
    sections,
    sheaf_order_kernel,
    skyscraper,
    structure_sheaf,
)


@pytest.fixture
def sub():
    return subgeneric((1,))


@pytest.fixture
def square():
    return diamond((1, 0), (0, 1))


def disconnected_edge_sheaf(g):
    """Stalks S, S and edge stalk S/α, but both restriction maps zero."""
    F = AmbientModule.free(g.dim)
    return GSheaf(g, {"x": Stalk(F), "y": Stalk(F)}, {0: EdgeStalk.cyclic(g.dim, (0,), g.edges[0].label)})


def test_structure_sheaf_of_generic_graph():
    m = structure_sheaf(generic(2))
    gamma = global_sections(m, 6)
    assert gamma.generator_degrees() == [0]
    assert gamma.module.hilbert_function() == {0: 1, 2: 2, 4: 3, 6: 4}


def test_sections_of_subgeneric_structure_sheaf(sub):
    R = polynomial_ring(1)
    t = R.gens[0]
    space = sections(structure_sheaf(sub), {"x", "y"}, 8)
    assert space.generator_degrees() == [0, 2]
    elements = [g.element for g in space.minimal_generators]
    assert elements == [(R.one, R.one), (t, R.zero)]


def test_sections_over_one_vertex_are_the_stalk(sub):
    space = sections(structure_sheaf(sub), {"y"}, 8)
    assert space.subgraph == ("y",)
    assert space.module.same_as(full_module(AmbientModule.free(1), 8))


def test_sections_reject_odd_cap(sub):
    with pytest.raises(InputError):
        sections(structure_sheaf(sub), {"x"}, 7)


def test_sections_reject_cap_below_stalk_shift(sub):
    m = skyscraper(sub, "x", 6)
    with pytest.raises(InputError):
        sections(m, {"x", "y"}, 4)
    assert sections(m, {"y"}, 4).module.is_zero()
    assert global_sections(m, 6).generator_degrees() == [6]


def test_structure_algebra_degrees_of_a2():
    g = bruhat_moment_graph(CoxeterSystem.from_type("A2"))
    space = global_sections(structure_sheaf(g), 14)
    assert space.generator_degrees() == [0, 2, 2, 4, 4, 6]


def test_skyscraper_sections(sub):
    m = skyscraper(sub, "y")
    gamma = global_sections(m, 8)
    assert gamma.generator_degrees() == [0]
    assert m.support() == {"y"}
    assert gamma.component("x").is_zero()


def test_skyscraper_unknown_vertex(sub):
    with pytest.raises(InputError):
        skyscraper(sub, "z")


def test_restricted_skyscraper_vanishes(sub):
    m = restrict(skyscraper(sub, "y"), {"x"})
    assert m.support() == set()
    assert global_sections(m, 6).module.is_zero()


def test_restriction_drops_edges_leaving_the_set(square):
    m = restrict(structure_sheaf(square), {"u", "v"})
    assert m.edge_stalk(0).ambient.rank == 0
    assert m.support() == {"u", "v"}


def test_restriction_is_functorial():
    g = bruhat_moment_graph(CoxeterSystem.from_type("A2"))
    m = structure_sheaf(g)
    whole = global_sections(m, 8)
    J = tuple(x for x in g.vertices if x in g.less_eq("s1s2"))
    K = g.less_eq("s1")
    through_J = SectionSpace(J, tuple(m.stalk(x).ambient for x in J), image(whole.projection(J), whole.module))
    direct = image(whole.projection(K), whole.module)
    assert image(through_J.projection(K), through_J.module).same_as(direct)


def test_sections_only_see_the_restricted_sheaf():
    g = bruhat_moment_graph(CoxeterSystem.from_type("A2"))
    m = structure_sheaf(g)
    I, J = g.less_eq("s1s2"), g.less_eq("s1")
    assert sections(restrict(m, I), J, 8).module.same_as(sections(m, J, 8).module)
    assert sections(restrict(m, I), I, 8).module.same_as(sections(m, I, 8).module)


def test_unknown_stalk_rejected(sub):
    with pytest.raises(InputError):
        GSheaf(sub, {"z": Stalk(AmbientModule.free(1))})


def test_rho_shape_checked(sub):
    F = AmbientModule.free(1)
    es = EdgeStalk.cyclic(1, (0,), (1,))
    bad = GradedMap(AmbientModule.free(1, (0, 0)), es.ambient)
    with pytest.raises(InputError):
        GSheaf(sub, {"x": Stalk(F), "y": Stalk(F)}, {0: es}, {("x", 0): bad})


def test_unannihilated_edge_stalk_reported(sub):
    F = AmbientModule.free(1)
    rho = {("x", 0): GradedMap.identity(F), ("y", 0): GradedMap.identity(F)}
    m = GSheaf(sub, {"x": Stalk(F), "y": Stalk(F)}, {0: EdgeStalk(F)}, rho)
    problems = m.validate(6)
    assert problems and "not annihilated" in problems[0]
    assert structure_sheaf(sub).validate(6) == []


def test_structure_sheaf_is_generated_by_global_sections(sub):
    assert is_generated_by_global_sections(structure_sheaf(sub), 8)


def test_skyscraper_is_generated_by_global_sections(sub):
    assert is_generated_by_global_sections(skyscraper(sub, "x", 2), 8)


def test_zero_restriction_maps_are_not_generated(sub):
    verdict = is_generated_by_global_sections(disconnected_edge_sheaf(sub), 8)
    assert not verdict
    assert (verdict.kind, verdict.location, verdict.degree) == ("edge", "x—y", 0)


def test_vanishing_edge_stalk_is_generated(sub):
    F = AmbientModule.free(1)
    m = GSheaf(sub, {"x": Stalk(F), "y": Stalk(F)})
    assert is_generated_by_global_sections(m, 8)


@pytest.mark.parametrize("criterion", [2, 3, 4])
def test_subgeneric_structure_sheaf_is_flabby(sub, criterion):
    assert is_flabby(structure_sheaf(sub), 8, criterion=criterion)


def test_diamond_structure_sheaf_is_not_flabby(square):
    report = is_flabby(structure_sheaf(square), 6)
    assert not report
    assert (report.vertex, report.degree) == ("w", 0)
    assert report.as_dict()["witness"] == {"degree": 0, "vertex": "w"}


def test_diamond_witness_under_other_criteria(square):
    m = structure_sheaf(square)
    third = is_flabby(m, 6, criterion=3)
    assert (third.flabby, third.vertex, third.degree) == (False, "w", 0)
    second = is_flabby(m, 6, criterion=2)
    assert (second.flabby, second.open_set, second.degree) == (False, ("u", "v"), 0)


@pytest.mark.parametrize("vertex", ["x", "y"])
def test_skyscrapers_are_flabby(sub, vertex):
    assert is_flabby(skyscraper(sub, vertex), 8)


def test_flabbiness_needs_global_generation(sub):
    with pytest.raises(NotInCategoryError):
        is_flabby(disconnected_edge_sheaf(sub), 8)


def test_unknown_criterion(sub):
    with pytest.raises(InputError):
        is_flabby(structure_sheaf(sub), 8, criterion=5)


def test_boundary_module_and_order_kernel(sub):
    m = structure_sheaf(sub)
    delta = delta_module(m, "y", 8)
    assert delta.edges == (0,)
    assert delta.hilbert_function()[0] == 1
    assert sheaf_order_kernel(m, "y", 8).generator_degrees() == [2]
    assert sheaf_order_kernel(m, "x", 8).generator_degrees() == [0]


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["A2", "A3"])
def test_structure_sheaves_of_bruhat_graphs_are_flabby(kind):
    g = bruhat_moment_graph(CoxeterSystem.from_type(kind))
    assert is_flabby(structure_sheaf(g), 14)
