import random

import pytest

from algebra.errors import InputError, NotInCategoryError
from algebra.polyeng import AmbientModule, full_module, polynomial_ring
from graph.coxeter import CoxeterSystem, bruhat_moment_graph
from graph.moment_graph import Edge, MomentGraph, diamond, generic, subgeneric
from sheaves.sheaf import (
    edge_stalk_hilbert,
    global_sections,
    is_flabby,
    is_generated_by_global_sections,
    sections,
    same_sheaf,
    skyscraper,
    structure_sheaf,
)
from sheaves.zmod import (
    ZModule,
    ZModuleMap,
    cokernel_torsion_witness,
    edge_module,
    is_closed_under_action,
    is_determined_by_local_relations,
    is_flabby_module,
    is_short_exact,
    local_closure,
    local_structure_algebra,
    localize,
    order_kernel,
    project,
    sections_of_localization,
    structure_algebra,
    support,
    supported_part,
    verma_flag,
    verma_module,
    vertex_sequence_dimensions,
)

LABELS = [(1, 0), (0, 1), (1, 1), (1, -1), (1, 2), (2, 1)]


@pytest.fixture
def sub():
    return subgeneric((1,))


@pytest.fixture
def Z(sub):
    return structure_algebra(sub, 8)


@pytest.fixture
def diagonal(sub):
    """S·(1,1): the diagonal, smaller than the structure algebra."""
    R = polynomial_ring(1)
    return ZModule.from_generators(sub, sub.vertices, [((R.one, R.one), 0)], 8, check=False)


@pytest.fixture(scope="module")
def a2():
    return bruhat_moment_graph(CoxeterSystem.from_type("A2"))


def random_gkm_graph(rng, max_vertices=6):
    while True:
        n = rng.randint(2, max_vertices)
        vertices = tuple(f"v{i}" for i in range(n))
        edges = [Edge(vertices[i], vertices[j], rng.choice(LABELS))
                 for i in range(n) for j in range(i + 1, n) if rng.random() < 0.45]
        g = MomentGraph(2, vertices, tuple(edges))
        if g.is_gkm():
            return g


def random_module(rng, g, D):
    R = polynomial_ring(2)
    x, y = R.gens
    gens = []
    for _ in range(rng.randint(1, 3)):
        if rng.random() < 0.5:
            element = tuple(R(rng.randint(-1, 1)) for _ in g.vertices)
            gens.append((element, 0))
        else:
            element = tuple(x * rng.randint(-1, 1) + y * rng.randint(-1, 1) for _ in g.vertices)
            gens.append((element, 2))
    gens.append((tuple(R.one for _ in g.vertices), 0))
    return ZModule.generated_by(g, g.vertices, gens, D)


# ------------------------------------------------------------------
# Structure algebras
# ------------------------------------------------------------------

def test_structure_algebra_of_subgeneric(Z):
    R = polynomial_ring(1)
    t = R.gens[0]
    assert Z.generator_degrees() == [0, 2]
    assert Z.hilbert_function() == {0: 1, 2: 2, 4: 2, 6: 2, 8: 2}
    assert [g.element for g in Z.module.minimal_generators] == [(R.one, R.one), (t, R.zero)]


def test_structure_algebra_of_generic_graph():
    Z = structure_algebra(generic(2), 6)
    assert Z.generator_degrees() == [0]
    assert Z.module.same_as(full_module(AmbientModule.free(2), 6))


def test_structure_algebra_of_a2(a2):
    Z = structure_algebra(a2, 14)
    assert Z.generator_degrees() == [0, 2, 2, 4, 4, 6]


def test_structure_algebra_of_a2_matches_shifted_free_module(a2):
    lengths = [0 if w == "e" else len(w) // 2 for w in a2.vertices]
    hf = structure_algebra(a2, 14).hilbert_function()
    for d in range(0, 8, 2):
        # dim S_{2k} = k + 1 in two variables
        assert hf[d] == sum(d // 2 - n + 1 for n in lengths if 2 * n <= d)
    assert [hf[d] for d in range(0, 8, 2)] == [1, 4, 9, 15]


def test_structure_algebra_is_closed_under_itself(Z):
    assert is_closed_under_action(Z, Z)


def test_diagonal_is_not_a_z_module(Z, diagonal):
    assert not is_closed_under_action(diagonal, Z)


def test_verma_module_is_a_z_module(sub, Z):
    assert is_closed_under_action(verma_module(sub, "x"), Z)


def test_span_that_is_not_a_z_module_rejected(sub):
    R = polynomial_ring(1)
    with pytest.raises(NotInCategoryError) as info:
        ZModule.from_generators(sub, sub.vertices, [((R.one, R.one), 0)], 4)
    assert info.value.witness["degree"] == 2


def test_generated_module_is_closed_under_action(sub, Z):
    R = polynomial_ring(1)
    M = ZModule.generated_by(sub, sub.vertices, [((R.one, R.one), 0)], 8)
    assert is_closed_under_action(M, Z)
    assert M.module.same_as(Z.module)


def test_global_sections_are_closed_under_action():
    sub, square = subgeneric((1,)), diamond((1, 0), (0, 1))
    cases = [
        (square, structure_sheaf(square)),
        (sub, skyscraper(sub, "y", 2)),
        (sub, localize(structure_algebra(sub, 8), 8)),
    ]
    for g, m in cases:
        gamma = ZModule.from_sections(g, global_sections(m, 8))
        assert is_closed_under_action(gamma, structure_algebra(g, 8))


# ------------------------------------------------------------------
# Coordinates
# ------------------------------------------------------------------

def test_projection_to_minimal_vertex(Z):
    Zx = project(Z, {"x"})
    assert Zx.coords == ("x",)
    assert Zx.module.same_as(full_module(AmbientModule.free(1), 8))


def test_part_supported_on_top_vertex(Z):
    Zy = supported_part(Z, {"y"})
    assert Zy.generator_degrees() == [2]
    assert support(Zy) == {"y"}


def test_support_of_skyscraper_sections(sub):
    gamma = global_sections(skyscraper(sub, "x"), 6)
    assert support(ZModule.from_sections(sub, gamma)) == {"x"}


def test_edge_module_of_structure_algebra(Z):
    assert edge_module(Z, 0).module.same_as(local_structure_algebra((1,), 8))


def test_edge_module_of_diagonal(diagonal):
    assert edge_module(diagonal, 0).module.same_as(local_structure_algebra((1,), 8))


def test_edge_module_of_one_sided_module(sub):
    V = verma_module(sub, "x")
    local = edge_module(V, 0)
    assert local.module.hilbert_function() == {0: 1, 2: 1, 4: 1, 6: 1, 8: 1}
    assert project(V, {"y"}).module.is_zero()


# ------------------------------------------------------------------
# Localization
# ------------------------------------------------------------------

def test_localized_structure_algebra_is_structure_sheaf(sub, Z):
    assert same_sheaf(localize(Z, 8), structure_sheaf(sub), 8)


def test_localized_verma_module_is_skyscraper(sub):
    assert same_sheaf(localize(verma_module(sub, "x"), 8), skyscraper(sub, "x"), 8)


def test_localized_verma_module_is_supported_at_its_vertex(sub):
    V = verma_module(sub, "x")
    assert V.coords == ("x",)
    assert localize(V, 8).support() == support(V) == {"x"}


def test_localization_drops_vanishing_coordinates(Z):
    assert localize(supported_part(Z, {"y"}), 8).support() == {"y"}


def test_localized_diagonal(sub, diagonal):
    L = localize(diagonal, 8)
    assert same_sheaf(L, structure_sheaf(sub), 8)
    assert edge_stalk_hilbert(L, 0, 8) == {0: 1, 2: 0, 4: 0, 6: 0, 8: 0}
    assert L.rho_map("x", 0).entries == {(0, 0): polynomial_ring(1).one}
    assert L.rho_map("y", 0).entries == {(1, 0): -polynomial_ring(1).one}


def test_localized_ideal_keeps_presentation(caplog):
    g = generic(2)
    R = polynomial_ring(2)
    x, y = R.gens
    M = ZModule.from_generators(g, g.vertices, [((x,), 2), ((y,), 2)], 6)
    with caplog.at_level("WARNING", logger="sheaves.zmod"):
        L = localize(M, 6)
    assert L.stalk("x").module.generator_degrees() == [2, 2]
    assert "not graded free" in L.notes["x"]
    assert "localized stalk at x is not graded free up to degree 6" in caplog.text


def test_determined_by_local_relations(sub, Z, diagonal):
    assert is_determined_by_local_relations(Z)
    verdict = is_determined_by_local_relations(diagonal)
    assert not verdict
    assert (verdict.degree, verdict.module_dim, verdict.closure_dim) == (2, 1, 2)
    assert is_determined_by_local_relations(verma_module(sub, "y"))


def test_flabby_modules(sub, Z):
    assert is_flabby_module(Z)
    assert is_flabby_module(verma_module(sub, "x"))
    report = is_flabby_module(structure_algebra(diamond((1, 0), (0, 1)), 6))
    assert not report
    assert report.mode == "exhaustive"


def test_flabbiness_mode_on_large_graphs(a2):
    report = is_flabby_module(structure_algebra(a2, 10), limit=3)
    assert report.mode == "criterion (3)"
    assert report


# ------------------------------------------------------------------
# Order filtration
# ------------------------------------------------------------------

def test_order_kernels_of_subgeneric(Z):
    assert order_kernel(Z, "x").generator_degrees() == [0]
    assert order_kernel(Z, "y").generator_degrees() == [2]


def test_order_kernels_of_verma_module(sub):
    V = verma_module(sub, "y")
    assert order_kernel(V, "y").generator_degrees() == [0]
    assert order_kernel(V, "x").is_zero()


def test_verma_flag_of_subgeneric(Z):
    flag = verma_flag(Z)
    assert flag
    assert flag.flag == {"x": (0,), "y": (2,)}


def test_verma_flag_of_shifted_verma_module(sub):
    assert verma_flag(verma_module(sub, "x", shift=4)).flag == {"x": (4,)}


def test_verma_flag_of_a2(a2):
    flag = verma_flag(structure_algebra(a2, 14))
    assert flag
    assert flag.flag == {x: (2 * (0 if x == "e" else len(x) // 2),) for x in a2.vertices}


def test_vertex_sequence_dimensions(Z):
    dims = vertex_sequence_dimensions(Z, {"x", "y"}, "y")
    assert all(whole == kern + rest for whole, kern, rest in dims.values())
    with pytest.raises(InputError):
        vertex_sequence_dimensions(Z, {"x", "y"}, "x")


# ------------------------------------------------------------------
# Exact sequences
# ------------------------------------------------------------------

def test_order_sequence_is_short_exact(Z):
    A, C = supported_part(Z, {"y"}), project(Z, {"x"})
    f, g = ZModuleMap.natural(A, Z), ZModuleMap.natural(Z, C)
    for mode in ("lemma", "exhaustive", "auto"):
        assert is_short_exact(f, g, mode=mode)


def test_identity_sequence_is_short_exact(Z):
    zero = project(Z, set())
    assert is_short_exact(ZModuleMap.natural(Z, Z), ZModuleMap.natural(Z, zero))


def test_torsion_cokernel_rejected(sub, Z):
    t = polynomial_ring(1).gens[0]
    A = ZModule.generated_by(sub, sub.vertices, [((t, t), 2)], 8)
    f = ZModuleMap.natural(A, Z)
    witness = cokernel_torsion_witness(f)
    assert witness == {"degree": 0, "element": ["1", "1"]}
    with pytest.raises(NotInCategoryError):
        is_short_exact(f, ZModuleMap.natural(Z, Z))


def test_non_exact_sequence_has_witness(Z):
    f = ZModuleMap.natural(Z, Z)
    report = is_short_exact(f, ZModuleMap.natural(Z, Z), mode="exhaustive")
    assert not report
    assert report.reason == "composite is not zero"


def test_exhaustive_exactness_respects_the_open_set_limit(Z):
    A, C = supported_part(Z, {"y"}), project(Z, {"x"})
    report = is_short_exact(ZModuleMap.natural(A, Z), ZModuleMap.natural(Z, C), mode="exhaustive", limit=1)
    assert report
    assert report.mode == "principal opens"
    report = is_short_exact(ZModuleMap.natural(Z, Z), ZModuleMap.natural(Z, Z), mode="exhaustive", limit=1)
    assert (bool(report), report.mode) == (False, "principal opens")
    assert report.reason == "composite is not zero"


def test_incompatible_maps_rejected(sub, Z):
    other = structure_algebra(subgeneric((2,)), 8)
    with pytest.raises(InputError):
        ZModuleMap.natural(Z, other)


# ------------------------------------------------------------------
# Adjunction on a random corpus
# ------------------------------------------------------------------

def check_adjunction(M, D):
    g = M.graph
    Z = structure_algebra(g, D)
    assert is_closed_under_action(M, Z)
    closure = local_closure(M, D)
    assert closure.same_as(sections_of_localization(M, D))
    closed = ZModule(g, M.blocks, closure)
    assert is_closed_under_action(closed, Z)
    assert local_closure(closed, D).same_as(closure)
    L = localize(M, D)
    assert same_sheaf(localize(closed, D), L, D)
    for k, e in enumerate(g.edges):
        assert sections(L, {e.u, e.v}, D).module.same_as(edge_module(M, k, D).module)
    return L


@pytest.mark.parametrize("seed", range(6))
def test_adjunction_on_random_modules(seed):
    rng = random.Random(seed)
    g = random_gkm_graph(rng, 4)
    check_adjunction(random_module(rng, g, 6), 6)


@pytest.mark.parametrize("seed", range(4))
def test_localization_is_inverted_on_gamma_reduced_graphs(seed):
    rng = random.Random(100 + seed)
    g = random_gkm_graph(rng, 5).gamma_reduction(rng.choice(LABELS))
    assert {g.component_kind(c) for c in g.connected_components()} <= {"generic", "subgeneric"}
    M = random_module(rng, g, 6)
    assert is_determined_by_local_relations(M)
    assert sections_of_localization(M, 6).same_as(M.module)


def test_structure_sheaf_adjunction(a2):
    m = structure_sheaf(a2)
    gamma = global_sections(m, 10)
    again = global_sections(localize(ZModule.from_sections(a2, gamma), 10), 10)
    assert again.module.same_as(gamma.module)


@pytest.mark.slow
def test_adjunction_and_flabbiness_criteria_on_corpus():
    rng = random.Random(1729)
    for _ in range(50):
        g = random_gkm_graph(rng)
        L = check_adjunction(random_module(rng, g, 10), 10)
        if is_generated_by_global_sections(L, 10):
            verdicts = {bool(is_flabby(L, 10, criterion=c)) for c in (2, 3, 4)}
            assert len(verdicts) == 1


def flabby_corpus(seed, count, D):
    rng = random.Random(seed)
    found = []
    for _ in range(200):
        g = random_gkm_graph(rng, 4)
        M = random_module(rng, g, D)
        closed = ZModule(g, M.blocks, local_closure(M, D))
        if is_flabby_module(closed, D):
            found.append(closed)
        if len(found) == count:
            break
    assert found
    return found


def test_vertex_sequence_dimensions_on_flabby_modules():
    for M in flabby_corpus(11, 4, 6):
        g = M.graph
        for I in g.open_subsets():
            for x in g.maximal(I):
                for whole, kern, rest in vertex_sequence_dimensions(M, I, x, 6).values():
                    assert whole == kern + rest


@pytest.mark.slow
def test_lemma_and_exhaustive_exactness_agree():
    checked = 0
    for M in flabby_corpus(23, 10, 6):
        g = M.graph
        for x in g.linear_extension():
            U = g.greater_eq(x)
            A, C = supported_part(M, U), project(M, set(g.vertices) - U)
            f, h = ZModuleMap.natural(A, M), ZModuleMap.natural(M, C)
            lemma = is_short_exact(f, h, mode="lemma")
            exhaustive = is_short_exact(f, h, mode="exhaustive")
            assert bool(lemma) == bool(exhaustive)
            checked += 1
            if checked == 20:
                return
