import pytest

from algebra.errors import CapTooSmallError, InputError, NotGKMError
from graph.coxeter import CoxeterSystem, bruhat_moment_graph
from graph.moment_graph import Edge, MomentGraph, diamond, subgeneric
from sheaves.bmp import (
    bmp_character,
    bmp_verma_flag,
    build_bmp,
    format_series,
    projectivity_witness,
)
from sheaves.sheaf import global_sections, same_sheaf, structure_sheaf


@pytest.fixture
def sub():
    return subgeneric((1,))


@pytest.fixture(scope="module")
def a2():
    return bruhat_moment_graph(CoxeterSystem.from_type("A2"))


def test_bmp_from_bottom_of_subgeneric_is_structure_sheaf(sub):
    b = build_bmp(sub, "x", 8)
    assert b.order == ("x", "y")
    assert bmp_character(b) == {"x": {0: 1}, "y": {0: 1}}
    assert same_sheaf(b.sheaf, structure_sheaf(sub), 8)


def test_bmp_from_top_is_a_skyscraper(sub):
    b = build_bmp(sub, "y", 8)
    assert bmp_character(b) == {"y": {0: 1}}
    assert b.sheaf.stalk("x").is_zero


def test_trace_records_boundary_modules(sub):
    b = build_bmp(sub, "x", 8)
    entry = b.trace["y"]
    assert entry.generator_degrees == (0,)
    assert entry.delta_hilbert[0] == 1
    assert len(entry.representatives) == 1


def test_bmp_of_a2_has_trivial_characters(a2):
    b = build_bmp(a2, "e", 10)
    characters = bmp_character(b)
    assert set(characters) == set(a2.vertices)
    assert all(series == {0: 1} for series in characters.values())


def test_bmp_of_a2_sections_match_structure_algebra(a2):
    b = build_bmp(a2, "e", 10)
    ours = global_sections(b.sheaf, 10)
    theirs = global_sections(structure_sheaf(a2), 10)
    assert ours.module.hilbert_function() == theirs.module.hilbert_function()


def test_linear_extension_does_not_change_characters(a2):
    default = build_bmp(a2, "e", 10)
    other = build_bmp(a2, "e", 10, order=["e", "s2", "s1", "s2s1", "s1s2", "s1s2s1"])
    assert bmp_character(other) == bmp_character(default)


def test_cap_too_small(sub):
    with pytest.raises(CapTooSmallError) as info:
        build_bmp(sub, "x", 2)
    assert (info.value.vertex, info.value.degree, info.value.cap) == ("y", 0, 2)
    assert info.value.exit_code == 3


def test_non_gkm_graph_rejected():
    g = MomentGraph(2, ("x", "y", "z"), (Edge("x", "y", (1, 0)), Edge("x", "z", (2, 0))))
    with pytest.raises(NotGKMError) as info:
        build_bmp(g, "x", 6)
    assert info.value.exit_code == 2
    assert info.value.witness["vertex"] == "x"


def test_odd_cap_rejected(sub):
    with pytest.raises(InputError):
        build_bmp(sub, "x", 7)


@pytest.mark.parametrize("order", [["y", "x"], ["x"], ["x", "y", "y"]])
def test_bad_order_rejected(sub, order):
    with pytest.raises(InputError):
        build_bmp(sub, "x", 8, order=order)


def test_format_series():
    assert format_series({0: 1, 2: 1}) == "1 + t^2"
    assert format_series({0: 2, 4: 3}) == "2 + 3*t^4"
    assert format_series({}) == "0"


def test_bmp_is_projective_and_flabby(sub):
    report = projectivity_witness(build_bmp(sub, "x", 8))
    assert report.projective and report.flabby
    assert report.kind == "projective and flabby"
    assert report.as_dict()["edges_isomorphic"] == {"x—y": True}


def test_diamond_structure_sheaf_is_projective_but_not_flabby():
    report = projectivity_witness(structure_sheaf(diamond((1, 0), (0, 1))), 6)
    assert report.projective
    assert not report.flabby
    assert report.kind == "projective-like but not flabby"


def test_plain_sheaf_needs_a_cap(sub):
    with pytest.raises(InputError):
        projectivity_witness(structure_sheaf(sub))


def test_bmp_verma_flag(sub):
    flag = bmp_verma_flag(build_bmp(sub, "x", 8))
    assert flag
    assert flag.flag == {"x": (0,), "y": (2,)}


@pytest.mark.slow
def test_singular_schubert_variety_has_rank_two_stalk():
    c = CoxeterSystem.from_type("A3")
    g = bruhat_moment_graph(c).tilt()
    b = build_bmp(g, "s2s1s3s2", 12)
    characters = bmp_character(b)
    assert characters["s2"] == {0: 1, 2: 1}
    assert characters["e"] == {0: 1, 2: 1}
    assert characters["s2s1s3s2"] == {0: 1}
    assert projectivity_witness(b).kind == "projective and flabby"


@pytest.mark.slow
def test_every_bmp_sheaf_on_tilted_a3_has_a_verma_flag():
    g = bruhat_moment_graph(CoxeterSystem.from_type("A3")).tilt()
    for v in g.vertices:
        assert bmp_verma_flag(build_bmp(g, v, 12)), v
