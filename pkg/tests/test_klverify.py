import pytest

from algebra.errors import InputError
from graph.coxeter import CoxeterSystem
from verification.klverify import (
    CHECK_LABEL,
    KLSolver,
    compare_bmp_kl,
    kl_polynomials,
    mu,
    resolve_element,
)


@pytest.fixture(scope="module")
def a2():
    return CoxeterSystem.from_type("A2")


@pytest.fixture(scope="module")
def a3():
    return CoxeterSystem.from_type("A3")


def test_a2_polynomials_are_trivial(a2):
    table = kl_polynomials(a2, "s1 s2 s1")
    assert table.top == "s1s2s1"
    assert len(table.polynomials) == 6
    assert all(p == (1,) for p in table.polynomials.values())


@pytest.mark.parametrize("m", [4, 6])
def test_dihedral_polynomials_are_trivial(m):
    c = CoxeterSystem.from_type(f"I2({m})")
    solver = KLSolver(c)
    top = max(solver.elements, key=solver.length)
    table = solver.table(top)
    assert len(table.polynomials) == 2 * m
    assert set(table.polynomials.values()) == {(1,)}


def test_a3_singular_element(a3):
    table = kl_polynomials(a3, "s2 s1 s3 s2")
    assert len(table.polynomials) == 14
    assert table.polynomial("s2") == (1, 1)
    singular = {x for x, p in table.polynomials.items() if p == (1, 1)}
    assert singular == {"e", "s2"}
    assert all(p == (1,) for x, p in table.polynomials.items() if x not in singular)


def test_polynomial_outside_interval_is_empty(a2):
    table = kl_polynomials(a2, "s1")
    assert table.polynomial("s2") == ()
    assert table.as_dict() == {"e": [1], "s1": [1]}


def test_descent_choice_does_not_matter(a3):
    first = kl_polynomials(a3, "s2s1s3s2", descent="first")
    last = kl_polynomials(a3, "s2s1s3s2", descent="last")
    assert first.polynomials == last.polynomials


def test_unknown_descent_rejected(a2):
    with pytest.raises(InputError):
        KLSolver(a2, descent="middle")


def test_mu_coefficients(a2, a3):
    assert mu(a2, "e", "s1") == 1
    assert mu(a3, "s2", "s2s1s3s2") == 1
    assert mu(a3, "e", "s2s1s3s2") == 0


def test_resolve_element_uses_shortlex_ids(a2):
    assert resolve_element(a2, "s2 s1 s2") == "s1s2s1"
    assert resolve_element(a2, "e") == "e"


def test_bmp_matches_kl_on_a2(a2):
    report = compare_bmp_kl(a2, "s1s2s1", 8)
    assert report.matched
    assert report.mismatches() == []
    data = report.as_dict()
    assert data["check"] == CHECK_LABEL
    assert data["verified_up_to_degree"] == 8
    frame = report.frame()
    assert len(frame) == 6
    assert frame["match"].all()


def test_cap_below_length_bound_rejected(a2):
    with pytest.raises(InputError):
        compare_bmp_kl(a2, "s1s2s1", 6)


@pytest.mark.slow
def test_bmp_matches_kl_on_a3(a3):
    report = compare_bmp_kl(a3, "s2s1s3s2", 12)
    assert report.matched
    rows = {r["vertex"]: r for r in report.rows}
    assert rows["s2"]["kl"] == rows["s2"]["stalk"] == "1 + t^2"
    assert all(r["degree_bound_ok"] for r in report.rows)


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["A2", "I2(4)", "I2(6)"])
def test_bmp_matches_kl_for_every_top_vertex(kind):
    c = CoxeterSystem.from_type(kind)
    solver = KLSolver(c)
    for w in solver.elements:
        report = compare_bmp_kl(c, w, 2 * solver.length(w) + 2)
        assert report.matched, (kind, w, report.mismatches())
