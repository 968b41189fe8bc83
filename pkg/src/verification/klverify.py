# src/verification/klverify.py

"""
Kazhdan–Lusztig polynomials by the classical recursion, and the comparison
of BMP stalk characters on tilted Bruhat graphs against them.

The identity "Hilbert series of B(w)^x = P_{x,w}(t²)" comes from geometry,
not from the sheaf engine, so every comparison is reported as an external
cross-check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import pandas as pd
from sympy import ZZ
from sympy.polys.rings import ring

from algebra.errors import InputError
from graph.coxeter import CoxeterSystem, enumerate_quotient, bruhat_moment_graph, id_to_word
from sheaves.bmp import bmp_character, build_bmp, format_series

logger = logging.getLogger(__name__)

Q_RING, q = ring("q", ZZ)

CHECK_LABEL = "external cross-check"


def _coefficients(p) -> tuple[int, ...]:
    if not p:
        return ()
    terms = {m[0]: int(c) for m, c in p.terms()}
    return tuple(terms.get(k, 0) for k in range(max(terms) + 1))


@dataclass(frozen=True)
class KLTable:
    group: str
    top: str
    polynomials: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def polynomial(self, x: str) -> tuple[int, ...]:
        """Coefficients c_0, c_1, ... of P_{x,w}; empty for x not below w."""
        return self.polynomials.get(x, ())

    def as_dict(self) -> dict:
        return {x: list(c) for x, c in self.polynomials.items()}


class KLSolver:
    """P_{x,u} for all pairs of a finite Coxeter group, computed by increasing length of u."""

    def __init__(self, system: CoxeterSystem, descent: str = "first"):
        if descent not in ("first", "last"):
            raise InputError(f"descent must be 'first' or 'last', got {descent!r}")
        self.system = system
        self.descent = descent
        self.cosets = enumerate_quotient(system, ())
        self.graph = bruhat_moment_graph(system, ())
        self._table: dict = {}

    @cached_property
    def elements(self) -> list[str]:
        return list(self.cosets.ids)

    def length(self, x: str) -> int:
        return self.cosets.length(x)

    def below(self, x: str, u: str) -> bool:
        return x == u or self.graph.is_less(x, u)

    def _left_descent(self, u: str) -> int:
        found = [i for i in range(self.system.rank)
                 if self.length(self.cosets.left_multiply(i, u)) < self.length(u)]
        return found[0] if self.descent == "first" else found[-1]

    def mu(self, z: str, v: str) -> int:
        """Coefficient of q^{(ℓ(v)−ℓ(z)−1)/2} in P_{z,v}, zero unless z < v with odd length difference."""
        gap = self.length(v) - self.length(z)
        if gap <= 0 or gap % 2 == 0 or not self.below(z, v):
            return 0
        coeffs = _coefficients(self.P(z, v))
        k = (gap - 1) // 2
        return coeffs[k] if k < len(coeffs) else 0

    def P(self, x: str, u: str):
        if not self.below(x, u):
            return Q_RING.zero
        if x == u:
            return Q_RING.one
        key = (x, u)
        if key not in self._table:
            self._table[key] = self._recurse(x, u)
        return self._table[key]

    def _recurse(self, x: str, w: str):
        s = self._left_descent(w)
        v = self.cosets.left_multiply(s, w)
        sx = self.cosets.left_multiply(s, x)
        c = 1 if self.length(sx) < self.length(x) else 0
        result = q ** (1 - c) * self.P(sx, v) + q ** c * self.P(x, v)
        for z in self.elements:
            if z == v or not self.below(x, z) or not self.below(z, v):
                continue
            if self.length(self.cosets.left_multiply(s, z)) > self.length(z):
                continue
            m = self.mu(z, v)
            if m:
                result -= m * q ** ((self.length(w) - self.length(z)) // 2) * self.P(x, z)
        return result

    def table(self, w: str) -> KLTable:
        polys = {x: _coefficients(self.P(x, w)) for x in self.elements if self.below(x, w)}
        return KLTable(self.system.name, w, polys)


def resolve_element(system: CoxeterSystem, text: str) -> str:
    """Vertex id of the group element written as a word, e.g. "s2 s1 s3 s2"."""
    cosets = enumerate_quotient(system, ())
    return cosets.element(id_to_word(text))


def kl_polynomials(c: CoxeterSystem, w: str, descent: str = "first") -> KLTable:
    top = resolve_element(c, w)
    return KLSolver(c, descent).table(top)


def mu(c: CoxeterSystem, x: str, w: str) -> int:
    return KLSolver(c).mu(resolve_element(c, x), resolve_element(c, w))


# ──────────────────────────────────────────────────────────────────
# BMP comparison
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class KLComparison:
    group: str
    top: str
    cap: int
    rows: tuple[dict, ...]

    @property
    def matched(self) -> bool:
        return all(r["match"] for r in self.rows)

    def mismatches(self) -> list[str]:
        return [r["vertex"] for r in self.rows if not r["match"]]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.rows))

    def as_dict(self) -> dict:
        return {
            "check": CHECK_LABEL,
            "group": self.group,
            "top": self.top,
            "verified_up_to_degree": self.cap,
            "match": self.matched,
            "vertices": [dict(r) for r in self.rows],
        }


def _as_series(coeffs) -> dict[int, int]:
    return {2 * k: c for k, c in enumerate(coeffs) if c}


def compare_bmp_kl(c: CoxeterSystem, w: str, D: int, descent: str = "first") -> KLComparison:
    """Build B(w) on the tilted Bruhat graph and compare every stalk with P_{x,w}(t²)."""
    top = resolve_element(c, w)
    solver = KLSolver(c, descent)
    if D < 2 * solver.length(top) + 2:
        raise InputError(f"degree cap {D} is below 2·ℓ(w) + 2 = {2 * solver.length(top) + 2}")
    table = solver.table(top)
    sheaf = build_bmp(solver.graph.tilt(), top, D)
    characters = bmp_character(sheaf)
    rows = []
    for x in solver.elements:
        expected = _as_series(table.polynomial(x))
        observed = characters.get(x, {})
        gap = solver.length(top) - solver.length(x)
        bound = 2 * ((gap - 1) // 2) if gap > 0 else 0
        rows.append({
            "vertex": x,
            "length": solver.length(x),
            "kl": format_series(expected) if expected else "0",
            "stalk": format_series(observed) if observed else "0",
            "rank_match": sum(expected.values()) == sum(observed.values()),
            "degree_bound_ok": max(observed, default=0) <= bound,
            "match": expected == observed,
        })
    report = KLComparison(c.name, top, D, tuple(rows))
    verdict = "match" if report.matched else f"mismatch at {report.mismatches()}"
    logger.info(f"{CHECK_LABEL} for {c.name}, w = {top}: {verdict}")
    return report
