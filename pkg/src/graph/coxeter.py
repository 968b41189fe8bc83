# src/graph/coxeter.py

"""
Crystallographic Coxeter systems and their Bruhat moment graphs.

The reflection representation acts on root coordinates: a vector v = Σ v_j α_j
is sent by s_i to v − (Σ_j a_ij v_j) α_i, where A = (a_ij) is the Cartan matrix
with a_ij = <α_i^∨, α_j>.  W/W_J is realized as the orbit of
λ = Σ_{k ∉ J} ω_k, whose stabilizer is exactly W_J.
"""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import factorial
from typing import Iterable, Sequence

from sympy import Matrix

from algebra.errors import InputError
from graph.moment_graph import Edge, MomentGraph

logger = logging.getLogger(__name__)

# a_ij · a_ji → m_ij
_COXETER_ORDER = {0: 2, 1: 3, 2: 4, 3: 6}

DEFAULT_MAX_ELEMENTS = 200_000


def _chain(n: int) -> list[list[int]]:
    a = [[0] * n for _ in range(n)]
    for i in range(n):
        a[i][i] = 2
        if i + 1 < n:
            a[i][i + 1] = a[i + 1][i] = -1
    return a


def cartan_matrix(kind: str, rank: int) -> list[list[int]]:
    """Bourbaki-numbered Cartan matrix of a finite crystallographic type."""
    if kind == "A" and rank >= 1:
        return _chain(rank)
    if kind in ("B", "C") and rank >= 2:
        a = _chain(rank)
        if kind == "B":
            a[rank - 1][rank - 2] = -2
        else:
            a[rank - 2][rank - 1] = -2
        return a
    if kind == "D" and rank >= 4:
        a = _chain(rank)
        a[rank - 1][rank - 2] = a[rank - 2][rank - 1] = 0
        a[rank - 1][rank - 3] = a[rank - 3][rank - 1] = -1
        return a
    if kind == "G" and rank == 2:
        return [[2, -1], [-3, 2]]
    raise InputError(f"unsupported Coxeter type {kind}{rank}")


def _group_order(kind: str, rank: int) -> int:
    if kind == "A":
        return factorial(rank + 1)
    if kind in ("B", "C"):
        return 2 ** rank * factorial(rank)
    if kind == "D":
        return 2 ** (rank - 1) * factorial(rank)
    if kind == "G":
        return 12
    raise InputError(f"unsupported Coxeter type {kind}{rank}")


_DIHEDRAL = {3: "A", 4: "B", 6: "G"}


@dataclass(frozen=True)
class CoxeterSystem:
    """A finite crystallographic Coxeter system given by its Cartan matrix."""

    name: str
    cartan: tuple[tuple[int, ...], ...]
    group_order: int | None = None

    def __post_init__(self):
        problems = self.check()
        if problems:
            raise InputError(f"invalid Coxeter data {self.name}: {problems[0]}")

    @classmethod
    def from_type(cls, spec: str) -> "CoxeterSystem":
        """Parse "A3", "B2", "D4", "G2" or "I2(m)" for m in {3, 4, 6}."""
        text = spec.strip().replace("_", "").upper()
        dihedral = re.fullmatch(r"I2\((\d+)\)", text)
        if dihedral:
            m = int(dihedral.group(1))
            if m not in _DIHEDRAL:
                raise InputError(f"I2({m}) is not crystallographic; only m in {{3, 4, 6}} is supported")
            kind = _DIHEDRAL[m]
            return cls(f"I2({m})", tuple(map(tuple, cartan_matrix(kind, 2))), 2 * m)
        match = re.fullmatch(r"([ABCDG])(\d+)", text)
        if not match:
            raise InputError(f"cannot parse Coxeter type {spec!r}")
        kind, rank = match.group(1), int(match.group(2))
        return cls(f"{kind}{rank}", tuple(map(tuple, cartan_matrix(kind, rank))), _group_order(kind, rank))

    @classmethod
    def from_cartan(cls, matrix: Sequence[Sequence[int]], name: str = "cartan") -> "CoxeterSystem":
        rows = tuple(tuple(int(c) for c in row) for row in matrix)
        for row in matrix:
            for c in row:
                if Fraction(c).denominator != 1:
                    raise InputError("non-crystallographic input: Cartan entries must be integers")
        return cls(name, rows)

    @property
    def rank(self) -> int:
        return len(self.cartan)

    @cached_property
    def coxeter_matrix(self) -> tuple[tuple[int, ...], ...]:
        n = self.rank
        return tuple(
            tuple(1 if i == j else _COXETER_ORDER[self.cartan[i][j] * self.cartan[j][i]] for j in range(n))
            for i in range(n)
        )

    def check(self) -> list[str]:
        """Structural checks on the Cartan matrix and the reflection representation."""
        a = self.cartan
        n = len(a)
        problems = []
        if n == 0 or any(len(row) != n for row in a):
            return ["Cartan matrix must be square and nonempty"]
        for i in range(n):
            if a[i][i] != 2:
                problems.append(f"diagonal entry a[{i}][{i}] = {a[i][i]} ≠ 2")
            for j in range(n):
                if i == j:
                    continue
                if a[i][j] > 0:
                    problems.append(f"off-diagonal entry a[{i}][{j}] is positive")
                if (a[i][j] == 0) != (a[j][i] == 0):
                    problems.append(f"a[{i}][{j}] and a[{j}][{i}] must vanish together")
                if a[i][j] * a[j][i] not in _COXETER_ORDER:
                    problems.append(f"a[{i}][{j}]·a[{j}][{i}] = {a[i][j] * a[j][i]} gives an infinite dihedral subgroup")
        if problems:
            return problems
        m = Matrix(a)
        for size in range(1, n + 1):
            for idx in itertools.combinations(range(n), size):
                if m.extract(list(idx), list(idx)).det() <= 0:
                    return [f"principal minor on {list(idx)} is not positive: the group is infinite"]
        for i in range(n):
            for v in _unit_vectors(n):
                if self.reflect(i, self.reflect(i, v)) != v:
                    problems.append(f"s{i + 1}² ≠ 1")
                    break
        for i, j in itertools.combinations(range(n), 2):
            order = self.coxeter_matrix[i][j]
            for v in _unit_vectors(n):
                w = v
                for _ in range(order):
                    w = self.reflect(i, self.reflect(j, w))
                if w != v:
                    problems.append(f"(s{i + 1}s{j + 1})^{order} ≠ 1")
                    break
        return problems

    def reflect(self, i: int, v: Sequence[Fraction]) -> tuple[Fraction, ...]:
        """Simple reflection s_i applied to a root-coordinate vector."""
        pairing = sum(self.cartan[i][j] * v[j] for j in range(self.rank))
        if not pairing:
            return tuple(v)
        out = list(v)
        out[i] = out[i] - pairing
        return tuple(out)

    def apply_word(self, word: Sequence[int], v: Sequence[Fraction]) -> tuple[Fraction, ...]:
        """Apply s_{w1} s_{w2} ... s_{wk} (rightmost first)."""
        out = tuple(v)
        for i in reversed(word):
            out = self.reflect(i, out)
        return out

    @cached_property
    def fundamental_weights(self) -> tuple[tuple[Fraction, ...], ...]:
        """ω_k in root coordinates: column k of the inverse Cartan matrix."""
        inv = Matrix(self.cartan).inv()
        return tuple(
            tuple(Fraction(int(inv[j, k].p), int(inv[j, k].q)) for j in range(self.rank))
            for k in range(self.rank)
        )

    def weight_for(self, parabolic: Iterable[int]) -> tuple[Fraction, ...]:
        """λ = Σ ω_k over simple reflections outside the parabolic subset."""
        parabolic = set(parabolic)
        lam = [Fraction(0)] * self.rank
        for k in range(self.rank):
            if k not in parabolic:
                lam = [a + b for a, b in zip(lam, self.fundamental_weights[k])]
        return tuple(lam)

    @cached_property
    def reflections(self) -> tuple[tuple[tuple[Fraction, ...], ...], ...]:
        """All reflections w s_i w⁻¹ as matrices acting on root coordinates."""
        full = enumerate_quotient(self, ())
        found = {}
        for word in full.words:
            for i in range(self.rank):
                conj = word + (i,) + tuple(reversed(word))
                cols = tuple(self.apply_word(conj, v) for v in _unit_vectors(self.rank))
                key = tuple(tuple(cols[c][r] for c in range(self.rank)) for r in range(self.rank))
                found.setdefault(key, None)
        return tuple(found)


def _unit_vectors(n: int) -> list[tuple[Fraction, ...]]:
    return [tuple(Fraction(int(i == k)) for i in range(n)) for k in range(n)]


def _apply_matrix(m, v):
    return tuple(sum(row[j] * v[j] for j in range(len(v))) for row in m)


def word_to_id(word: Sequence[int]) -> str:
    return "".join(f"s{i + 1}" for i in word) if word else "e"


def id_to_word(text: str) -> tuple[int, ...]:
    """Parse "e", "s2s1s3s2", "s2 s1 s3 s2" or "2,1,3,2" into 0-based letters."""
    text = text.strip()
    if text in ("", "e", "1"):
        return ()
    letters = re.findall(r"\d+", text)
    if not letters:
        raise InputError(f"cannot parse a reduced word from {text!r}")
    return tuple(int(k) - 1 for k in letters)


@dataclass
class CosetEnumeration:
    """Minimal coset representatives of W/W_J with ShortLex-minimal reduced words."""

    system: CoxeterSystem
    parabolic: tuple[int, ...]
    weight: tuple[Fraction, ...]
    words: list[tuple[int, ...]]
    points: list[tuple[Fraction, ...]]

    @cached_property
    def ids(self) -> list[str]:
        return [word_to_id(w) for w in self.words]

    @cached_property
    def by_point(self) -> dict:
        return {p: k for k, p in enumerate(self.points)}

    @cached_property
    def by_id(self) -> dict:
        return {x: k for k, x in enumerate(self.ids)}

    def length(self, x: str) -> int:
        return len(self.words[self.by_id[x]])

    def left_multiply(self, i: int, x: str) -> str:
        """Vertex of s_i · x (may equal x in a proper quotient)."""
        p = self.system.reflect(i, self.points[self.by_id[x]])
        return self.ids[self.by_point[p]]

    def element(self, word: Sequence[int]) -> str:
        """Vertex reached by an arbitrary word acting on λ."""
        p = self.system.apply_word(word, self.weight)
        if p not in self.by_point:
            raise InputError(f"word {word_to_id(word)} does not reach a known coset")
        return self.ids[self.by_point[p]]


def enumerate_quotient(system: CoxeterSystem, parabolic: Iterable[int] = (),
                       max_elements: int | None = None) -> CosetEnumeration:
    """Breadth-first orbit of λ; each new point keeps its lexicographically least word."""
    parabolic = tuple(sorted(set(parabolic)))
    for k in parabolic:
        if not 0 <= k < system.rank:
            raise InputError(f"parabolic generator s{k + 1} outside rank {system.rank}")
    limit = max_elements or system.group_order or DEFAULT_MAX_ELEMENTS
    lam = system.weight_for(parabolic)
    seen = {lam: ()}
    words, points = [()], [lam]
    frontier = [lam]
    while frontier:
        candidates: dict = {}
        for p in frontier:
            for i in range(system.rank):
                q = system.reflect(i, p)
                if q in seen:
                    continue
                word = (i,) + seen[p]
                if q not in candidates or word < candidates[q]:
                    candidates[q] = word
        frontier = sorted(candidates, key=candidates.get)
        for q in frontier:
            seen[q] = candidates[q]
            words.append(candidates[q])
            points.append(q)
        if len(points) > limit:
            raise InputError(f"quotient of {system.name} exceeds {limit} elements: the group is infinite")
    logger.debug(f"enumerated {len(points)} cosets of {system.name} modulo {parabolic}")
    return CosetEnumeration(system, parabolic, lam, words, points)


def bruhat_moment_graph(system: CoxeterSystem, parabolic: Iterable[int] = ()) -> MomentGraph:
    """
    The moment graph of W/W_J: vertices are minimal coset representatives,
    edges w.λ — tw.λ for every reflection t moving w.λ, labelled by the
    difference vector and oriented by increasing length.
    """
    cosets = enumerate_quotient(system, parabolic)
    pairs = {}
    for k, p in enumerate(cosets.points):
        for t in system.reflections:
            q = _apply_matrix(t, p)
            if q == p:
                continue
            j = cosets.by_point[q]
            lo, hi = (k, j) if len(cosets.words[k]) < len(cosets.words[j]) else (j, k)
            if (lo, hi) in pairs:
                continue
            if len(cosets.words[lo]) == len(cosets.words[hi]):
                raise InputError(f"reflection joins two cosets of equal length in {system.name}")
            label = tuple(a - b for a, b in zip(cosets.points[lo], cosets.points[hi]))
            pairs[(lo, hi)] = label
    edges = tuple(Edge(cosets.ids[lo], cosets.ids[hi], label) for (lo, hi), label in sorted(pairs.items()))
    quotient = [f"s{k + 1}" for k in sorted(set(parabolic))] or "∅"
    logger.info(f"Bruhat moment graph of {system.name} / {quotient}: {len(cosets.ids)} vertices, {len(edges)} edges")
    return MomentGraph(system.rank, tuple(cosets.ids), edges)
