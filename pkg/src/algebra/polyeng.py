# src/algebra/polyeng.py

"""
Exact graded linear algebra over S = Q[x1, ..., xn].

Every module handled by the engine is a finitely generated graded submodule of
a fixed ambient sum of shifted free modules S[k] and cyclic quotients
(S/αS)[k].  Instead of Gröbner machinery, submodules are materialized degree by
degree up to a cap D: the degree-d slice is a rational vector space, stored as a
reduced row-echelon basis over the monomial coordinates of the ambient slice.

Conventions:
  - degree = 2 × polynomial degree, so only even degrees are populated;
  - a component with shift k holds degree-d elements as polynomials of
    degree d − k (its lowest degree is k);
  - elements of S/αS are normal forms in which the pivot variable of α (its
    first nonzero coordinate) has been substituted away;
  - slice coordinates are ordered by component, then by descending grlex.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from math import comb
from typing import Iterable, NamedTuple, Sequence

from sympy import QQ
from sympy.polys.matrices import DomainMatrix
from sympy.polys.orderings import grlex
from sympy.polys.rings import PolyElement, PolyRing, ring

from algebra.errors import DegreeError, InputError

logger = logging.getLogger(__name__)


# ──────────────────────────────────────────────────────────────────
# Scalars and polynomials
# ──────────────────────────────────────────────────────────────────

def to_scalar(value):
    """Convert int / Fraction / "p/q" / QQ element into a QQ element."""
    if isinstance(value, str):
        value = Fraction(value.strip())
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    if isinstance(value, int):
        return QQ(value)
    return QQ.convert(value)


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(int(value.numerator), int(value.denominator))


def scalar_to_str(value) -> str:
    """Canonical "num/den" text form (reduced, positive denominator)."""
    f = to_fraction(value)
    return f"{f.numerator}/{f.denominator}"


@lru_cache(maxsize=None)
def polynomial_ring(dim: int) -> PolyRing:
    """The graded ring S = Q[x1..xn] with grlex order."""
    if dim < 1:
        raise InputError(f"dimension of V must be positive, got {dim}")
    names = ",".join(f"x{i}" for i in range(1, dim + 1))
    R, *_ = ring(names, QQ, grlex)
    return R


def linear_form(coeffs: Sequence, R: PolyRing) -> PolyElement:
    if len(coeffs) != R.ngens:
        raise InputError(f"linear form has {len(coeffs)} coordinates, ring has {R.ngens} variables")
    p = R.zero
    for c, x in zip(coeffs, R.gens):
        c = to_scalar(c)
        if c:
            p += x * c
    return p


def poly_degree(p: PolyElement) -> int | None:
    """Degree of a homogeneous polynomial (twice its polynomial degree), None for zero."""
    if not p:
        return None
    degrees = {sum(m) for m in p.keys()}
    if len(degrees) != 1:
        raise DegreeError(f"polynomial {p.as_expr()} is not homogeneous")
    return 2 * degrees.pop()


def dim_S(dim: int, d: int) -> int:
    """Dimension of the degree-d part of S = Q[x1..x_dim]."""
    if d < 0 or d % 2:
        return 0
    return comb(dim - 1 + d // 2, dim - 1)


@lru_cache(maxsize=None)
def monomials(dim: int, e: int, skip: int | None = None) -> tuple[tuple[int, ...], ...]:
    """Exponent vectors of polynomial degree e, descending grlex, optionally avoiding one variable."""
    if e < 0:
        return ()
    variables = [i for i in range(dim) if i != skip]
    result = []
    for combo in itertools.combinations_with_replacement(variables, e):
        exps = [0] * dim
        for i in combo:
            exps[i] += 1
        result.append(tuple(exps))
    result.sort(key=grlex, reverse=True)
    return tuple(result)


# ──────────────────────────────────────────────────────────────────
# Sparse exact linear algebra (sympy DomainMatrix over QQ)
# ──────────────────────────────────────────────────────────────────

def _domain_matrix(rows: Sequence[dict], ncols: int) -> DomainMatrix:
    sdm = {i: dict(r) for i, r in enumerate(rows) if r}
    return DomainMatrix(sdm, (len(rows), ncols), QQ)


def row_reduce(vectors: Sequence[dict], ncols: int) -> tuple[list[dict], tuple[int, ...]]:
    """Reduced row-echelon basis of the span of sparse vectors."""
    vectors = [v for v in vectors if v]
    if not vectors or ncols == 0:
        return [], ()
    rref, pivots = _domain_matrix(vectors, ncols).rref()
    rep = rref.to_sparse().rep
    rows = [dict(rep.get(k, {})) for k in range(len(pivots))]
    return rows, tuple(pivots)


def nullspace(rows: Sequence[dict], ncols: int) -> list[dict]:
    """Basis of {x : A x = 0} for the matrix A with the given sparse rows."""
    if ncols == 0:
        return []
    reduced, pivots = row_reduce(rows, ncols)
    pivot_set = set(pivots)
    basis = []
    for free in range(ncols):
        if free in pivot_set:
            continue
        v = {free: QQ.one}
        for k, p in enumerate(pivots):
            c = reduced[k].get(free)
            if c:
                v[p] = -c
        basis.append(v)
    return basis


def transpose(rows: Sequence[dict], ncols: int) -> list[dict]:
    cols = [dict() for _ in range(ncols)]
    for k, row in enumerate(rows):
        for j, c in row.items():
            cols[j][k] = c
    return cols


def combine(coeffs: dict, vectors: Sequence[dict]) -> dict:
    """Σ coeffs[k] · vectors[k] as a sparse vector."""
    out: dict = {}
    for k, c in coeffs.items():
        axpy(out, c, vectors[k])
    return out


def axpy(target: dict, c, vec: dict) -> None:
    """target += c · vec, in place, dropping cancelled entries."""
    if not c:
        return
    for j, v in vec.items():
        s = target.get(j, QQ.zero) + c * v
        if s:
            target[j] = s
        else:
            target.pop(j, None)


@dataclass(frozen=True, eq=False)
class Slice:
    """A subspace of Q^ncols held as a reduced row-echelon basis."""

    ncols: int
    rows: tuple = ()
    pivots: tuple = ()

    @classmethod
    def span(cls, vectors: Iterable[dict], ncols: int) -> "Slice":
        rows, pivots = row_reduce(list(vectors), ncols)
        return cls(ncols, tuple(rows), pivots)

    @property
    def dim(self) -> int:
        return len(self.rows)

    def reduce(self, vec: dict) -> dict:
        """Normal form of vec modulo the subspace (zero on pivot columns)."""
        out = dict(vec)
        for row, p in zip(self.rows, self.pivots):
            c = out.get(p)
            if c:
                axpy(out, -c, row)
        return out

    def contains(self, vec: dict) -> bool:
        return not self.reduce(vec)

    def extend(self, vectors: Iterable[dict]) -> "Slice":
        return Slice.span(list(self.rows) + list(vectors), self.ncols)

    def same_space(self, other: "Slice") -> bool:
        return (self.ncols == other.ncols and self.pivots == other.pivots
                and all(a == b for a, b in zip(self.rows, other.rows)))

    def is_subspace_of(self, other: "Slice") -> bool:
        return all(other.contains(r) for r in self.rows)


# ──────────────────────────────────────────────────────────────────
# Ambient modules
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Component:
    """One summand S[shift] or (S/αS)[shift] of an ambient module."""

    shift: int = 0
    annihilator: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        if self.shift % 2:
            raise DegreeError(f"component shift must be even, got {self.shift}")
        if self.annihilator is not None:
            ann = tuple(to_fraction(c) for c in self.annihilator)
            if not any(ann):
                raise InputError("annihilator must be a nonzero linear form")
            object.__setattr__(self, "annihilator", ann)

    @property
    def pivot(self) -> int | None:
        if self.annihilator is None:
            return None
        return next(i for i, c in enumerate(self.annihilator) if c)


@dataclass(frozen=True)
class AmbientModule:
    """Ordered direct sum of shifted free and cyclic-quotient components."""

    dim: int
    components: tuple[Component, ...] = ()

    @classmethod
    def free(cls, dim: int, shifts: Iterable[int] = (0,)) -> "AmbientModule":
        return cls(dim, tuple(Component(int(k)) for k in shifts))

    @classmethod
    def quotient(cls, dim: int, shifts: Iterable[int], alpha: Sequence) -> "AmbientModule":
        alpha = tuple(to_fraction(c) for c in alpha)
        return cls(dim, tuple(Component(int(k), alpha) for k in shifts))

    @classmethod
    def direct_sum(cls, dim: int, parts: Iterable["AmbientModule"]) -> "AmbientModule":
        comps: list[Component] = []
        for part in parts:
            if part.dim != dim:
                raise InputError("cannot sum ambients over different rings")
            comps.extend(part.components)
        return cls(dim, tuple(comps))

    @property
    def rank(self) -> int:
        return len(self.components)

    @property
    def shifts(self) -> tuple[int, ...]:
        return tuple(c.shift for c in self.components)

    @property
    def is_free(self) -> bool:
        return all(c.annihilator is None for c in self.components)

    @cached_property
    def ring(self) -> PolyRing:
        return polynomial_ring(self.dim)

    @cached_property
    def _substitutions(self) -> dict:
        R = self.ring
        subs = {}
        for i, comp in enumerate(self.components):
            p = comp.pivot
            if p is None:
                continue
            a = [to_scalar(c) for c in comp.annihilator]
            replacement = R.zero
            for j, c in enumerate(a):
                if j != p and c:
                    replacement -= R.gens[j] * (c / a[p])
            subs[i] = (p, replacement)
        return subs

    @cached_property
    def _cache(self) -> dict:
        return {}

    @property
    def low_degree(self) -> int | None:
        return min(self.shifts) if self.components else None

    def degrees(self, cap: int) -> range:
        if not self.components:
            return range(0)
        return range(self.low_degree, cap + 1, 2)

    def zero_element(self) -> tuple:
        return tuple(self.ring.zero for _ in self.components)

    # ----- slice coordinates -----

    def slice_columns(self, d: int) -> tuple:
        key = ("cols", d)
        if key not in self._cache:
            cols = []
            if d % 2 == 0:
                for i, comp in enumerate(self.components):
                    e = (d - comp.shift) // 2
                    for m in monomials(self.dim, e, comp.pivot):
                        cols.append((i, m))
            self._cache[key] = tuple(cols)
        return self._cache[key]

    def column_index(self, d: int) -> dict:
        key = ("index", d)
        if key not in self._cache:
            self._cache[key] = {c: k for k, c in enumerate(self.slice_columns(d))}
        return self._cache[key]

    def slice_dim(self, d: int) -> int:
        return len(self.slice_columns(d))

    # ----- elements -----

    def reduce_component(self, p: PolyElement, i: int) -> PolyElement:
        p = self.ring(p) if not isinstance(p, PolyElement) else p
        sub = self._substitutions.get(i)
        if sub is None or not p:
            return p
        pivot, replacement = sub
        return p.compose(self.ring.gens[pivot], replacement)

    def reduce(self, element: Sequence) -> tuple:
        if len(element) != self.rank:
            raise InputError(f"element has {len(element)} components, ambient has {self.rank}")
        return tuple(self.reduce_component(p, i) for i, p in enumerate(element))

    def degree_of(self, element: Sequence) -> int | None:
        """Common degree of a reduced element, None when it is zero."""
        found = None
        for i, p in enumerate(element):
            pd = poly_degree(p)
            if pd is None:
                continue
            d = pd + self.components[i].shift
            if found is not None and d != found:
                raise DegreeError(f"element components have mixed degrees {found} and {d}")
            found = d
        return found

    def to_vector(self, element: Sequence, d: int) -> dict:
        index = self.column_index(d)
        vec = {}
        for i, p in enumerate(element):
            for m, c in p.items():
                col = index.get((i, m))
                if col is None:
                    raise DegreeError(f"component {i} term {m} does not live in degree {d}")
                vec[col] = c
        return vec

    def from_vector(self, vec: dict, d: int) -> tuple:
        R = self.ring
        terms = [dict() for _ in self.components]
        cols = self.slice_columns(d)
        for col, c in vec.items():
            i, m = cols[col]
            terms[i][m] = c
        return tuple(R.from_dict(t) if t else R.zero for t in terms)

    def times_variable(self, vec: dict, d: int, j: int) -> dict:
        """x_j · vec, for vec in the degree-d slice."""
        cols = self.slice_columns(d)
        index = self.column_index(d + 2)
        out: dict = {}
        for col, c in vec.items():
            i, m = cols[col]
            sub = self._substitutions.get(i)
            if sub is not None and sub[0] == j:
                for mono, coeff in sub[1].items():
                    target = index[(i, tuple(a + b for a, b in zip(m, mono)))]
                    axpy(out, c, {target: coeff})
            else:
                bumped = list(m)
                bumped[j] += 1
                axpy(out, c, {index[(i, tuple(bumped))]: QQ.one})
        return out

    def multiply(self, element: Sequence, factors: Sequence[PolyElement]) -> tuple:
        """Componentwise product (factors[i] · element[i]), reduced."""
        return self.reduce(tuple(f * p for f, p in zip(factors, element)))


# ──────────────────────────────────────────────────────────────────
# Graded submodules
# ──────────────────────────────────────────────────────────────────

class Generator(NamedTuple):
    element: tuple
    degree: int


class GradedSubmodule:
    """
    A graded submodule of an AmbientModule, materialized in every even degree
    up to the cap.  Slices are reduced row-echelon bases; everything above the
    cap is unknown and never claimed.
    """

    def __init__(self, ambient: AmbientModule, cap: int, slices: dict[int, Slice]):
        self.ambient = ambient
        self.cap = cap
        self._slices = slices

    def __repr__(self):
        hf = ", ".join(f"{d}:{n}" for d, n in self.hilbert_function().items() if n)
        return f"GradedSubmodule(rank={self.ambient.rank}, cap={self.cap}, hf={{{hf}}})"

    def degrees(self) -> range:
        return self.ambient.degrees(self.cap)

    def slice(self, d: int) -> Slice:
        s = self._slices.get(d)
        if s is None:
            return Slice(self.ambient.slice_dim(d) if d % 2 == 0 else 0)
        return s

    def dim(self, d: int) -> int:
        return self.slice(d).dim if d <= self.cap else 0

    def hilbert_function(self) -> dict[int, int]:
        return {d: self.slice(d).dim for d in self.degrees()}

    def basis(self, d: int) -> list[tuple]:
        return [self.ambient.from_vector(r, d) for r in self.slice(d).rows]

    def is_zero(self) -> bool:
        return all(self.slice(d).dim == 0 for d in self.degrees())

    def contains(self, element: Sequence) -> bool:
        element = self.ambient.reduce(element)
        d = self.ambient.degree_of(element)
        if d is None:
            return True
        if d > self.cap:
            raise DegreeError(f"membership queried in degree {d} above cap {self.cap}")
        return self.slice(d).contains(self.ambient.to_vector(element, d))

    def is_subset(self, other: "GradedSubmodule") -> bool:
        self._check_same_ambient(other)
        top = min(self.cap, other.cap)
        return all(self.slice(d).is_subspace_of(other.slice(d)) for d in self.degrees() if d <= top)

    def same_as(self, other: "GradedSubmodule") -> bool:
        self._check_same_ambient(other)
        top = min(self.cap, other.cap)
        return all(self.slice(d).same_space(other.slice(d)) for d in self.degrees() if d <= top)

    def first_difference(self, other: "GradedSubmodule") -> int | None:
        """Lowest degree at which the two submodules differ, None if equal up to the common cap."""
        self._check_same_ambient(other)
        top = min(self.cap, other.cap)
        for d in self.degrees():
            if d <= top and not self.slice(d).same_space(other.slice(d)):
                return d
        return None

    def _check_same_ambient(self, other):
        if self.ambient != other.ambient:
            raise InputError("submodules live in different ambient modules")

    @cached_property
    def minimal_generators(self) -> tuple[Generator, ...]:
        return tuple(minimal_generators(self))

    def generator_degrees(self) -> list[int]:
        return sorted(g.degree for g in self.minimal_generators)


def zero_module(ambient: AmbientModule, cap: int) -> GradedSubmodule:
    return GradedSubmodule(ambient, cap, {})


def full_module(ambient: AmbientModule, cap: int) -> GradedSubmodule:
    slices = {}
    for d in ambient.degrees(cap):
        n = ambient.slice_dim(d)
        slices[d] = Slice(n, tuple({k: QQ.one} for k in range(n)), tuple(range(n)))
    return GradedSubmodule(ambient, cap, slices)


def _check_cap(cap: int) -> None:
    if cap % 2:
        raise DegreeError(f"degree cap must be even, got {cap}")


def span_degreewise(gens: Iterable, ambient: AmbientModule, cap: int) -> GradedSubmodule:
    """
    S-span of homogeneous generators, materialized up to the cap.

    Degree d is spanned by x_j · (degree d−2 slice) together with the
    generators of degree d.
    """
    _check_cap(cap)
    normalized = []
    for idx, (element, degree) in enumerate(gens):
        if degree % 2:
            raise DegreeError(f"generator {idx} has odd degree {degree}")
        if degree > cap:
            raise DegreeError(f"generator {idx} has degree {degree} above the cap {cap}")
        try:
            element = ambient.reduce(element)
            actual = ambient.degree_of(element)
        except DegreeError as e:
            raise DegreeError(f"generator {idx} is not homogeneous: {e}") from e
        if actual is not None and actual != degree:
            raise DegreeError(f"generator {idx} declared degree {degree} but has degree {actual}")
        if actual is not None:
            normalized.append((element, degree))

    slices: dict[int, Slice] = {}
    previous = None
    for d in ambient.degrees(cap):
        vectors = []
        if previous is not None:
            for row in previous.rows:
                vectors.extend(ambient.times_variable(row, d - 2, j) for j in range(ambient.dim))
        vectors.extend(ambient.to_vector(e, d) for e, deg in normalized if deg == d)
        previous = slices[d] = Slice.span(vectors, ambient.slice_dim(d))
    return GradedSubmodule(ambient, cap, slices)


def _decomposable(M: GradedSubmodule, d: int) -> list[dict]:
    below = M.slice(d - 2)
    if d - 2 not in M.degrees():
        return []
    return [M.ambient.times_variable(r, d - 2, j) for r in below.rows for j in range(M.ambient.dim)]


def minimal_generators(M: GradedSubmodule) -> list[Generator]:
    """
    Homogeneous minimal generators: per degree, the echelon basis vectors of
    M_d that are not in (V · M_{d−2}) plus the earlier picks.
    """
    result = []
    for d in M.degrees():
        current = M.slice(d)
        if not current.rows:
            continue
        span = Slice.span(_decomposable(M, d), current.ncols)
        for row in current.rows:
            if span.contains(row):
                continue
            result.append(Generator(M.ambient.from_vector(row, d), d))
            span = span.extend([row])
    return result


def truncate(M: GradedSubmodule, cap: int) -> GradedSubmodule:
    """The same submodule, forgotten above the cap."""
    if cap > M.cap:
        raise DegreeError(f"module is materialized only up to degree {M.cap}, asked for {cap}")
    if cap == M.cap:
        return M
    return GradedSubmodule(M.ambient, cap, {d: M.slice(d) for d in M.degrees() if d <= cap})


def sum_modules(M: GradedSubmodule, N: GradedSubmodule) -> GradedSubmodule:
    M._check_same_ambient(N)
    cap = min(M.cap, N.cap)
    slices = {d: M.slice(d).extend(N.slice(d).rows) for d in M.degrees() if d <= cap}
    return GradedSubmodule(M.ambient, cap, slices)


def intersect(M: GradedSubmodule, N: GradedSubmodule) -> GradedSubmodule:
    """Degreewise intersection of two submodules of the same ambient."""
    M._check_same_ambient(N)
    cap = min(M.cap, N.cap)
    slices = {}
    for d in M.degrees():
        if d > cap:
            break
        a, b = list(M.slice(d).rows), list(N.slice(d).rows)
        if not a or not b:
            continue
        ncols = M.ambient.slice_dim(d)
        relations = nullspace(transpose(a + b, ncols), len(a) + len(b))
        vectors = [combine({k: c for k, c in r.items() if k < len(a)}, a) for r in relations]
        slices[d] = Slice.span(vectors, ncols)
    return GradedSubmodule(M.ambient, cap, slices)


def hilbert_function(M: GradedSubmodule) -> dict[int, int]:
    return M.hilbert_function()


# ──────────────────────────────────────────────────────────────────
# Graded maps
# ──────────────────────────────────────────────────────────────────

class GradedMap:
    """
    Degree-preserving S-linear map between ambient modules, given by a sparse
    matrix of homogeneous polynomials: entries[(j, i)] sends source component i
    to target component j and has degree shift_i − shift_j.
    """

    def __init__(self, source: AmbientModule, target: AmbientModule, entries: dict | None = None):
        if source.dim != target.dim:
            raise InputError("source and target live over different rings")
        self.source = source
        self.target = target
        self.entries: dict = {}
        self._columns_cache: dict = {}
        for (j, i), p in (entries or {}).items():
            if not (0 <= i < source.rank and 0 <= j < target.rank):
                raise InputError(f"matrix entry ({j}, {i}) outside the {target.rank}×{source.rank} shape")
            p = target.reduce_component(source.ring(p) if not isinstance(p, PolyElement) else p, j)
            if not p:
                continue
            pd = poly_degree(p)
            expected = source.components[i].shift - target.components[j].shift
            if pd != expected:
                raise DegreeError(f"matrix entry ({j}, {i}) has degree {pd}, expected {expected}")
            self.entries[(j, i)] = p
        self._check_annihilators()

    def __repr__(self):
        return f"GradedMap({self.source.rank}→{self.target.rank}, {len(self.entries)} entries)"

    def _check_annihilators(self):
        R = self.source.ring
        for (j, i), p in self.entries.items():
            ann = self.source.components[i].annihilator
            if ann is None:
                continue
            if self.target.reduce_component(linear_form(ann, R) * p, j):
                raise InputError(f"entry ({j}, {i}) does not respect the annihilator of source component {i}")

    @classmethod
    def identity(cls, ambient: AmbientModule) -> "GradedMap":
        return cls(ambient, ambient, {(i, i): ambient.ring.one for i in range(ambient.rank)})

    @classmethod
    def selection(cls, source: AmbientModule, target: AmbientModule, pairs: Iterable, sign=1) -> "GradedMap":
        """Map sending source component i to target component j for each (j, i), times sign."""
        one = source.ring.one * to_scalar(sign)
        return cls(source, target, {(j, i): one for j, i in pairs})

    def entry(self, j: int, i: int) -> PolyElement:
        return self.entries.get((j, i), self.source.ring.zero)

    def apply(self, element: Sequence) -> tuple:
        R = self.source.ring
        out = [R.zero for _ in range(self.target.rank)]
        for (j, i), p in self.entries.items():
            if element[i]:
                out[j] += p * element[i]
        return self.target.reduce(out)

    def _columns(self, d: int) -> list[dict]:
        if d not in self._columns_cache:
            R = self.source.ring
            images = []
            by_source: dict[int, list] = {}
            for (j, i), p in self.entries.items():
                by_source.setdefault(i, []).append((j, p))
            for i, m in self.source.slice_columns(d):
                mono = R.from_dict({m: QQ.one})
                out = [R.zero for _ in range(self.target.rank)]
                for j, p in by_source.get(i, ()):
                    out[j] = self.target.reduce_component(p * mono, j)
                images.append(self.target.to_vector(out, d))
            self._columns_cache[d] = images
        return self._columns_cache[d]

    def apply_vector(self, vec: dict, d: int) -> dict:
        columns = self._columns(d)
        out: dict = {}
        for col, c in vec.items():
            axpy(out, c, columns[col])
        return out

    def compose(self, inner: "GradedMap") -> "GradedMap":
        """self ∘ inner."""
        if inner.target != self.source:
            raise InputError("maps are not composable")
        R = self.source.ring
        entries: dict = {}
        for (k, j), p in self.entries.items():
            for (jj, i), q in inner.entries.items():
                if jj == j:
                    entries[(k, i)] = entries.get((k, i), R.zero) + p * q
        return GradedMap(inner.source, self.target, entries)


def image(f: GradedMap, M: GradedSubmodule) -> GradedSubmodule:
    """Degreewise image f(M) inside the target ambient."""
    if M.ambient != f.source:
        raise InputError("module does not live in the source of the map")
    slices = {}
    for d in f.target.degrees(M.cap):
        rows = M.slice(d).rows if d in M.degrees() else ()
        slices[d] = Slice.span((f.apply_vector(r, d) for r in rows), f.target.slice_dim(d))
    return GradedSubmodule(f.target, M.cap, slices)


def kernel(f: GradedMap, M: GradedSubmodule, cap: int | None = None,
           modulo: GradedSubmodule | None = None) -> GradedSubmodule:
    """Degreewise kernel of f restricted to M, optionally of f followed by the quotient by modulo."""
    if M.ambient != f.source:
        raise InputError("module does not live in the source of the map")
    cap = M.cap if cap is None else cap
    _check_cap(cap)
    if cap > M.cap:
        raise DegreeError(f"kernel cap {cap} exceeds the module cap {M.cap}")
    slices = {}
    for d in f.source.degrees(cap):
        basis = list(M.slice(d).rows)
        if not basis:
            continue
        images = [f.apply_vector(b, d) for b in basis]
        if modulo is not None:
            images = [modulo.slice(d).reduce(v) for v in images]
        relations = nullspace(transpose(images, f.target.slice_dim(d)), len(basis))
        slices[d] = Slice.span((combine(r, basis) for r in relations), f.source.slice_dim(d))
    return GradedSubmodule(f.source, cap, slices)


def rank_of_image(f: GradedMap, M: GradedSubmodule, d: int) -> int:
    return Slice.span((f.apply_vector(r, d) for r in M.slice(d).rows), f.target.slice_dim(d)).dim


# ──────────────────────────────────────────────────────────────────
# Freeness
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class FreenessVerdict:
    """Graded-freeness of a module, verified up to the cap."""

    free: bool
    generator_degrees: tuple[int, ...]
    cap: int
    failing_degree: int | None = None
    observed: int | None = None
    predicted: int | None = None

    @property
    def verdict(self) -> str:
        return "yes" if self.free else "no"

    def as_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "generator_degrees": list(self.generator_degrees),
            "verified_up_to_degree": self.cap,
        }
        if not self.free:
            out["failing_degree"] = self.failing_degree
            out["observed"] = self.observed
            out["predicted"] = self.predicted
        return out


def free_hilbert_function(dim: int, degrees: Iterable[int], cap: int, low: int) -> dict[int, int]:
    degrees = list(degrees)
    return {d: sum(dim_S(dim, d - l) for l in degrees) for d in range(low, cap + 1, 2)}


def is_graded_free(M: GradedSubmodule) -> FreenessVerdict:
    """
    Compare the Hilbert function with that of ⊕ S[l_i] over the minimal
    generator degrees l_i; equality up to the cap means "yes, verified up to D".
    """
    degrees = tuple(M.generator_degrees())
    observed = M.hilbert_function()
    low = M.ambient.low_degree if M.ambient.components else 0
    predicted = free_hilbert_function(M.ambient.dim, degrees, M.cap, low)
    for d in sorted(observed):
        if observed[d] != predicted.get(d, 0):
            return FreenessVerdict(False, degrees, M.cap, d, observed[d], predicted.get(d, 0))
    return FreenessVerdict(True, degrees, M.cap)


# ──────────────────────────────────────────────────────────────────
# Direct sums
# ──────────────────────────────────────────────────────────────────

def component_offsets(parts: Sequence[AmbientModule]) -> list[int]:
    offsets, total = [], 0
    for part in parts:
        offsets.append(total)
        total += part.rank
    return offsets


def block_map(source_parts: Sequence[AmbientModule], target_parts: Sequence[AmbientModule],
              blocks: dict, dim: int) -> GradedMap:
    """Assemble a map between direct sums from blocks[(target_part, source_part)]."""
    source = AmbientModule.direct_sum(dim, source_parts)
    target = AmbientModule.direct_sum(dim, target_parts)
    soff, toff = component_offsets(source_parts), component_offsets(target_parts)
    entries = {}
    for (t, s), f in blocks.items():
        if f.source != source_parts[s] or f.target != target_parts[t]:
            raise InputError(f"block ({t}, {s}) does not match the given parts")
        for (j, i), p in f.entries.items():
            entries[(toff[t] + j, soff[s] + i)] = p
    return GradedMap(source, target, entries)


def embed(M: GradedSubmodule, parts: Sequence[AmbientModule], position: int) -> GradedSubmodule:
    """M placed as the given summand of ⊕ parts."""
    inclusion = GradedMap.identity(parts[position])
    f = block_map([parts[position]], parts, {(position, 0): inclusion}, M.ambient.dim)
    return image(f, M)


def direct_sum_modules(modules: Sequence[GradedSubmodule], dim: int, cap: int) -> GradedSubmodule:
    """⊕ M_i inside ⊕ of their ambients."""
    parts = [M.ambient for M in modules]
    ambient = AmbientModule.direct_sum(dim, parts)
    total = zero_module(ambient, cap)
    for k, M in enumerate(modules):
        total = sum_modules(total, embed(M, parts, k))
    return total
