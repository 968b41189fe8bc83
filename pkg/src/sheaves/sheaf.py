# src/sheaves/sheaf.py

"""
Sheaves on moment graphs and their sections.

A sheaf assigns to every vertex x a stalk M^x (a graded submodule of a free
ambient F_x), to every edge E a stalk M^E presented as (N + K) / K inside an
ambient A_E, and to every endpoint x of E a degree-0 map ρ_{x,E}: F_x → A_E.
Sheaves read from JSON always have free stalks and N = A_E; the localization
functor produces the general presentations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from algebra.errors import DegreeError, InputError, NotInCategoryError
from algebra.polyeng import (
    AmbientModule,
    GradedMap,
    GradedSubmodule,
    Slice,
    block_map,
    direct_sum_modules,
    full_module,
    image,
    kernel,
    linear_form,
    nullspace,
    sum_modules,
    transpose,
    truncate,
    zero_module,
)
from graph.moment_graph import MomentGraph

logger = logging.getLogger(__name__)


# ──────────────────────────────────────────────────────────────────
# Stalks
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Stalk:
    """A vertex stalk: a submodule of a free ambient, the whole ambient when module is None."""

    ambient: AmbientModule
    module: GradedSubmodule | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.ambient.is_free:
            raise InputError("vertex stalks must live in free ambient modules")
        if self.module is not None and self.module.ambient != self.ambient:
            raise InputError("stalk submodule does not live in the stalk ambient")

    @classmethod
    def zero(cls, dim: int) -> "Stalk":
        return cls(AmbientModule(dim))

    @property
    def is_free_stalk(self) -> bool:
        return self.module is None

    @property
    def is_zero(self) -> bool:
        if self.ambient.rank == 0:
            return True
        return self.module is not None and self.module.is_zero()

    def realize(self, cap: int) -> GradedSubmodule:
        if cap not in self._cache:
            if self.module is None:
                self._cache[cap] = full_module(self.ambient, cap)
            else:
                self._cache[cap] = truncate(self.module, cap)
        return self._cache[cap]


@dataclass(frozen=True, eq=False)
class EdgeStalk:
    """Edge stalk (N + K) / K; N is the whole ambient when module is None, K is zero when relations is None."""

    ambient: AmbientModule
    relations: GradedSubmodule | None = None
    module: GradedSubmodule | None = None

    def __post_init__(self):
        for part in (self.relations, self.module):
            if part is not None and part.ambient != self.ambient:
                raise InputError("edge stalk presentation does not live in its ambient")

    @classmethod
    def zero(cls, dim: int) -> "EdgeStalk":
        return cls(AmbientModule(dim))

    @classmethod
    def cyclic(cls, dim: int, shifts, label) -> "EdgeStalk":
        """⊕ (S/αS)[k] with no further relations."""
        return cls(AmbientModule.quotient(dim, shifts, label))

    def realize_relations(self, cap: int) -> GradedSubmodule:
        if self.relations is None:
            return zero_module(self.ambient, cap)
        return truncate(self.relations, cap)

    def realize_span(self, cap: int) -> GradedSubmodule:
        """N + K."""
        if self.module is None:
            return full_module(self.ambient, cap)
        return sum_modules(truncate(self.module, cap), self.realize_relations(cap))

    def hilbert_function(self, cap: int) -> dict[int, int]:
        span, rel = self.realize_span(cap), self.realize_relations(cap)
        return {d: span.dim(d) - rel.dim(d) for d in self.ambient.degrees(cap)}


# ──────────────────────────────────────────────────────────────────
# Sheaves
# ──────────────────────────────────────────────────────────────────

class GSheaf:
    """A sheaf ({M^x}, {M^E}, {ρ_{x,E}}) on a moment graph."""

    def __init__(self, graph: MomentGraph, stalks: dict | None = None, edge_stalks: dict | None = None,
                 rho: dict | None = None, notes: dict | None = None):
        problems = graph.validate()
        if problems:
            raise InputError(f"invalid moment graph: {problems[0]}")
        self.graph = graph
        stalks = dict(stalks or {})
        edge_stalks = dict(edge_stalks or {})
        rho = dict(rho or {})
        for x in stalks:
            if x not in graph.index:
                raise InputError(f"stalk given for unknown vertex {x!r}")
        for k in edge_stalks:
            if not 0 <= k < len(graph.edges):
                raise InputError(f"edge stalk given for unknown edge {k}")
        self._stalks = {x: stalks.get(x) or Stalk.zero(graph.dim) for x in graph.vertices}
        self._edge_stalks = {k: edge_stalks.get(k) or EdgeStalk.zero(graph.dim) for k in range(len(graph.edges))}
        self._rho = {}
        for k, e in enumerate(graph.edges):
            target = self._edge_stalks[k].ambient
            for x in (e.u, e.v):
                source = self._stalks[x].ambient
                f = rho.pop((x, k), None)
                if f is None:
                    f = GradedMap(source, target)
                elif f.source != source or f.target != target:
                    raise InputError(f"ρ for vertex {x!r} and edge {e} does not match the stalk shapes")
                self._rho[(x, k)] = f
        if rho:
            raise InputError(f"ρ given for non-incident vertex/edge pairs {sorted(rho)}")
        # vertex → remark, e.g. a localized stalk that is not free
        self.notes = dict(notes or {})

    def __repr__(self):
        return f"GSheaf({self.graph!r}, support={sorted(self.support())})"

    def stalk(self, x: str) -> Stalk:
        if x not in self._stalks:
            raise InputError(f"unknown vertex {x!r}")
        return self._stalks[x]

    def edge_stalk(self, k: int) -> EdgeStalk:
        return self._edge_stalks[k]

    def rho_map(self, x: str, k: int) -> GradedMap:
        try:
            return self._rho[(x, k)]
        except KeyError:
            raise InputError(f"vertex {x!r} is not an endpoint of edge {k}") from None

    def support(self) -> set[str]:
        return {x for x, s in self._stalks.items() if not s.is_zero}

    def validate(self, cap: int) -> list[str]:
        """Edge stalks that α(E) fails to annihilate, up to the cap."""
        problems = []
        for k, e in enumerate(self.graph.edges):
            es = self._edge_stalks[k]
            if es.ambient.rank == 0:
                continue
            alpha = linear_form(e.label, es.ambient.ring)
            span, rel = es.realize_span(cap), es.realize_relations(cap)
            for d in es.ambient.degrees(cap - 2):
                for row in span.slice(d).rows:
                    element = es.ambient.multiply(es.ambient.from_vector(row, d),
                                                  [alpha] * es.ambient.rank)
                    if not rel.contains(element):
                        problems.append(f"edge {k} ({e}): stalk not annihilated by its label in degree {d}")
                        break
        return problems


# ──────────────────────────────────────────────────────────────────
# Sections
# ──────────────────────────────────────────────────────────────────

@dataclass(eq=False)
class SectionSpace:
    """M(I): compatible tuples inside ⊕_{x∈I} F_x."""

    subgraph: tuple[str, ...]
    parts: tuple[AmbientModule, ...]
    module: GradedSubmodule

    @cached_property
    def minimal_generators(self):
        return self.module.minimal_generators

    def generator_degrees(self) -> list[int]:
        return self.module.generator_degrees()

    def projection(self, J: Iterable[str]) -> GradedMap:
        """Coordinate projection onto the vertices of J (in subgraph order)."""
        J = set(J)
        unknown = J - set(self.subgraph)
        if unknown:
            raise InputError(f"vertices {sorted(unknown)} are outside the subgraph")
        kept = [k for k, x in enumerate(self.subgraph) if x in J]
        blocks = {(t, s): GradedMap.identity(self.parts[s]) for t, s in enumerate(kept)}
        return block_map(self.parts, [self.parts[s] for s in kept], blocks, self.module.ambient.dim)

    def component(self, x: str) -> GradedSubmodule:
        return image(self.projection([x]), self.module)


def _ordered(graph: MomentGraph, subset: Iterable[str]) -> list[str]:
    subset = set(subset)
    for x in subset:
        if x not in graph.index:
            raise InputError(f"unknown vertex {x!r}")
    return [x for x in graph.vertices if x in subset]


def sections(m: GSheaf, I: Iterable[str], D: int) -> SectionSpace:
    """
    Degreewise solution space of ρ_{x,E}(m_x) ≡ ρ_{y,E}(m_y) modulo K_E for
    every edge inside I.  Unknowns are coordinates on the stalk slice bases.
    """
    if D % 2:
        raise DegreeError(f"degree cap must be even, got {D}")
    g = m.graph
    vertices = _ordered(g, I)
    parts = tuple(m.stalk(x).ambient for x in vertices)
    for x, part in zip(vertices, parts):
        if part.shifts and max(part.shifts) > D:
            raise DegreeError(f"degree cap {D} is below the stalk shift {max(part.shifts)} at {x!r}")
    ambient = AmbientModule.direct_sum(g.dim, parts)
    stalks = [m.stalk(x).realize(D) for x in vertices]
    position = {x: k for k, x in enumerate(vertices)}
    edges = g.edges_within(vertices)
    relations = {k: m.edge_stalk(k).realize_relations(D) for k in edges}

    slices = {}
    for d in ambient.degrees(D):
        unknowns = [(pos, row) for pos, M in enumerate(stalks) for row in M.slice(d).rows]
        if not unknowns:
            continue
        columns = [dict() for _ in unknowns]
        offset = 0
        for k in edges:
            e = g.edges[k]
            K = relations[k].slice(d)
            for sign, x in ((1, e.u), (-1, e.v)):
                f = m.rho_map(x, k)
                for idx, (pos, row) in enumerate(unknowns):
                    if pos != position[x]:
                        continue
                    for col, c in K.reduce(f.apply_vector(row, d)).items():
                        columns[idx][offset + col] = sign * c
            offset += m.edge_stalk(k).ambient.slice_dim(d)
        solutions = nullspace(transpose(columns, offset), len(unknowns))

        starts, total = [], 0
        for part in parts:
            starts.append(total)
            total += part.slice_dim(d)
        vectors = []
        for sol in solutions:
            vec = {}
            for idx, c in sol.items():
                pos, row = unknowns[idx]
                for col, v in row.items():
                    key = starts[pos] + col
                    s = vec.get(key, 0) + c * v
                    if s:
                        vec[key] = s
                    else:
                        vec.pop(key, None)
            vectors.append(vec)
        slices[d] = Slice.span(vectors, ambient.slice_dim(d))
    logger.debug(f"sections over {len(vertices)} vertices solved up to degree {D}")
    return SectionSpace(tuple(vertices), parts, GradedSubmodule(ambient, D, slices))


def global_sections(m: GSheaf, D: int) -> SectionSpace:
    return sections(m, m.graph.vertices, D)


# ──────────────────────────────────────────────────────────────────
# Constructions
# ──────────────────────────────────────────────────────────────────

def structure_sheaf(g: MomentGraph) -> GSheaf:
    """Stalks S, edge stalks S/α(E)S, ρ the quotient maps."""
    F = AmbientModule.free(g.dim)
    stalks = {x: Stalk(F) for x in g.vertices}
    edge_stalks, rho = {}, {}
    for k, e in enumerate(g.edges):
        es = EdgeStalk.cyclic(g.dim, (0,), e.label)
        edge_stalks[k] = es
        for x in (e.u, e.v):
            rho[(x, k)] = GradedMap.selection(F, es.ambient, [(0, 0)])
    return GSheaf(g, stalks, edge_stalks, rho)


def skyscraper(g: MomentGraph, x: str, shift: int = 0) -> GSheaf:
    if x not in g.index:
        raise InputError(f"unknown vertex {x!r}")
    return GSheaf(g, {x: Stalk(AmbientModule.free(g.dim, (shift,)))})


def restrict(m: GSheaf, I: Iterable[str]) -> GSheaf:
    """Zero outside I; edges survive only with both endpoints in I."""
    keep = set(_ordered(m.graph, I))
    inner = set(m.graph.edges_within(keep))
    stalks = {x: m.stalk(x) for x in keep}
    edge_stalks = {k: m.edge_stalk(k) for k in inner}
    rho = {}
    for k in inner:
        e = m.graph.edges[k]
        for x in (e.u, e.v):
            rho[(x, k)] = m.rho_map(x, k)
    notes = {x: n for x, n in m.notes.items() if x in keep}
    return GSheaf(m.graph, stalks, edge_stalks, rho, notes)


# ──────────────────────────────────────────────────────────────────
# Boundary modules
# ──────────────────────────────────────────────────────────────────

@dataclass(eq=False)
class DeltaModule:
    """M^{δx} inside ⊕_{E∈δx} A_E, held together with the relations ⊕ K_E."""

    vertex: str
    edges: tuple[int, ...]
    ambient: AmbientModule
    relations: GradedSubmodule
    module: GradedSubmodule

    def hilbert_function(self) -> dict[int, int]:
        return {d: self.module.dim(d) - self.relations.dim(d) for d in self.module.degrees()}


def _boundary(m: GSheaf, x: str, D: int):
    into = tuple(m.graph.edges_into(x))
    parts = [m.edge_stalk(k).ambient for k in into]
    ambient = AmbientModule.direct_sum(m.graph.dim, parts)
    relations = direct_sum_modules([m.edge_stalk(k).realize_relations(D) for k in into], m.graph.dim, D)
    return into, parts, ambient, relations


def delta_module(m: GSheaf, x: str, D: int) -> DeltaModule:
    """Image of the sections over {<x} in ⊕_{E: y→x} M^E."""
    g = m.graph
    into, parts, ambient, relations = _boundary(m, x, D)
    below = sections(m, g.less(x), D)
    blocks = {}
    for t, k in enumerate(into):
        y = g.edges[k].other(x)
        blocks[(t, below.subgraph.index(y))] = m.rho_map(y, k)
    f = block_map(below.parts, parts, blocks, g.dim)
    module = sum_modules(image(f, below.module), relations)
    return DeltaModule(x, into, ambient, relations, module)


def _stalk_map(m: GSheaf, x: str, into, parts) -> GradedMap:
    blocks = {(t, 0): m.rho_map(x, k) for t, k in enumerate(into)}
    return block_map([m.stalk(x).ambient], parts, blocks, m.graph.dim)


def stalk_image(m: GSheaf, x: str, D: int) -> GradedSubmodule:
    """⊕ρ_{x,E}(M^x) + ⊕ K_E for the edges into x."""
    into, parts, _, relations = _boundary(m, x, D)
    f = _stalk_map(m, x, into, parts)
    return sum_modules(image(f, m.stalk(x).realize(D)), relations)


def sheaf_order_kernel(m: GSheaf, x: str, D: int) -> GradedSubmodule:
    """ker(M^x → M^{δx}), a submodule of F_x."""
    into, parts, _, relations = _boundary(m, x, D)
    f = _stalk_map(m, x, into, parts)
    return kernel(f, m.stalk(x).realize(D), D, modulo=relations)


def edge_stalk_hilbert(m: GSheaf, k: int, D: int) -> dict[int, int]:
    return m.edge_stalk(k).hilbert_function(D)


# ──────────────────────────────────────────────────────────────────
# Diagnostics
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class GlobalSectionsReport:
    generated: bool
    cap: int
    kind: str | None = None
    location: str | None = None
    degree: int | None = None

    def __bool__(self):
        return self.generated

    def as_dict(self) -> dict:
        out = {"generated_by_global_sections": self.generated, "verified_up_to_degree": self.cap}
        if not self.generated:
            out["witness"] = {"kind": self.kind, "at": self.location, "degree": self.degree}
        return out


@dataclass(frozen=True)
class FlabbinessReport:
    flabby: bool
    mode: str
    cap: int
    vertex: str | None = None
    open_set: tuple[str, ...] | None = None
    degree: int | None = None

    def __bool__(self):
        return self.flabby

    def as_dict(self) -> dict:
        out = {"flabby": self.flabby, "mode": self.mode, "verified_up_to_degree": self.cap}
        if not self.flabby:
            witness = {"degree": self.degree}
            if self.vertex is not None:
                witness["vertex"] = self.vertex
            if self.open_set is not None:
                witness["open_set"] = list(self.open_set)
            out["witness"] = witness
        return out


def _first_gap(small: GradedSubmodule, big: GradedSubmodule) -> int | None:
    """Lowest degree where big is not contained in small."""
    for d in big.degrees():
        if d <= small.cap and not big.slice(d).is_subspace_of(small.slice(d)):
            return d
    return None


def is_generated_by_global_sections(m: GSheaf, D: int) -> GlobalSectionsReport:
    """Compare m with L(Γ(m)) stalk by stalk and edge by edge."""
    from sheaves.zmod import ZModule, localize

    g = m.graph
    gamma = global_sections(m, D)
    L = localize(ZModule.from_sections(g, gamma), D)
    for x in g.linear_extension():
        d = m.stalk(x).realize(D).first_difference(L.stalk(x).realize(D))
        if d is not None:
            return GlobalSectionsReport(False, D, "vertex", x, d)
    for k, e in enumerate(g.edges):
        es = m.edge_stalk(k)
        if es.ambient.rank == 0:
            continue
        hf_m, hf_l = es.hilbert_function(D), L.edge_stalk(k).hilbert_function(D)
        reached = es.realize_relations(D)
        for x in (e.u, e.v):
            reached = sum_modules(reached, image(m.rho_map(x, k), L.stalk(x).realize(D)))
        gap = _first_gap(reached, es.realize_span(D))
        mismatch = [d for d in hf_m if hf_m[d] != hf_l.get(d, 0)]
        worst = min([d for d in (gap, *mismatch) if d is not None], default=None)
        if worst is not None:
            return GlobalSectionsReport(False, D, "edge", str(e), worst)
    return GlobalSectionsReport(True, D)


def _surjects(source: SectionSpace, target: SectionSpace) -> int | None:
    """Lowest degree where restriction source → target is not onto."""
    restricted = image(source.projection(target.subgraph), source.module)
    return _first_gap(restricted, target.module)


def is_flabby(m: GSheaf, D: int, criterion: int = 4, open_limit: int = 20) -> FlabbinessReport:
    """
    Flabbiness of a sheaf generated by global sections.

    criterion 4: every stalk maps onto M^{δx};
    criterion 3: sections over {≤x} restrict onto sections over {<x};
    criterion 2: global sections restrict onto the sections over every open set.
    """
    verdict = is_generated_by_global_sections(m, D)
    if not verdict:
        raise NotInCategoryError("sheaf is not generated by global sections", witness=verdict.as_dict())
    g = m.graph
    mode = f"criterion ({criterion})"
    if criterion == 4:
        for x in g.linear_extension():
            d = _first_gap(stalk_image(m, x, D), delta_module(m, x, D).module)
            if d is not None:
                return FlabbinessReport(False, mode, D, vertex=x, degree=d)
    elif criterion == 3:
        for x in g.linear_extension():
            d = _surjects(sections(m, g.less_eq(x), D), sections(m, g.less(x), D))
            if d is not None:
                return FlabbinessReport(False, mode, D, vertex=x, degree=d)
    elif criterion == 2:
        gamma = global_sections(m, D)
        for opened in g.open_subsets(open_limit):
            d = _surjects(gamma, sections(m, opened, D))
            if d is not None:
                return FlabbinessReport(False, mode, D, open_set=tuple(_ordered(g, opened)), degree=d)
    else:
        raise InputError(f"unknown flabbiness criterion {criterion}")
    return FlabbinessReport(True, mode, D)


def _nonzero(hf: dict[int, int]) -> dict[int, int]:
    return {d: n for d, n in hf.items() if n}


def same_sheaf(a: GSheaf, b: GSheaf, D: int) -> bool:
    """Stalkwise and edgewise equality up to D (as subspaces when ambients agree, else by dimension)."""
    if a.graph.vertices != b.graph.vertices or len(a.graph.edges) != len(b.graph.edges):
        return False
    for x in a.graph.vertices:
        sa, sb = a.stalk(x).realize(D), b.stalk(x).realize(D)
        if sa.ambient == sb.ambient:
            if sa.first_difference(sb) is not None:
                return False
        elif _nonzero(sa.hilbert_function()) != _nonzero(sb.hilbert_function()):
            return False
    for k in range(len(a.graph.edges)):
        ea, eb = a.edge_stalk(k), b.edge_stalk(k)
        if ea.ambient == eb.ambient:
            if (ea.realize_relations(D).first_difference(eb.realize_relations(D)) is not None
                    or ea.realize_span(D).first_difference(eb.realize_span(D)) is not None):
                return False
        elif _nonzero(ea.hilbert_function(D)) != _nonzero(eb.hilbert_function(D)):
            return False
    return True
