# src/sheaves/bmp.py

"""
Braden–MacPherson sheaves.

B(v) is built upward from v along a linear extension of {x ≥ v}: B^v = S,
and for each later x the stalk is the free cover of B^{δx}, the image of the
sections over {<x} in ⊕_{E: y→x} B^E.  Every edge stalk is B^y/αB^y for the
lower endpoint y.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from algebra.errors import CapTooSmallError, InputError, NotGKMError, NotInCategoryError
from algebra.polyeng import (
    AmbientModule,
    GradedMap,
    component_offsets,
    image,
    is_graded_free,
    sum_modules,
)
from graph.moment_graph import MomentGraph
from sheaves.sheaf import (
    EdgeStalk,
    GSheaf,
    Stalk,
    delta_module,
    is_flabby,
    sheaf_order_kernel,
)
from sheaves.zmod import VermaFlag, flag_from_kernels

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class TraceEntry:
    vertex: str
    delta_hilbert: dict[int, int]
    generator_degrees: tuple[int, ...]
    representatives: tuple = ()


@dataclass(eq=False)
class BMPSheaf:
    sheaf: GSheaf
    vertex: str
    cap: int
    order: tuple[str, ...]
    trace: dict[str, TraceEntry] = field(default_factory=dict)

    @property
    def graph(self) -> MomentGraph:
        return self.sheaf.graph

    def shifts(self, x: str) -> tuple[int, ...]:
        return self.sheaf.stalk(x).ambient.shifts


def _check_order(g: MomentGraph, up: frozenset, order: Sequence[str], v: str) -> list[str]:
    order = list(order)
    if set(order) != set(up) or len(order) != len(up):
        raise InputError("linear extension must list exactly the vertices above the start vertex")
    if order[0] != v or not g.is_linear_extension(order):
        raise InputError("given vertex order is not a linear extension")
    return order


def build_bmp(g: MomentGraph, v: str, D: int, order: Sequence[str] | None = None) -> BMPSheaf:
    problems = g.validate()
    if problems:
        raise InputError(f"invalid moment graph: {problems[0]}")
    gkm = g.is_gkm()
    if not gkm:
        raise NotGKMError(f"moment graph is not GKM at vertex {gkm.vertex!r}", witness=gkm.as_dict())
    if D % 2:
        raise InputError(f"degree cap must be even, got {D}")
    up = g.greater_eq(v)
    order = g.linear_extension(up) if order is None else _check_order(g, up, order, v)

    dim = g.dim
    stalks: dict = {}
    edge_stalks: dict = {}
    rho: dict = {}
    trace: dict = {}

    def settle(x: str, shifts: tuple[int, ...]) -> None:
        F = AmbientModule.free(dim, shifts)
        stalks[x] = Stalk(F)
        for k in g.edges_at(x):
            if g.edges[k].other(x) in g.greater(x):
                es = EdgeStalk.cyclic(dim, shifts, g.edges[k].label)
                edge_stalks[k] = es
                rho[(x, k)] = GradedMap.selection(F, es.ambient, [(i, i) for i in range(len(shifts))])

    settle(v, (0,))
    trace[v] = TraceEntry(v, {}, (0,))
    for x in order[1:]:
        partial = GSheaf(g, stalks, edge_stalks, rho)
        delta = delta_module(partial, x, D)
        gens = delta.module.minimal_generators
        for gen in gens:
            if gen.degree >= D - 2:
                raise CapTooSmallError(
                    f"B({v})^{{δ{x}}} has a generator in degree {gen.degree}, too close to the cap {D}",
                    vertex=x, degree=gen.degree, cap=D)
        shifts = tuple(gen.degree for gen in gens)
        settle(x, shifts)
        offsets = component_offsets([partial.edge_stalk(k).ambient for k in delta.edges])
        for t, k in enumerate(delta.edges):
            target = edge_stalks.get(k) or partial.edge_stalk(k)
            entries = {}
            for i, gen in enumerate(gens):
                for j in range(target.ambient.rank):
                    p = gen.element[offsets[t] + j]
                    if p:
                        entries[(j, i)] = p
            rho[(x, k)] = GradedMap(stalks[x].ambient, target.ambient, entries)
        trace[x] = TraceEntry(x, delta.hilbert_function(), shifts,
                              tuple(tuple(str(p.as_expr()) for p in gen.element) for gen in gens))
        logger.info(f"B({v}): stalk at {x} has generator degrees {list(shifts)}")

    sheaf = GSheaf(g, stalks, edge_stalks, rho)
    return BMPSheaf(sheaf, v, D, tuple(order), trace)


def bmp_character(b: BMPSheaf) -> dict[str, dict[int, int]]:
    """Per supported vertex: the Hilbert polynomial Σ t^{l_i} as {exponent: coefficient}."""
    out = {}
    for x in b.order:
        shifts = b.shifts(x)
        if not shifts:
            continue
        series: dict[int, int] = {}
        for l in shifts:
            series[l] = series.get(l, 0) + 1
        out[x] = dict(sorted(series.items()))
    return out


def format_series(series: dict[int, int]) -> str:
    terms = []
    for e, c in sorted(series.items()):
        mono = "1" if e == 0 else ("t" if e == 1 else f"t^{e}")
        terms.append(mono if c == 1 else (str(c) if e == 0 else f"{c}*{mono}"))
    return " + ".join(terms) or "0"


@dataclass(frozen=True)
class ProjectivityReport:
    projective: bool
    flabby: bool
    cap: int
    stalks: dict = field(default_factory=dict)
    edges: dict = field(default_factory=dict)
    note: str | None = None

    @property
    def kind(self) -> str:
        if self.projective and self.flabby:
            return "projective and flabby"
        if self.projective:
            return "projective-like but not flabby"
        return "not projective"

    def as_dict(self) -> dict:
        out = {
            "projective": self.projective,
            "flabby": self.flabby,
            "kind": self.kind,
            "verified_up_to_degree": self.cap,
            "stalks_free": dict(self.stalks),
            "edges_isomorphic": dict(self.edges),
        }
        if self.note:
            out["note"] = self.note
        return out


def projectivity_witness(b: BMPSheaf | GSheaf, D: int | None = None) -> ProjectivityReport:
    """
    Free stalks, and for every edge E: y → x the induced map
    M^y/αM^y → M^E bijective in each degree up to D.
    """
    sheaf = b.sheaf if isinstance(b, BMPSheaf) else b
    if D is None:
        if not isinstance(b, BMPSheaf):
            raise InputError("a degree cap is required for a plain sheaf")
        D = b.cap
    g = sheaf.graph
    stalk_ok = {}
    for x in g.vertices:
        st = sheaf.stalk(x)
        stalk_ok[x] = st.is_free_stalk or is_graded_free(st.realize(D)).free
    edge_ok = {}
    for k, e in enumerate(g.edges):
        y = g.lower_end(k)
        es = sheaf.edge_stalk(k)
        st = sheaf.stalk(y)
        if st.is_free_stalk:
            shifts = st.ambient.shifts
        else:
            shifts = tuple(is_graded_free(st.realize(D)).generator_degrees)
        quotient = AmbientModule.quotient(g.dim, shifts, e.label)
        reached = sum_modules(es.realize_relations(D), image(sheaf.rho_map(y, k), st.realize(D)))
        span = es.realize_span(D)
        hf = es.hilbert_function(D)
        ok = True
        for d in range(0, D + 1, 2):
            if d in hf and not span.slice(d).is_subspace_of(reached.slice(d)):
                ok = False
                break
            if hf.get(d, 0) != quotient.slice_dim(d):
                ok = False
                break
        edge_ok[str(e)] = ok
    projective = all(stalk_ok.values()) and all(edge_ok.values())
    note = None
    try:
        flabby = is_flabby(sheaf, D).flabby
    except NotInCategoryError:
        flabby = False
        note = "not generated by global sections"
    return ProjectivityReport(projective, flabby, D, stalk_ok, edge_ok, note)


def bmp_verma_flag(b: BMPSheaf, D: int | None = None) -> VermaFlag:
    """Graded freeness of ker(B^x → B^{δx}) for every vertex of the support."""
    D = b.cap if D is None else D
    kernels = {x: sheaf_order_kernel(b.sheaf, x, D) for x in b.order}
    return flag_from_kernels(kernels, D)
