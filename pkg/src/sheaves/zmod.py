# src/sheaves/zmod.py

"""
Modules over the structure algebra, in coordinates.

A ZModule is a graded submodule of ⊕_{x∈coords} F_x with one free block F_x
per coordinate vertex (rank one S in the common case).  The localization
functor L turns it into a GSheaf: stalks are the coordinate projections M^x,
and the stalk on an edge E: x — y is the pushout of M^x ← M(E) → M^y,
presented as (M^x ⊕ M^y) / M(E) inside F_x ⊕ F_y.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from sympy import Matrix, cancel, fraction, lcm, together

from algebra.errors import InputError, NotInCategoryError
from algebra.polyeng import (
    AmbientModule,
    GradedMap,
    GradedSubmodule,
    Slice,
    block_map,
    component_offsets,
    direct_sum_modules,
    image,
    is_graded_free,
    kernel,
    linear_form,
    nullspace,
    span_degreewise,
    transpose,
    truncate,
    zero_module,
)
from config import get_settings
from graph.moment_graph import MomentGraph
from sheaves.sheaf import (
    EdgeStalk,
    FlabbinessReport,
    GSheaf,
    SectionSpace,
    Stalk,
    _ordered,
    global_sections,
    structure_sheaf,
)

logger = logging.getLogger(__name__)


# ──────────────────────────────────────────────────────────────────
# Coordinate model
# ──────────────────────────────────────────────────────────────────

class ZModule:
    """A graded submodule of ⊕_{x∈coords} F_x over a moment graph."""

    def __init__(self, graph: MomentGraph, blocks: dict[str, AmbientModule], module: GradedSubmodule):
        self.graph = graph
        self.coords = tuple(_ordered(graph, blocks))
        self.blocks = {x: blocks[x] for x in self.coords}
        for x, block in self.blocks.items():
            if not block.is_free or block.dim != graph.dim:
                raise InputError(f"coordinate block of {x!r} must be free over the graph's ring")
        self.parts = tuple(self.blocks[x] for x in self.coords)
        if module.ambient != AmbientModule.direct_sum(graph.dim, self.parts):
            raise InputError("module does not live in the coordinate ambient")
        self.module = module

    def __repr__(self):
        return f"ZModule(coords={list(self.coords)}, generators={self.module.generator_degrees()})"

    @classmethod
    def from_generators(cls, graph: MomentGraph, coords: Iterable[str], generators: Sequence,
                        cap: int, shifts: dict | None = None, check: bool = True) -> "ZModule":
        """
        generators: (element, degree) pairs, element flattened over the blocks in graph order.
        The S-span must be closed under Z(G); check=False admits plain S-submodules.
        """
        coords = _ordered(graph, coords)
        shifts = shifts or {}
        blocks = {x: AmbientModule.free(graph.dim, shifts.get(x, (0,))) for x in coords}
        ambient = AmbientModule.direct_sum(graph.dim, [blocks[x] for x in coords])
        R = ambient.ring
        gens = [(tuple(R(p) if not hasattr(p, "ring") else p for p in element), degree)
                for element, degree in generators]
        M = cls(graph, blocks, span_degreewise(gens, ambient, cap))
        if check and M.coords:
            witness = action_witness(M, acting_algebra(graph, M.action_cap))
            if witness is not None:
                raise NotInCategoryError("generators do not span a Z-module: "
                                         "not closed under the structure algebra action", witness=witness)
        return M

    @classmethod
    def generated_by(cls, graph: MomentGraph, coords: Iterable[str], generators: Sequence,
                     cap: int, shifts: dict | None = None) -> "ZModule":
        """The Z(G)-submodule generated by the elements: the S-span of all products z·m."""
        raw = cls.from_generators(graph, coords, generators, cap, shifts, check=False)
        if not raw.coords:
            return raw
        Z = acting_algebra(graph, raw.action_cap)
        ambient = raw.module.ambient
        gens = [(ambient.multiply(m.element, pointwise_factors(raw, Z, z)), z.degree + m.degree)
                for m in raw.module.minimal_generators
                for z in Z.module.minimal_generators
                if z.degree + m.degree <= cap]
        return cls(graph, raw.blocks, span_degreewise(gens, ambient, cap))

    @classmethod
    def from_sections(cls, graph: MomentGraph, space: SectionSpace) -> "ZModule":
        return cls(graph, dict(zip(space.subgraph, space.parts)), space.module)

    @property
    def cap(self) -> int:
        return self.module.cap

    @property
    def action_cap(self) -> int:
        """Degree up to which Z(G) can act on the generators without leaving the cap."""
        return self.cap - min(min(self.module.ambient.shifts, default=0), 0)

    @property
    def dim(self) -> int:
        return self.graph.dim

    def block(self, x: str) -> AmbientModule:
        """F_x, or the zero ambient for a vertex outside coords."""
        return self.blocks.get(x, AmbientModule(self.dim))

    def projection(self, J: Iterable[str]) -> GradedMap:
        J = set(J)
        outside = J - set(self.coords)
        if outside:
            raise InputError(f"vertices {sorted(outside)} are not coordinates of the module")
        kept = [k for k, x in enumerate(self.coords) if x in J]
        blocks = {(t, s): GradedMap.identity(self.parts[s]) for t, s in enumerate(kept)}
        return block_map(self.parts, [self.parts[s] for s in kept], blocks, self.dim)

    def truncated(self, D: int) -> "ZModule":
        return ZModule(self.graph, self.blocks, truncate(self.module, D))

    def hilbert_function(self) -> dict[int, int]:
        return self.module.hilbert_function()

    def generator_degrees(self) -> list[int]:
        return self.module.generator_degrees()


@dataclass(eq=False)
class EdgeLocalModule:
    """M(E) = Z(E)·M^{x,y} inside F_x ⊕ F_y, endpoints in graph order."""

    edge: int
    first: str
    second: str
    parts: tuple[AmbientModule, AmbientModule]
    module: GradedSubmodule

    @property
    def ambient(self) -> AmbientModule:
        return self.module.ambient


def structure_algebra(g: MomentGraph, D: int, verify: bool = True) -> ZModule:
    """Z(G): global sections of the structure sheaf."""
    Z = ZModule.from_sections(g, global_sections(structure_sheaf(g), D))
    if verify and not is_closed_under_action(Z, Z):
        raise NotInCategoryError("structure algebra is not closed under multiplication")
    logger.info(f"structure algebra: {len(g.vertices)} vertices, generator degrees {Z.generator_degrees()}")
    return Z


def local_structure_algebra(label: Sequence, cap: int) -> GradedSubmodule:
    """Z(E) = {(a, b) : a ≡ b mod α} = S·(1,1) + S·(α,0) inside S ⊕ S."""
    ambient = AmbientModule.free(len(label), (0, 0))
    R = ambient.ring
    alpha = linear_form(label, R)
    return span_degreewise([((R.one, R.one), 0), ((alpha, R.zero), 2)], ambient, cap)


def verma_module(g: MomentGraph, x: str, shift: int = 0, D: int = 8) -> ZModule:
    """V(x)[shift]: free of rank one, supported at x, Z acting through evaluation at x."""
    if x not in g.index:
        raise InputError(f"unknown vertex {x!r}")
    R = AmbientModule.free(g.dim).ring
    return ZModule.from_generators(g, [x], [((R.one,), shift)], D, {x: (shift,)})


def project(M: ZModule, I: Iterable[str]) -> ZModule:
    """M^I: the coordinate projection onto I."""
    I = set(I) & set(M.coords)
    return ZModule(M.graph, {x: M.blocks[x] for x in M.coords if x in I}, image(M.projection(I), M.module))


def supported_part(M: ZModule, I: Iterable[str]) -> ZModule:
    """M_I: elements vanishing outside I, same coordinates as M."""
    I = set(I)
    rest = [x for x in M.coords if x not in I]
    return ZModule(M.graph, M.blocks, kernel(M.projection(rest), M.module))


def support(M: ZModule) -> set[str]:
    return {x for x in M.coords if not image(M.projection([x]), M.module).is_zero()}


def edge_module(M: ZModule, k: int, D: int | None = None) -> EdgeLocalModule:
    """
    M(E) for the edge k: the S-span of the projected generators g^{x,y}
    together with (α g_x, 0).
    """
    g = M.graph
    e = g.edges[k]
    first, second = _ordered(g, (e.u, e.v))
    D = M.cap if D is None else D
    parts = (M.block(first), M.block(second))
    ambient = AmbientModule.direct_sum(M.dim, parts)
    blocks = {}
    for t, x in enumerate((first, second)):
        if x in M.blocks:
            blocks[(t, M.coords.index(x))] = GradedMap.identity(M.blocks[x])
    proj = block_map(M.parts, parts, blocks, M.dim)
    alpha = linear_form(e.label, ambient.ring)
    width = parts[0].rank
    gens = []
    for gen in truncate(M.module, D).minimal_generators:
        p = proj.apply(gen.element)
        gens.append((p, gen.degree))
        if gen.degree + 2 <= D:
            gens.append((tuple(alpha * c if i < width else c * 0 for i, c in enumerate(p)), gen.degree + 2))
    return EdgeLocalModule(k, first, second, parts, span_degreewise(gens, ambient, D))


# ──────────────────────────────────────────────────────────────────
# Localization
# ──────────────────────────────────────────────────────────────────

def localize(M: ZModule, D: int) -> GSheaf:
    """The sheaf L(M)."""
    g = M.graph
    M = M.truncated(D)
    stalks, notes = {}, {}
    for x in M.coords:
        Mx = image(M.projection([x]), M.module)
        stalks[x] = Stalk(M.blocks[x], Mx)
        if not is_graded_free(Mx).free:
            notes[x] = "stalk is not graded free; kept as a presentation"
            logger.warning(f"localized stalk at {x} is not graded free up to degree {D}")
    edge_stalks, rho = {}, {}
    for k, e in enumerate(g.edges):
        if e.u not in M.blocks and e.v not in M.blocks:
            continue
        local = edge_module(M, k, D)
        first, second = local.parts
        spanned = direct_sum_modules([stalks[x].realize(D) if x in stalks else zero_module(AmbientModule(g.dim), D)
                                      for x in (local.first, local.second)], g.dim, D)
        edge_stalks[k] = EdgeStalk(local.ambient, local.module, spanned)
        rho[(local.first, k)] = GradedMap.selection(first, local.ambient, [(i, i) for i in range(first.rank)])
        rho[(local.second, k)] = GradedMap.selection(
            second, local.ambient, [(first.rank + i, i) for i in range(second.rank)], sign=-1)
    return GSheaf(g, stalks, edge_stalks, rho, notes)


def local_closure(M: ZModule, D: int | None = None) -> GradedSubmodule:
    """
    Γ(L(M)) without building the sheaf: tuples (m_x) with m_x ∈ M^x and
    (m_x, m_y) ∈ M(E) for every edge inside coords.
    """
    D = M.cap if D is None else D
    M = M.truncated(D)
    g = M.graph
    stalks = [image(M.projection([x]), M.module) for x in M.coords]
    position = {x: k for k, x in enumerate(M.coords)}
    locals_ = [edge_module(M, k, D) for k in g.edges_within(M.coords)]
    slices = {}
    for d in M.module.ambient.degrees(D):
        unknowns = [(pos, row) for pos, S in enumerate(stalks) for row in S.slice(d).rows]
        if not unknowns:
            continue
        columns = [dict() for _ in unknowns]
        offset = 0
        for local in locals_:
            a, b = position[local.first], position[local.second]
            width = local.parts[0].slice_dim(d)
            K = local.module.slice(d)
            for idx, (pos, row) in enumerate(unknowns):
                if pos == a:
                    vec = dict(row)
                elif pos == b:
                    vec = {width + col: c for col, c in row.items()}
                else:
                    continue
                for col, c in K.reduce(vec).items():
                    columns[idx][offset + col] = c
            offset += local.ambient.slice_dim(d)
        solutions = nullspace(transpose(columns, offset), len(unknowns))
        starts, total = [], 0
        for part in M.parts:
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
        slices[d] = Slice.span(vectors, M.module.ambient.slice_dim(d))
    return GradedSubmodule(M.module.ambient, D, slices)


def sections_of_localization(M: ZModule, D: int) -> GradedSubmodule:
    """Γ(L(M)) by building L(M) and solving its sections."""
    return global_sections(localize(M, D), D).module


# ──────────────────────────────────────────────────────────────────
# Diagnostics
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class LocalRelationsReport:
    determined: bool
    cap: int
    degree: int | None = None
    module_dim: int | None = None
    closure_dim: int | None = None

    def __bool__(self):
        return self.determined

    def as_dict(self) -> dict:
        out = {"determined_by_local_relations": self.determined, "verified_up_to_degree": self.cap}
        if not self.determined:
            out["witness"] = {"degree": self.degree, "module_dim": self.module_dim,
                              "closure_dim": self.closure_dim}
        return out


def is_determined_by_local_relations(M: ZModule, D: int | None = None) -> LocalRelationsReport:
    D = M.cap if D is None else D
    closure = local_closure(M, D)
    for d in closure.degrees():
        if closure.dim(d) != M.module.dim(d):
            return LocalRelationsReport(False, D, d, M.module.dim(d), closure.dim(d))
    return LocalRelationsReport(True, D)


def _test_opens(g: MomentGraph, limit: int) -> tuple[str, list]:
    if len(g.vertices) <= limit:
        return "exhaustive", g.open_subsets(limit)
    opens, seen = [], set()
    for x in g.linear_extension():
        for I in (g.less(x), g.less_eq(x)):
            if I not in seen:
                seen.add(I)
                opens.append(I)
    opens.append(frozenset(g.vertices))
    return "criterion (3)", opens


def is_flabby_module(M: ZModule, D: int | None = None, limit: int | None = None) -> FlabbinessReport:
    """M^I determined by local relations for every open I tested."""
    D = M.cap if D is None else D
    limit = get_settings().exhaustive_limit if limit is None else limit
    g = M.graph
    mode, opens = _test_opens(g, limit)
    for I in opens:
        verdict = is_determined_by_local_relations(project(M, I), D)
        if not verdict:
            return FlabbinessReport(False, mode, D, open_set=tuple(_ordered(g, I)), degree=verdict.degree)
    return FlabbinessReport(True, mode, D)


def order_kernel(M: ZModule, x: str, D: int | None = None) -> GradedSubmodule:
    """M^{[x]} = ker(M^{≤x} → M^{<x}), as a submodule of F_x."""
    D = M.cap if D is None else D
    g = M.graph
    if x not in M.blocks:
        if x not in g.index:
            raise InputError(f"unknown vertex {x!r}")
        return zero_module(AmbientModule(g.dim), D)
    below = project(M.truncated(D), g.less_eq(x))
    K = kernel(below.projection(g.less(x) & set(below.coords)), below.module, D)
    return image(below.projection([x]), K)


@dataclass(frozen=True)
class VermaFlag:
    ok: bool
    cap: int
    flag: dict = field(default_factory=dict)
    vertex: str | None = None
    degree: int | None = None

    def __bool__(self):
        return self.ok

    def as_dict(self) -> dict:
        out = {"verma_flag": self.ok, "verified_up_to_degree": self.cap,
               "flag": {x: list(ds) for x, ds in self.flag.items()}}
        if not self.ok:
            out["witness"] = {"vertex": self.vertex, "degree": self.degree}
        return out


def flag_from_kernels(kernels: dict, D: int) -> VermaFlag:
    """Verdict from per-vertex kernels given in processing order."""
    flag = {}
    for x, K in kernels.items():
        verdict = is_graded_free(K)
        if not verdict.free:
            return VermaFlag(False, D, flag, x, verdict.failing_degree)
        if verdict.generator_degrees:
            flag[x] = tuple(verdict.generator_degrees)
    return VermaFlag(True, D, flag)


def verma_flag(M: ZModule, D: int | None = None) -> VermaFlag:
    D = M.cap if D is None else D
    with ThreadPoolExecutor(max_workers=get_settings().threads) as pool:
        kernels = list(pool.map(lambda x: order_kernel(M, x, D), M.coords))
    return flag_from_kernels(dict(zip(M.coords, kernels)), D)


def vertex_sequence_dimensions(M: ZModule, I: Iterable[str], x: str,
                               D: int | None = None) -> dict[int, tuple[int, int, int]]:
    """d → (dim M^I_d, dim M^{[x]}_d, dim M^{I∖{x}}_d) for x maximal in the open set I."""
    D = M.cap if D is None else D
    g = M.graph
    I = set(I)
    if not g.is_open(I) or x not in g.maximal(I):
        raise InputError(f"{x!r} is not maximal in an open set {sorted(I)}")
    coords = I & set(M.coords)
    whole = project(M, coords).module
    rest = project(M, coords - {x}).module
    kern = order_kernel(M, x, D)
    return {d: (whole.dim(d), kern.dim(d), rest.dim(d)) for d in range(0, D + 1, 2)}


@lru_cache(maxsize=32)
def acting_algebra(g: MomentGraph, D: int) -> ZModule:
    """Z(G) up to D, shared by the closure checks on one graph."""
    return structure_algebra(g, D, verify=False)


def pointwise_factors(M: ZModule, Z: ZModule, z) -> list:
    """The coordinates of a structure-algebra element z, repeated over the ranks of M's blocks."""
    if not set(M.coords) <= set(Z.coords):
        raise InputError("structure algebra does not cover the module coordinates")
    if any(Z.blocks[x].rank != 1 for x in M.coords):
        raise InputError("structure algebra coordinates must be rank one")
    offsets = dict(zip(Z.coords, component_offsets(Z.parts)))
    factors = []
    for x in M.coords:
        factors.extend([z.element[offsets[x]]] * M.blocks[x].rank)
    return factors


def action_witness(M: ZModule, Z: ZModule) -> dict | None:
    """A product z·m of generators that leaves M (up to the cap), or None."""
    ambient = M.module.ambient
    for z in Z.module.minimal_generators:
        factors = pointwise_factors(M, Z, z)
        for m in M.module.minimal_generators:
            if z.degree + m.degree > M.cap:
                continue
            product = ambient.multiply(m.element, factors)
            if not M.module.contains(product):
                return {"degree": z.degree + m.degree,
                        "product": [str(p.as_expr()) for p in product]}
    return None


def is_closed_under_action(M: ZModule, Z: ZModule) -> bool:
    """Pointwise products of generators of Z with generators of M stay in M (up to the cap)."""
    return action_witness(M, Z) is None


# ──────────────────────────────────────────────────────────────────
# Exact sequences
# ──────────────────────────────────────────────────────────────────

class ZModuleMap:
    """A coordinatewise map: one GradedMap F_x → G_x per shared coordinate."""

    def __init__(self, source: ZModule, target: ZModule, blocks: dict | None = None):
        if source.graph != target.graph:
            raise InputError("maps not coordinate-compatible: different graphs")
        self.source = source
        self.target = target
        self.blocks = {}
        for x, f in (blocks or {}).items():
            if x not in source.blocks or x not in target.blocks:
                raise InputError(f"maps not coordinate-compatible: {x!r} is not a shared coordinate")
            if f.source != source.blocks[x] or f.target != target.blocks[x]:
                raise InputError(f"maps not coordinate-compatible: block at {x!r} has the wrong shape")
            self.blocks[x] = f

    @classmethod
    def natural(cls, source: ZModule, target: ZModule) -> "ZModuleMap":
        """Identity on every shared coordinate (inclusions and projections)."""
        shared = [x for x in source.coords if x in target.blocks]
        return cls(source, target, {x: GradedMap.identity(source.blocks[x]) for x in shared})

    def block(self, x: str) -> GradedMap:
        f = self.blocks.get(x)
        if f is None:
            return GradedMap(self.source.block(x), self.target.block(x))
        return f

    def total(self, I: Iterable[str] | None = None) -> GradedMap:
        """Block-diagonal map between the projections onto I (all coordinates by default)."""
        I = set(self.source.graph.vertices if I is None else I)
        src = [x for x in self.source.coords if x in I]
        tgt = [x for x in self.target.coords if x in I]
        blocks = {(tgt.index(x), src.index(x)): f for x, f in self.blocks.items() if x in I}
        return block_map([self.source.blocks[x] for x in src], [self.target.blocks[x] for x in tgt],
                         blocks, self.source.dim)


@dataclass(frozen=True)
class ExactnessReport:
    exact: bool
    mode: str
    cap: int
    vertex: str | None = None
    open_set: tuple[str, ...] | None = None
    degree: int | None = None
    reason: str | None = None

    def __bool__(self):
        return self.exact

    def as_dict(self) -> dict:
        out = {"short_exact": self.exact, "mode": self.mode, "verified_up_to_degree": self.cap}
        if not self.exact:
            witness = {"degree": self.degree, "reason": self.reason}
            if self.vertex is not None:
                witness["vertex"] = self.vertex
            if self.open_set is not None:
                witness["open_set"] = list(self.open_set)
            out["witness"] = witness
        return out


def _exactness_gap(a: GradedSubmodule, b: GradedSubmodule, c: GradedSubmodule,
                   f: GradedMap, g: GradedMap, D: int):
    lows = [M.ambient.low_degree for M in (a, b, c) if M.ambient.components]
    for d in range(min(lows, default=0), D + 1, 2):
        fa = [f.apply_vector(r, d) for r in a.slice(d).rows]
        if Slice.span(fa, f.target.slice_dim(d)).dim != len(fa):
            return d, "first map not injective"
        if any(g.apply_vector(v, d) for v in fa):
            return d, "composite is not zero"
        gb = Slice.span((g.apply_vector(r, d) for r in b.slice(d).rows), g.target.slice_dim(d))
        if not c.slice(d).is_subspace_of(gb):
            return d, "second map not surjective"
        if b.slice(d).dim != len(fa) + c.slice(d).dim:
            return d, "not exact in the middle"
    return None


def cokernel_torsion_witness(f: ZModuleMap, D: int | None = None) -> dict | None:
    """
    A nonzero class of B/f(A) lying in the rational span of f(A), i.e. a
    torsion element, or None when B/f(A) is torsion free up to the cap.
    """
    A, B = f.source, f.target
    D = min(A.cap, B.cap) if D is None else D
    total = f.total()
    ambient = B.module.ambient
    R = ambient.ring
    if ambient.rank == 0:
        return None
    fa = truncate(image(total, truncate(A.module, D)), D)
    rows = [[p.as_expr() for p in gen.element] for gen in fa.minimal_generators]
    if rows:
        orthogonal = Matrix(rows).nullspace()
        normals = []
        for vec in orthogonal:
            entries = [together(e) for e in vec]
            den = lcm([fraction(e)[1] for e in entries])
            normals.append([R.from_expr(cancel(e * den)) if e != 0 else R.zero for e in entries])
    else:
        normals = [[R.one if i == j else R.zero for i in range(ambient.rank)] for j in range(ambient.rank)]
    Bt = truncate(B.module, D)
    for d in Bt.degrees():
        reps = Slice.span((fa.slice(d).reduce(r) for r in Bt.slice(d).rows), ambient.slice_dim(d)).rows
        if not reps:
            continue
        keys, columns = {}, []
        for rep in reps:
            element = ambient.from_vector(rep, d)
            col = {}
            for j, n in enumerate(normals):
                pairing = sum((a * b for a, b in zip(element, n)), R.zero)
                for mono, c in pairing.items():
                    col[keys.setdefault((j, mono), len(keys))] = c
            columns.append(col)
        combos = nullspace(transpose(columns, len(keys)), len(reps))
        if combos:
            vec = {}
            for idx, c in combos[0].items():
                for col, v in reps[idx].items():
                    vec[col] = vec.get(col, 0) + c * v
            element = ambient.from_vector({k: v for k, v in vec.items() if v}, d)
            return {"degree": d, "element": [str(p.as_expr()) for p in element]}
    return None


def is_short_exact(f: ZModuleMap, g: ZModuleMap, D: int | None = None, mode: str = "auto",
                   limit: int | None = None) -> ExactnessReport:
    """0 → A → B → C → 0 for A = f.source, B = f.target = g.source, C = g.target."""
    A, B, C = f.source, f.target, g.target
    if g.source is not B:
        raise InputError("maps not composable: g must start where f ends")
    D = min(A.cap, B.cap, C.cap) if D is None else D
    limit = get_settings().exhaustive_limit if limit is None else limit
    for h, src, tgt in ((f, A, B), (g, B, C)):
        if not truncate(image(h.total(), truncate(src.module, D)), D).is_subset(truncate(tgt.module, D)):
            raise InputError("map does not send its source module into its target module")
    witness = cokernel_torsion_witness(f, D)
    if witness is not None:
        raise NotInCategoryError("cokernel of the first map has torsion: the quotient is not torsion free",
                                 witness=witness)
    if mode == "auto":
        flabby = all(is_flabby_module(M, D, limit) for M in (A, B, C))
        mode = "lemma" if flabby else "exhaustive"

    graph = B.graph
    if mode == "lemma":
        for x in graph.linear_extension():
            gap = _exactness_gap(order_kernel(A, x, D), order_kernel(B, x, D), order_kernel(C, x, D),
                                 f.block(x), g.block(x), D)
            if gap is not None:
                return ExactnessReport(False, mode, D, vertex=x, degree=gap[0], reason=gap[1])
    elif mode == "exhaustive":
        mode, opens = _test_opens(graph, limit)
        if mode != "exhaustive":
            mode = "principal opens"
            logger.warning(f"{len(graph.vertices)} vertices exceed the exhaustive limit {limit}; "
                           f"checking the ideals {{≤x}} and {{<x}} only")
        for I in opens:
            parts = [project(M, I & set(M.coords)).module for M in (A, B, C)]
            gap = _exactness_gap(*[truncate(P, D) for P in parts], f.total(I), g.total(I), D)
            if gap is not None:
                return ExactnessReport(False, mode, D, open_set=tuple(_ordered(graph, I)),
                                       degree=gap[0], reason=gap[1])
    else:
        raise InputError(f"unknown exactness mode {mode!r}")
    return ExactnessReport(True, mode, D)
