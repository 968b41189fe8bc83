# src/graph/moment_graph.py

"""
Moment graphs: finite vertex sets with a partial order and edges labelled by
lines in a rational vector space V.

The order is the reachability closure of its generating relations.  By default
every edge (u, v) is itself a relation u < v; graphs derived by γ-reduction (or
read from JSON with "order_from_edges": false) carry the relations explicitly.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

from algebra.errors import InputError
from algebra.polyeng import to_fraction

logger = logging.getLogger(__name__)


def proportional(a: Sequence[Fraction], b: Sequence[Fraction]) -> bool:
    """True when the two vectors span the same line (or either is zero)."""
    return all(a[i] * b[j] == a[j] * b[i] for i in range(len(a)) for j in range(i + 1, len(a)))


@dataclass(frozen=True)
class Edge:
    """A labelled edge; when the order comes from edges, u < v."""

    u: str
    v: str
    label: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "label", tuple(to_fraction(c) for c in self.label))

    @property
    def endpoints(self) -> frozenset:
        return frozenset((self.u, self.v))

    def other(self, x: str) -> str:
        if x == self.u:
            return self.v
        if x == self.v:
            return self.u
        raise InputError(f"vertex {x!r} is not an endpoint of edge {self.u}—{self.v}")

    def reversed(self) -> "Edge":
        return Edge(self.v, self.u, self.label)

    def __str__(self):
        return f"{self.u}—{self.v}"


@dataclass(frozen=True)
class GKMVerdict:
    gkm: bool
    vertex: str | None = None
    edges: tuple[str, str] | None = None

    def __bool__(self):
        return self.gkm

    def as_dict(self) -> dict:
        out = {"gkm": self.gkm}
        if not self.gkm:
            out["vertex"] = self.vertex
            out["edges"] = list(self.edges)
        return out


@dataclass(frozen=True)
class MomentGraph:
    """A finite moment graph (V, E, ≤, l) over Q^dim."""

    dim: int
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...] = ()
    relations: tuple[tuple[str, str], ...] = ()
    order_from_edges: bool = True

    def __repr__(self):
        return f"MomentGraph(dim={self.dim}, |V|={len(self.vertices)}, |E|={len(self.edges)})"

    # ------------------------------------------------------------------
    # Order
    # ------------------------------------------------------------------

    def generating_relations(self) -> tuple[tuple[str, str], ...]:
        rels = set(self.relations)
        if self.order_from_edges:
            rels.update((e.u, e.v) for e in self.edges)
        return tuple(sorted(rels, key=lambda r: (self.index.get(r[0], -1), self.index.get(r[1], -1))))

    @cached_property
    def index(self) -> dict[str, int]:
        return {x: i for i, x in enumerate(self.vertices)}

    @cached_property
    def _above(self) -> dict[str, frozenset]:
        succ: dict[str, set] = {x: set() for x in self.vertices}
        for a, b in self.generating_relations():
            if a in succ and b in succ:
                succ[a].add(b)
        closure = {}
        for x in self.vertices:
            seen: set = set()
            stack = list(succ[x])
            while stack:
                y = stack.pop()
                if y in seen:
                    continue
                seen.add(y)
                stack.extend(succ[y])
            closure[x] = frozenset(seen)
        return closure

    @cached_property
    def _below(self) -> dict[str, frozenset]:
        below: dict[str, set] = {x: set() for x in self.vertices}
        for x, ups in self._above.items():
            for y in ups:
                below[y].add(x)
        return {x: frozenset(s) for x, s in below.items()}

    def _check_vertex(self, x: str) -> None:
        if x not in self.index:
            raise InputError(f"unknown vertex {x!r}")

    def is_less(self, a: str, b: str) -> bool:
        self._check_vertex(a)
        self._check_vertex(b)
        return b in self._above[a]

    def comparable(self, a: str, b: str) -> bool:
        return self.is_less(a, b) or self.is_less(b, a)

    def less(self, x: str) -> frozenset:
        """{y : y < x}"""
        self._check_vertex(x)
        return self._below[x]

    def less_eq(self, x: str) -> frozenset:
        return self.less(x) | {x}

    def greater(self, x: str) -> frozenset:
        self._check_vertex(x)
        return self._above[x]

    def greater_eq(self, x: str) -> frozenset:
        return self.greater(x) | {x}

    def is_open(self, subset: Iterable[str]) -> bool:
        """Open sets of the Alexandrov topology are the downward-closed ones."""
        subset = set(subset)
        for x in subset:
            self._check_vertex(x)
        return all(self._below[x] <= subset for x in subset)

    def maximal(self, subset: Iterable[str]) -> list[str]:
        subset = set(subset)
        return [x for x in self.vertices if x in subset and not (self._above[x] & subset)]

    def minimal(self, subset: Iterable[str]) -> list[str]:
        subset = set(subset)
        return [x for x in self.vertices if x in subset and not (self._below[x] & subset)]

    def linear_extension(self, subset: Iterable[str] | None = None) -> list[str]:
        """Topological order of a vertex subset, ties broken by vertex position."""
        subset = set(self.vertices if subset is None else subset)
        indegree = {x: len(self._below[x] & subset) for x in subset}
        heap = [(self.index[x], x) for x, n in indegree.items() if n == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            _, x = heapq.heappop(heap)
            order.append(x)
            for y in self._above[x] & subset:
                indegree[y] -= 1
                if indegree[y] == 0:
                    heapq.heappush(heap, (self.index[y], y))
        if len(order) != len(subset):
            raise InputError("order relation contains a cycle")
        return order

    def is_linear_extension(self, order: Sequence[str]) -> bool:
        position = {x: i for i, x in enumerate(order)}
        return all(position[a] < position[b] for a in order for b in self._above[a] if b in position)

    def open_subsets(self, limit: int = 20) -> list[frozenset]:
        """All downward-closed vertex sets, smallest first."""
        n = len(self.vertices)
        if n > limit:
            raise InputError(f"refusing to enumerate open sets of a {n}-vertex graph (limit {limit})")
        result = []
        for size in range(n + 1):
            for combo in itertools.combinations(self.vertices, size):
                if self.is_open(combo):
                    result.append(frozenset(combo))
        return result

    # ------------------------------------------------------------------
    # Edges
    # ------------------------------------------------------------------

    @cached_property
    def _incident(self) -> dict[str, tuple[int, ...]]:
        inc: dict[str, list] = {x: [] for x in self.vertices}
        for k, e in enumerate(self.edges):
            for x in (e.u, e.v):
                if x in inc:
                    inc[x].append(k)
        return {x: tuple(ks) for x, ks in inc.items()}

    def edges_at(self, x: str) -> list[int]:
        self._check_vertex(x)
        return list(self._incident[x])

    def edges_into(self, x: str) -> list[int]:
        """Indices of the edges E: y → x with y < x."""
        below = self.less(x)
        return [k for k in self._incident[x] if self.edges[k].other(x) in below]

    def edges_within(self, subset: Iterable[str]) -> list[int]:
        subset = set(subset)
        return [k for k, e in enumerate(self.edges) if e.u in subset and e.v in subset]

    def lower_end(self, k: int) -> str:
        e = self.edges[k]
        return e.u if self.is_less(e.u, e.v) else e.v

    def upper_end(self, k: int) -> str:
        return self.edges[k].other(self.lower_end(k))

    # ------------------------------------------------------------------
    # Diagnostics
    # ------------------------------------------------------------------

    def validate(self) -> list[str]:
        """All violated invariants, one message each; empty when valid."""
        problems = []
        known = set()
        for x in self.vertices:
            if x in known:
                problems.append(f"duplicate vertex {x!r}")
            known.add(x)
        pairs = set()
        for k, e in enumerate(self.edges):
            where = f"edge {k} ({e})"
            if e.u not in known or e.v not in known:
                problems.append(f"{where}: unknown endpoint")
                continue
            if e.u == e.v:
                problems.append(f"{where}: self-loop")
                continue
            if len(e.label) != self.dim:
                problems.append(f"{where}: label has length {len(e.label)}, expected {self.dim}")
            elif not any(e.label):
                problems.append(f"{where}: zero label")
            if e.endpoints in pairs:
                problems.append(f"{where}: second edge between the same vertices")
            pairs.add(e.endpoints)
        for a, b in self.relations:
            if a not in known or b not in known:
                problems.append(f"relation {a} < {b}: unknown vertex")
        cyclic = [x for x in self.vertices if x in self._above.get(x, ())]
        if cyclic:
            problems.append(f"order is not antisymmetric: cycle through {cyclic[0]!r}")
        else:
            for k, e in enumerate(self.edges):
                if e.u in known and e.v in known and e.u != e.v and not self.comparable(e.u, e.v):
                    problems.append(f"edge {k} ({e}): endpoints are incomparable")
        return problems

    def is_gkm(self) -> GKMVerdict:
        """Pairwise linear independence of the labels at every vertex."""
        for x in self.vertices:
            incident = self._incident[x]
            for a, b in itertools.combinations(incident, 2):
                if proportional(self.edges[a].label, self.edges[b].label):
                    return GKMVerdict(False, x, (str(self.edges[a]), str(self.edges[b])))
        return GKMVerdict(True)

    def connected_components(self) -> list[list[str]]:
        parent = {x: x for x in self.vertices}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in self.edges:
            ra, rb = find(e.u), find(e.v)
            if ra != rb:
                parent[max(ra, rb, key=self.index.get)] = min(ra, rb, key=self.index.get)
        groups: dict[str, list] = {}
        for x in self.vertices:
            groups.setdefault(find(x), []).append(x)
        return list(groups.values())

    def component_kind(self, component: Sequence[str]) -> str:
        """'generic', 'subgeneric' or 'other'."""
        k = len(self.edges_within(component))
        if len(component) == 1 and k == 0:
            return "generic"
        if len(component) == 2 and k == 1:
            return "subgeneric"
        return "other"

    # ------------------------------------------------------------------
    # Derived graphs
    # ------------------------------------------------------------------

    def tilt(self) -> "MomentGraph":
        """Same vertices, edges and labels; reversed order."""
        return MomentGraph(
            self.dim,
            self.vertices,
            tuple(e.reversed() for e in self.edges),
            tuple((b, a) for a, b in self.relations),
            self.order_from_edges,
        )

    def gamma_reduction(self, gamma: Sequence) -> "MomentGraph":
        """Keep exactly the edges whose label is proportional to γ; the order is unchanged."""
        gamma = tuple(to_fraction(c) for c in gamma)
        if len(gamma) != self.dim:
            raise InputError(f"γ has length {len(gamma)}, expected {self.dim}")
        if not any(gamma):
            raise InputError("γ must be nonzero")
        kept = tuple(e for e in self.edges if proportional(e.label, gamma))
        logger.debug(f"γ-reduction keeps {len(kept)} of {len(self.edges)} edges")
        return MomentGraph(self.dim, self.vertices, kept, self.generating_relations(), False)


# ──────────────────────────────────────────────────────────────────
# Builders
# ──────────────────────────────────────────────────────────────────

def generic(dim: int = 1) -> MomentGraph:
    """One vertex and no edges."""
    return MomentGraph(dim, ("x",))


def subgeneric(label: Sequence = (1,)) -> MomentGraph:
    """Two vertices x < y joined by one labelled edge."""
    label = tuple(to_fraction(c) for c in label)
    return MomentGraph(len(label), ("x", "y"), (Edge("x", "y", label),))


def diamond(alpha: Sequence = (1, 0), beta: Sequence = (0, 1)) -> MomentGraph:
    """Vertices u, v < w with edges u—w labelled α and v—w labelled β."""
    alpha = tuple(to_fraction(c) for c in alpha)
    beta = tuple(to_fraction(c) for c in beta)
    if len(alpha) != len(beta):
        raise InputError("diamond labels must have the same length")
    return MomentGraph(len(alpha), ("u", "v", "w"), (Edge("u", "w", alpha), Edge("v", "w", beta)))


BUILTINS = {
    "generic": generic,
    "subgeneric": subgeneric,
    "diamond": diamond,
}
