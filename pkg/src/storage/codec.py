# src/storage/codec.py

"""
JSON reading and writing for every object the CLI exchanges.

Formats:
  polynomial : [[exponents...], "num/den"] pairs, descending grlex
  graph      : {"dim", "vertices", "edges": [{"u", "v", "label"}], "relations",
                optionally "order_from_edges"}
  zmodule    : {"graph", "coords", "shifts", "cap",
                "generators": [{"degree", "element": {vertex: [poly, ...]}}]}
  sheaf      : {"graph", "stalks": {vertex: [shifts]},
                "edges": [null | {"shifts", "annihilated", "relations"}],
                "rho": [{"vertex", "edge", "entries": [[row, col, poly], ...]}]}
               localized sheaves add "cap", "stalk_generators" and per-edge "module"
  kl table   : {vertex: [c0, c1, ...]}
"""

import json
import logging
from pathlib import Path

from sympy.polys.orderings import grlex

from algebra.errors import InputError
from algebra.polyeng import (
    AmbientModule,
    GradedMap,
    GradedSubmodule,
    polynomial_ring,
    scalar_to_str,
    to_fraction,
    span_degreewise,
    to_scalar,
)
from graph.moment_graph import Edge, MomentGraph
from sheaves.sheaf import EdgeStalk, GSheaf, Stalk
from sheaves.zmod import ZModule

logger = logging.getLogger(__name__)


# ------------------------------------------------------------------
# Documents
# ------------------------------------------------------------------

def dumps(payload) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(payload, path) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding='utf-8')
    logger.info(f"Wrote {path}")


def read_json(path):
    try:
        with open(path, encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"{path} is not valid JSON: {e}") from None


def _require(data, key, where):
    if not isinstance(data, dict) or key not in data:
        raise InputError(f"{where}: missing field {key!r}")
    return data[key]


# ------------------------------------------------------------------
# Polynomials and elements
# ------------------------------------------------------------------

def poly_to_json(p) -> list:
    return [[list(m), scalar_to_str(c)] for m, c in sorted(p.items(), key=lambda t: grlex(t[0]), reverse=True)]


def poly_from_json(data, dim: int):
    R = polynomial_ring(dim)
    terms = {}
    if not isinstance(data, list):
        raise InputError(f"polynomial must be a list of [exponents, coefficient] pairs, got {data!r}")
    for term in data:
        try:
            exps, coeff = term
            exps = tuple(int(e) for e in exps)
        except (TypeError, ValueError):
            raise InputError(f"malformed polynomial term {term!r}") from None
        if len(exps) != dim or any(e < 0 for e in exps):
            raise InputError(f"exponent vector {list(exps)} does not fit a ring in {dim} variables")
        try:
            c = to_scalar(coeff)
        except (ValueError, ZeroDivisionError):
            raise InputError(f"malformed coefficient {coeff!r}") from None
        if c:
            terms[exps] = terms.get(exps, R.domain.zero) + c
    return R.from_dict(terms) if terms else R.zero


def element_to_json(element) -> list:
    return [poly_to_json(p) for p in element]


def element_from_json(data, dim: int) -> tuple:
    if not isinstance(data, list):
        raise InputError("element must be a list of polynomials")
    return tuple(poly_from_json(p, dim) for p in data)


def generators_to_json(M: GradedSubmodule) -> list:
    return [{"degree": g.degree, "element": element_to_json(g.element)} for g in M.minimal_generators]


def generators_from_json(data, ambient: AmbientModule, cap: int) -> GradedSubmodule:
    gens = []
    for k, g in enumerate(data or []):
        where = f"generator {k}"
        element = element_from_json(_require(g, "element", where), ambient.dim)
        gens.append((element, int(_require(g, "degree", where))))
    return span_degreewise(gens, ambient, cap)


# ------------------------------------------------------------------
# Graphs
# ------------------------------------------------------------------

def graph_to_json(g: MomentGraph) -> dict:
    out = {
        "dim": g.dim,
        "vertices": list(g.vertices),
        "edges": [{"u": e.u, "v": e.v, "label": [scalar_to_str(c) for c in e.label]} for e in g.edges],
        "relations": [list(r) for r in g.relations],
    }
    if not g.order_from_edges:
        out["order_from_edges"] = False
    return out


def graph_from_json(data) -> MomentGraph:
    dim = _require(data, "dim", "graph")
    vertices = _require(data, "vertices", "graph")
    if not isinstance(dim, int) or dim < 1:
        raise InputError(f"graph: dim must be a positive integer, got {dim!r}")
    edges = []
    for k, e in enumerate(data.get("edges", [])):
        where = f"graph edge {k}"
        try:
            label = tuple(to_fraction(c) for c in _require(e, "label", where))
        except (TypeError, ValueError, ZeroDivisionError):
            raise InputError(f"{where}: malformed label") from None
        edges.append(Edge(str(_require(e, "u", where)), str(_require(e, "v", where)), label))
    relations = tuple((str(a), str(b)) for a, b in data.get("relations", []))
    g = MomentGraph(dim, tuple(str(x) for x in vertices), tuple(edges), relations,
                    bool(data.get("order_from_edges", True)))
    problems = g.validate()
    if problems:
        raise InputError("invalid moment graph: " + "; ".join(problems))
    return g

# ------------------------------------------------------------------
# Z-modules
# ------------------------------------------------------------------

def zmodule_to_json(M: ZModule) -> dict:
    offsets, total = {}, 0
    for x in M.coords:
        offsets[x] = (total, total + M.blocks[x].rank)
        total += M.blocks[x].rank
    gens = []
    for g in M.module.minimal_generators:
        gens.append({
            "degree": g.degree,
            "element": {x: element_to_json(g.element[a:b]) for x, (a, b) in offsets.items()},
        })
    return {
        "graph": graph_to_json(M.graph),
        "coords": list(M.coords),
        "shifts": {x: list(M.blocks[x].shifts) for x in M.coords},
        "cap": M.cap,
        "generators": gens,
    }


def zmodule_from_json(data, cap: int | None = None) -> ZModule:
    g = graph_from_json(_require(data, "graph", "module"))
    coords = [str(x) for x in data.get("coords", g.vertices)]
    shifts = {x: tuple(int(k) for k in s) for x, s in data.get("shifts", {}).items()}
    cap = int(cap if cap is not None else _require(data, "cap", "module"))
    ordered = [x for x in g.vertices if x in set(coords)]
    if len(ordered) != len(set(coords)):
        raise InputError("module: coords name unknown vertices")
    gens = []
    for k, gen in enumerate(_require(data, "generators", "module")):
        where = f"module generator {k}"
        parts = _require(gen, "element", where)
        element = []
        for x in ordered:
            rank = len(shifts.get(x, (0,)))
            polys = element_from_json(parts.get(x, [[] for _ in range(rank)]), g.dim)
            if len(polys) != rank:
                raise InputError(f"{where}: coordinate {x!r} needs {rank} components")
            element.extend(polys)
        unknown = set(parts) - set(ordered)
        if unknown:
            raise InputError(f"{where}: entries for non-coordinates {sorted(unknown)}")
        gens.append((tuple(element), int(_require(gen, "degree", where))))
    return ZModule.from_generators(g, ordered, gens, cap, shifts)


# ------------------------------------------------------------------
# Sheaves
# ------------------------------------------------------------------

def sheaf_to_json(m: GSheaf, D: int | None = None) -> dict:
    g = m.graph
    out = {"graph": graph_to_json(g), "stalks": {}, "edges": [], "rho": []}
    presentations = {}
    caps = []
    for x in g.vertices:
        st = m.stalk(x)
        out["stalks"][x] = list(st.ambient.shifts)
        if not st.is_free_stalk:
            presentations[x] = generators_to_json(st.module)
            caps.append(st.module.cap)
    for k, e in enumerate(g.edges):
        es = m.edge_stalk(k)
        if es.ambient.rank == 0:
            out["edges"].append(None)
            continue
        entry = {
            "shifts": list(es.ambient.shifts),
            "annihilated": all(c.annihilator is not None for c in es.ambient.components),
            "relations": generators_to_json(es.relations) if es.relations is not None else [],
        }
        if es.relations is not None:
            caps.append(es.relations.cap)
        if es.module is not None:
            entry["module"] = generators_to_json(es.module)
            caps.append(es.module.cap)
        out["edges"].append(entry)
        for x in (e.u, e.v):
            f = m.rho_map(x, k)
            if f.entries:
                out["rho"].append({
                    "vertex": x,
                    "edge": k,
                    "entries": [[j, i, poly_to_json(p)] for (j, i), p in sorted(f.entries.items())],
                })
    if caps or D is not None:
        out["cap"] = min(caps + ([D] if D is not None else []))
    if presentations:
        out["stalk_generators"] = presentations
    if m.notes:
        out["notes"] = dict(m.notes)
    return out


def sheaf_from_json(data, cap: int | None = None, allow_presentations: bool = False) -> GSheaf:
    g = graph_from_json(_require(data, "graph", "sheaf"))
    presented = data.get("stalk_generators") or {}
    if presented and not allow_presentations:
        raise InputError("sheaf: vertex stalks must be free (give shift lists only)")
    if cap is None:
        cap = data.get("cap")
    if presented and cap is None:
        raise InputError("sheaf: a degree cap is required to read presented stalks")
    stalks = {}
    for x, shifts in _require(data, "stalks", "sheaf").items():
        if x not in g.index:
            raise InputError(f"sheaf: stalk for unknown vertex {x!r}")
        F = AmbientModule.free(g.dim, [int(k) for k in shifts])
        module = generators_from_json(presented[x], F, cap) if x in presented else None
        stalks[x] = Stalk(F, module)
    edges = data.get("edges", [])
    if len(edges) not in (0, len(g.edges)):
        raise InputError(f"sheaf: {len(edges)} edge entries for {len(g.edges)} edges")
    edge_stalks = {}
    for k, entry in enumerate(edges):
        if entry is None:
            continue
        label = g.edges[k].label
        shifts = [int(s) for s in _require(entry, "shifts", f"sheaf edge {k}")]
        ambient = (AmbientModule.quotient(g.dim, shifts, label) if entry.get("annihilated", True)
                   else AmbientModule.free(g.dim, shifts))
        relations = entry.get("relations") or []
        module = entry.get("module")
        if (relations or module is not None) and cap is None:
            raise InputError("sheaf: a degree cap is required to read edge relations")
        edge_stalks[k] = EdgeStalk(
            ambient,
            generators_from_json(relations, ambient, cap) if relations else None,
            generators_from_json(module, ambient, cap) if module is not None else None,
        )
    rho = {}
    for r in data.get("rho", []):
        x, k = str(_require(r, "vertex", "rho")), int(_require(r, "edge", "rho"))
        if not 0 <= k < len(g.edges):
            raise InputError(f"rho: unknown edge {k}")
        source = stalks.get(x, Stalk.zero(g.dim)).ambient
        target = edge_stalks.get(k, EdgeStalk.zero(g.dim)).ambient
        entries = {(int(j), int(i)): poly_from_json(p, g.dim) for j, i, p in r.get("entries", [])}
        rho[(x, k)] = GradedMap(source, target, entries)
    m = GSheaf(g, stalks, edge_stalks, rho, data.get("notes"))
    if cap is not None:
        problems = m.validate(cap)
        if problems:
            raise InputError("invalid sheaf: " + "; ".join(problems))
    return m


# ------------------------------------------------------------------
# Reports
# ------------------------------------------------------------------

def bmp_to_json(b, flag=None) -> dict:
    out = {
        "vertex": b.vertex,
        "verified_up_to_degree": b.cap,
        "linear_extension": list(b.order),
        "sheaf": sheaf_to_json(b.sheaf, b.cap),
        "stalk_shifts": {x: list(b.shifts(x)) for x in b.order},
        "delta_hilbert": {x: {str(d): n for d, n in t.delta_hilbert.items()} for x, t in b.trace.items()},
    }
    if flag is not None:
        out["verma_flag"] = flag.as_dict()
    return out


def kl_table_to_json(table) -> dict:
    return table.as_dict()
