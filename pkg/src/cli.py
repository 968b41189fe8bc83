# src/cli.py

import argparse
import hashlib
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from algebra.errors import InputError, KLMismatchError, MomentSheafError
from config import __version__, get_settings, setup_logging
from graph.coxeter import CoxeterSystem, bruhat_moment_graph, id_to_word
from graph.moment_graph import BUILTINS
from sheaves.bmp import bmp_character, bmp_verma_flag, build_bmp, projectivity_witness
from sheaves.sheaf import is_flabby, is_generated_by_global_sections, sections
from sheaves.zmod import is_flabby_module, localize, structure_algebra, verma_flag
from storage.codec import (
    bmp_to_json,
    dumps,
    generators_to_json,
    graph_from_json,
    graph_to_json,
    kl_table_to_json,
    read_json,
    sheaf_from_json,
    sheaf_to_json,
    write_json,
    zmodule_from_json,
    zmodule_to_json,
)
from verification.klverify import compare_bmp_kl, kl_polynomials, resolve_element


@dataclass(frozen=True)
class RunReport:
    """One CLI invocation: what ran, on which inputs, under which cap."""

    command: str
    inputs_digest: str
    cap: int | None
    flags: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    version: str = __version__
    wall_time: float | None = None

    def as_dict(self) -> dict:
        out = {
            "command": self.command,
            "inputs_sha256": self.inputs_digest,
            "verified_up_to_degree": self.cap,
            "flags": dict(self.flags),
            "results": self.results,
            "version": self.version,
        }
        if self.wall_time is not None:
            out["wall_time_seconds"] = round(self.wall_time, 3)
        return out


def digest(*payloads) -> str:
    return hashlib.sha256(dumps(list(payloads)).encode('utf-8')).hexdigest()


def parse_vector(text: str) -> tuple[str, ...]:
    """ "1,0" or "1 -1/2" -> ("1", "0") / ("1", "-1/2") """
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if not parts:
        raise InputError(f"empty vector {text!r}")
    return tuple(parts)


def parse_vertices(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def parse_parabolic(text: str) -> tuple[int, ...]:
    """ "" -> (); "1,3" or "s1 s3" -> (0, 2) """
    return tuple(int(k) - 1 for k in re.findall(r"\d+", text or ""))


def hilbert_frame(hf: dict[int, int]) -> pd.DataFrame:
    return pd.DataFrame({"degree": list(hf), "dimension": list(hf.values())})


class MomentSheafCLI:
    """
    Wires the engine components to the command line.

    Every command returns a JSON payload; graph commands return the graph
    itself so it can be fed to the next command, everything else a RunReport.
    """

    def __init__(self):
        self.logger = setup_logging()
        self.settings = get_settings()
        self.logger.debug(f"momentsheaf {__version__}, threads={self.settings.threads}")

    # ------------------------------------------------------------------
    # Main entry point
    # ------------------------------------------------------------------

    def run(self, args) -> int:
        started = time.perf_counter()
        handler = getattr(self, f"cmd_{args.command}")
        payload = handler(args)
        if isinstance(payload, RunReport):
            if args.timing:
                payload = RunReport(payload.command, payload.inputs_digest, payload.cap, payload.flags,
                                    payload.results, payload.version, time.perf_counter() - started)
            payload = payload.as_dict()
        self._emit(payload, args.out)
        return 0

    def _emit(self, payload, out):
        if out:
            write_json(payload, out)
        else:
            sys.stdout.write(dumps(payload))

    def _csv(self, frame: pd.DataFrame, path):
        if not path:
            return
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, encoding='utf-8-sig')
        self.logger.info(f"Saved table to: {path}")

    # ------------------------------------------------------------------
    # graph
    # ------------------------------------------------------------------

    def cmd_graph(self, args) -> dict:
        if args.graph_command == "coxeter":
            system = CoxeterSystem.from_type(args.type)
            g = bruhat_moment_graph(system, parse_parabolic(args.parabolic))
        elif args.graph_command == "builtin":
            g = self._builtin(args)
        else:
            g = graph_from_json(read_json(args.graph))
            if args.graph_command == "tilt":
                g = g.tilt()
            elif args.graph_command == "reduce":
                g = g.gamma_reduction(parse_vector(args.gamma))
            elif args.graph_command == "check":
                verdict = g.is_gkm()
                self.logger.info(f"{g!r}: GKM={bool(verdict)}")
                return {"graph": graph_to_json(g), "gkm": verdict.as_dict(),
                        "components": [sorted(c) for c in g.connected_components()]}
        problems = g.validate()
        if problems:
            raise InputError("invalid moment graph: " + "; ".join(problems))
        self.logger.info(f"Graph ready: {len(g.vertices)} vertices, {len(g.edges)} edges")
        return graph_to_json(g)

    def _builtin(self, args):
        if args.name not in BUILTINS:
            raise InputError(f"unknown builtin graph {args.name!r}; choose from {sorted(BUILTINS)}")
        if args.name == "generic":
            return BUILTINS["generic"](args.dim)
        if args.name == "subgeneric":
            return BUILTINS["subgeneric"](parse_vector(args.label or "1"))
        return BUILTINS["diamond"](parse_vector(args.alpha or "1,0"), parse_vector(args.beta or "0,1"))

    # ------------------------------------------------------------------
    # zmod / sheaf reports
    # ------------------------------------------------------------------

    def cmd_zalg(self, args) -> RunReport:
        data = read_json(args.graph)
        g = graph_from_json(data)
        D = args.max_degree or 2 * len(g.vertices) + 2
        Z = structure_algebra(g, D)
        hf = Z.hilbert_function()
        self._csv(hilbert_frame(hf), args.csv)
        results = {
            "generator_degrees": Z.generator_degrees(),
            "hilbert_function": hf,
            "module": zmodule_to_json(Z),
        }
        return RunReport("zalg", digest(data), D, {}, results)

    def cmd_sections(self, args) -> RunReport:
        data = read_json(args.sheaf)
        m = sheaf_from_json(data, allow_presentations=True)
        D = args.max_degree or data.get("cap") or 2 * len(m.graph.vertices) + 2
        I = parse_vertices(args.open) if args.open else list(m.graph.vertices)
        space = sections(m, I, D)
        results = {
            "vertices": list(space.subgraph),
            "open": m.graph.is_open(I),
            "generator_degrees": space.generator_degrees(),
            "hilbert_function": space.module.hilbert_function(),
            "generators": generators_to_json(space.module),
        }
        return RunReport("sections", digest(data, I), D, {}, results)

    def cmd_localize(self, args) -> RunReport:
        data = read_json(args.module)
        M = zmodule_from_json(data)
        D = min(args.max_degree or M.cap, M.cap)
        L = localize(M, D)
        return RunReport("localize", digest(data), D, {}, {"sheaf": sheaf_to_json(L, D)})

    def cmd_flags(self, args) -> RunReport:
        if bool(args.module) == bool(args.sheaf):
            raise InputError("flags needs exactly one of --module or --sheaf")
        if args.module:
            data = read_json(args.module)
            M = zmodule_from_json(data)
            D = min(args.max_degree or M.cap, M.cap)
            results = {
                "verma_flag": verma_flag(M, D).as_dict(),
                "flabbiness": is_flabby_module(M, D).as_dict(),
            }
            return RunReport("flags", digest(data), D, {"input": "module"}, results)

        data = read_json(args.sheaf)
        m = sheaf_from_json(data, allow_presentations=True)
        D = args.max_degree or data.get("cap") or 2 * len(m.graph.vertices) + 2
        generated = is_generated_by_global_sections(m, D)
        results = {"global_sections": generated.as_dict()}
        if generated:
            results["flabbiness"] = is_flabby(m, D, criterion=args.criterion).as_dict()
        flags = {"input": "sheaf", "criterion": args.criterion}
        return RunReport("flags", digest(data), D, flags, results)

    # ------------------------------------------------------------------
    # bmp / verify
    # ------------------------------------------------------------------

    def cmd_bmp(self, args) -> RunReport:
        data = read_json(args.graph)
        g = graph_from_json(data)
        if args.vertex not in g.index:
            raise InputError(f"unknown vertex {args.vertex!r}")
        D = args.max_degree or 2 * len(g.greater_eq(args.vertex))
        order = parse_vertices(args.order) if args.order else None
        b = build_bmp(g, args.vertex, D, order)
        flag = bmp_verma_flag(b) if args.check else None
        results = bmp_to_json(b, flag)
        results["character"] = bmp_character(b)
        if args.check:
            results["projectivity"] = projectivity_witness(b).as_dict()
        return RunReport("bmp", digest(data, args.vertex, order), D, {"check": args.check}, results)

    def cmd_verify(self, args) -> RunReport:
        system = CoxeterSystem.from_type(args.type)
        top = resolve_element(system, args.w)
        flags = {"type": system.name, "w": top, "descent": args.descent}
        if args.verify_command == "table":
            table = kl_polynomials(system, args.w, args.descent)
            return RunReport("verify table", digest(flags), None, flags, {"kl": kl_table_to_json(table)})

        D = args.max_degree or 2 * len(id_to_word(top)) + 4
        report = compare_bmp_kl(system, args.w, D, args.descent)
        self._csv(report.frame(), args.csv)
        run = RunReport("verify kl", digest(flags), D, flags, report.as_dict())
        if not report.matched:
            self._emit(run.as_dict(), args.out)
            raise KLMismatchError(f"BMP stalks disagree with KL polynomials at {report.mismatches()}")
        self.logger.info(f"{system.name}, w = {top}: all {len(report.rows)} stalks match")
        return run


# ------------------------------------------------------------------
# Argument parsing
# ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="momentsheaf", description="Sheaves on moment graphs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write JSON here instead of stdout")
    common.add_argument("--timing", action="store_true", help="include wall time in the report")
    capped = argparse.ArgumentParser(add_help=False)
    capped.add_argument("--max-degree", type=int, dest="max_degree", help="degree cap D (even)")

    sub = parser.add_subparsers(dest="command", required=True)

    graph = sub.add_parser("graph", help="generate or transform moment graphs")
    gsub = graph.add_subparsers(dest="graph_command", required=True)
    p = gsub.add_parser("coxeter", parents=[common])
    p.add_argument("--type", required=True, help='e.g. "A3", "B2", "I2(4)"')
    p.add_argument("--parabolic", default="", help='simple reflections of W_J, e.g. "1,3"')
    p = gsub.add_parser("builtin", parents=[common])
    p.add_argument("--name", required=True, choices=sorted(BUILTINS))
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--label")
    p.add_argument("--alpha")
    p.add_argument("--beta")
    for name in ("tilt", "reduce", "check"):
        p = gsub.add_parser(name, parents=[common])
        p.add_argument("--graph", required=True)
        if name == "reduce":
            p.add_argument("--gamma", required=True, help='e.g. "1,0"')

    p = sub.add_parser("zalg", parents=[common, capped], help="structure algebra Z(G)")
    p.add_argument("--graph", required=True)
    p.add_argument("--csv", help="write the Hilbert function as CSV")

    p = sub.add_parser("sections", parents=[common, capped], help="sections of a sheaf over a vertex set")
    p.add_argument("--sheaf", required=True)
    p.add_argument("--open", help='comma separated vertices; all vertices when omitted')

    p = sub.add_parser("localize", parents=[common, capped], help="the sheaf L(M) of a Z-module")
    p.add_argument("--module", required=True)

    p = sub.add_parser("flags", parents=[common, capped], help="Verma flag and flabbiness")
    p.add_argument("--module")
    p.add_argument("--sheaf")
    p.add_argument("--criterion", type=int, choices=(2, 3, 4), default=4)

    p = sub.add_parser("bmp", parents=[common, capped], help="Braden-MacPherson sheaf B(v)")
    p.add_argument("--graph", required=True)
    p.add_argument("--vertex", required=True)
    p.add_argument("--order", help="linear extension of the vertices above v, comma separated")
    p.add_argument("--check", action="store_true", help="add projectivity and Verma-flag verdicts")

    verify = sub.add_parser("verify", help="Kazhdan-Lusztig cross-checks")
    vsub = verify.add_subparsers(dest="verify_command", required=True)
    for name in ("kl", "table"):
        p = vsub.add_parser(name, parents=[common, capped] if name == "kl" else [common])
        p.add_argument("--type", required=True)
        p.add_argument("--w", required=True, help='e.g. "s2 s1 s3 s2"')
        p.add_argument("--descent", choices=("first", "last"), default="first")
        if name == "kl":
            p.add_argument("--csv", help="write the per-vertex comparison as CSV")
    return parser


# ------------------------------------------------------------------
# Entry point
# ------------------------------------------------------------------

def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cli = MomentSheafCLI()
        code = cli.run(args)
    except KeyboardInterrupt:
        print("\nInterrupted by user.", file=sys.stderr)
        sys.exit(130)
    except MomentSheafError as e:
        print(f"momentsheaf: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    sys.exit(code)


if __name__ == "__main__":
    main()
