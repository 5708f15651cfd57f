"""Command-line front end.

    valuectx analyze   PROGRAM [--analysis sign|liveness|pta] [--format table|records]
    valuectx contexts  PROGRAM [--analysis ...] [--format table|records|dot]
    valuectx callgraph PROGRAM [--analysis ...] [--mode context|cha] [--format table|dot]
    valuectx paths     PROGRAM [--analysis sign|pta] [--k N]
    valuectx clean     PROGRAM [--analysis sign|pta]

Exit status: 0 on success, 1 when the analysis reports diagnostics, 2 on
usage errors and unreadable or malformed input.
"""
from __future__ import annotations

import argparse
import random
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .callgraph import (
    build_cha, build_context_callgraph, clean_methods, export_dot, path_lines,
)
from .engine import (
    AnalysisError, AnalysisResult, do_analysis, do_analysis_backward,
    solution_dump, transitions_dot,
)
from .ir import IRError, validate
from .parser import parse_program
from .pta import PointsToAnalysis, pta_diagnostics
from .scalar_clients import LivenessAnalysis, SignAnalysis

COMMANDS = ("analyze", "contexts", "callgraph", "paths", "clean")
ANALYSES = {"sign": SignAnalysis, "liveness": LivenessAnalysis, "pta": PointsToAnalysis}
FORMATS = {
    "analyze": ("table", "records"),
    "contexts": ("table", "records", "dot"),
    "callgraph": ("dot", "table"),
    "paths": ("table",),
    "clean": ("table",),
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    input_path: str
    analysis: Optional[str] = None
    output_format: Optional[str] = None
    k_max: int = 6
    output_path: Optional[str] = None
    mode: str = "context"

    def resolved(self) -> "RunConfig":
        """Fill command-specific defaults and reject invalid combinations."""
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        analysis = self.analysis or ("pta" if self.command in ("callgraph", "paths", "clean")
                                     else "sign")
        if analysis not in ANALYSES:
            raise UsageError(f"unknown analysis {analysis!r}")
        if self.command in ("paths", "clean", "callgraph") and analysis == "liveness":
            raise UsageError(f"{self.command} needs a forward analysis (sign or pta)")
        fmt = self.output_format or FORMATS[self.command][0]
        if fmt not in FORMATS[self.command]:
            raise UsageError(f"format {fmt!r} is not available for {self.command}")
        if self.k_max < 0:
            raise UsageError("--k must be non-negative")
        if self.mode not in ("context", "cha"):
            raise UsageError(f"unknown mode {self.mode!r}")
        return RunConfig(self.command, self.input_path, analysis, fmt, self.k_max,
                         self.output_path, self.mode)


def _table(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n"
                   for r in rows)


def context_table(result: AnalysisResult) -> str:
    """One row per context: id, method, entry value, exit value."""
    fmt = result.client.format_value
    rows = [["Context", "Proc.", "Entry", "Exit"]]
    for i, ctx in enumerate(result.reachable_contexts()):
        rows.append([f"X{i}", ctx.method.ref, fmt(ctx.entry_value), fmt(ctx.exit_value)])
    return _table(rows)


def context_records(result: AnalysisResult) -> str:
    fmt = result.client.format_value
    return "".join(f"ctx=X{i} method={c.method.ref} entry={fmt(c.entry_value)} "
                   f"exit={fmt(c.exit_value)}\n"
                   for i, c in enumerate(result.reachable_contexts()))


def run_analysis(program, analysis: str, **kw) -> AnalysisResult:
    client = ANALYSES[analysis](program)
    if analysis == "liveness":
        return do_analysis_backward(client, program, **kw)
    return do_analysis(client, program, **kw)


def run(cfg: RunConfig) -> tuple[int, str, list[str]]:
    """Execute one command.  Returns (exit status, output text, messages
    for the error stream)."""
    try:
        cfg = cfg.resolved()
    except UsageError as e:
        return 2, "", [f"error: {e}"]
    try:
        text = Path(cfg.input_path).read_text()
    except OSError as e:
        return 2, "", [f"error: cannot read {cfg.input_path}: {e.strerror or e}"]
    try:
        program = parse_program(text)
    except IRError as e:
        return 2, "", [f"error: {cfg.input_path}: {e}"]
    messages = [f"{cfg.input_path}: {d}" for d in validate(program)]
    try:
        result = run_analysis(program, cfg.analysis)
    except AnalysisError as e:
        return 1, "", messages + [f"error: {e}"]
    status = 0
    if cfg.analysis == "pta":
        diags = pta_diagnostics(result)
        messages += [f"{cfg.input_path}: {d}" for d in diags]
        status = 1 if diags else 0

    c, f = cfg.command, cfg.output_format
    if c == "analyze":
        out = context_table(result) if f == "table" else solution_dump(result)
    elif c == "contexts":
        if f == "dot":
            out = transitions_dot(result)
        elif f == "records":
            out = context_records(result)
        else:
            out = "".join(f"{m}: {n}\n" for m, n in sorted(result.contexts_per_method().items()))
    elif c == "callgraph":
        cg = build_cha(program) if cfg.mode == "cha" else build_context_callgraph(result)
        if f == "dot":
            out = export_dot(cg)
        else:
            out = "".join(f"{e.source} -{e.site}-> {e.target}"
                          f"{' default' if e.is_default else ''}\n" for e in cg.edges)
    elif c == "paths":
        out = "\n".join(path_lines(build_context_callgraph(result), build_cha(program),
                                   cfg.k_max))
        out = out + "\n" if out else ""
    else:
        out = "".join(m + "\n" for m in sorted(clean_methods(build_context_callgraph(result))))
    return status, out, messages


def selftest(seed: int, count: int) -> tuple[int, str]:
    """Differential checks on generated programs: inline oracle, concrete
    soundness and worklist-order independence."""
    from .generate import GenConfig, pointer_program, scalar_program
    from .oracle import check_abstraction, inline_oracle, run_concrete

    rng = random.Random(seed)
    failures = []
    for i in range(count):
        p = parse_program(scalar_program(rng))
        for name in ("sign", "liveness"):
            got = run_analysis(p, name).meet_over_valid_paths()
            want = inline_oracle(p, ANALYSES[name](p))
            if (got.before, got.after) != (want.before, want.after):
                failures.append(f"oracle/{name} program {i}")
        for kind, text in (("sign", scalar_program(rng, GenConfig(recursive=True))),
                           ("pta", pointer_program(rng))):
            p = parse_program(text)
            result = run_analysis(p, kind)
            sol = result.meet_over_valid_paths()
            for _ in range(3):
                choices = [rng.random() < 0.5 for _ in range(rng.randint(0, 12))]
                if check_abstraction(run_concrete(p, choices, fuel=500), sol, kind):
                    failures.append(f"soundness/{kind} program {i}")
                    break
            if solution_dump(run_analysis(p, kind, order_seed=rng.randrange(1 << 30))) \
                    != solution_dump(result):
                failures.append(f"order/{kind} program {i}")
    lines = [f"selftest seed={seed} programs={count} failures={len(failures)}"]
    lines += [f"FAIL {f}" for f in failures]
    return (1 if failures else 0), "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="valuectx",
                                 description="Value-context interprocedural analyses.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "analyze": "per-context entry/exit values, or full solution records",
        "contexts": "contexts per method, or the context transition diagram",
        "callgraph": "context-sensitive or class-hierarchy call graph",
        "paths": "k-length call path counts against class hierarchy analysis",
        "clean": "methods unreachable from default call sites",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("input", help="program in the textual IR")
        p.add_argument("--analysis", choices=sorted(ANALYSES))
        p.add_argument("--format", dest="output_format", choices=FORMATS[name])
        p.add_argument("--output", "-o", help="write to this file instead of stdout")
        if name == "paths":
            p.add_argument("--k", type=int, default=6, help="largest path length (default 6)")
        if name == "callgraph":
            p.add_argument("--mode", choices=("context", "cha"), default="context")
    st = sub.add_parser("selftest")  # hidden from the command summary
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--count", type=int, default=20)
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "selftest"]
    return ap


def _emit(text: str, path: Optional[str]) -> int:
    if path is None:
        sys.stdout.write(text)
        return 0
    try:
        Path(path).write_text(text)
    except OSError as e:
        print(f"error: cannot write {path}: {e.strerror or e}", file=sys.stderr)
        return 2
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        status, out = selftest(args.seed, args.count)
        sys.stdout.write(out)
        return status
    cfg = RunConfig(args.command, args.input, args.analysis, args.output_format,
                    getattr(args, "k", 6), args.output, getattr(args, "mode", "context"))
    status, out, messages = run(cfg)
    for m in messages:
        print(m, file=sys.stderr)
    if out:
        status = max(status, _emit(out, cfg.output_path))
    return status


if __name__ == "__main__":
    sys.exit(main())
