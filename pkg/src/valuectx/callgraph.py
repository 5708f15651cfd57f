"""Call graphs: the context-sensitive one recorded by an analysis run and a
class-hierarchy baseline, with k-length path counting and clean methods."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .engine import AnalysisResult
from .ir import Program, StaticCall, cha_targets

CONTEXT = "context"
CHA = "cha"
UNKNOWN = "<unknown>"


@dataclass(frozen=True, order=True)
class CallEdge:
    source: str
    site: str
    target: str
    is_default: bool = False


@dataclass
class CallGraph:
    """Nodes are context ids (``X<i>``) or method refs; ``method_of`` maps a
    node to its method (default-site targets are always method nodes)."""
    mode: str
    program: Program
    entry: str
    method_of: dict[str, str] = field(default_factory=dict)
    edges: list[CallEdge] = field(default_factory=list)

    @property
    def nodes(self) -> list[str]:
        return sorted(self.method_of, key=_node_key)

    def out_edges(self, node: str, include_default: bool = False) -> list[CallEdge]:
        return [e for e in self._adj.get(node, ()) if include_default or not e.is_default]

    @property
    def _adj(self) -> dict[str, list[CallEdge]]:
        adj: dict[str, list[CallEdge]] = {}
        for e in sorted(self.edges):
            adj.setdefault(e.source, []).append(e)
        return adj

    def targets_at(self, node: str, site: str, include_default: bool = False) -> list[str]:
        return sorted({self.method_of[e.target] for e in self.out_edges(node, include_default)
                       if e.site == site})


def _node_key(n: str):
    if n.startswith("X") and n[1:].isdigit():
        return (0, int(n[1:]), "")
    return (1, 0, n)


def _default_candidates(p: Program, stmt) -> list[str]:
    if isinstance(stmt, StaticCall):
        return [stmt.method]
    return cha_targets(p, stmt.method, len(stmt.args))


def build_context_callgraph(result: AnalysisResult) -> CallGraph:
    """The final transition table over reachable contexts; each default
    site adds dashed edges to every method it might reach."""
    p = result.program
    ids = result.canonical_ids()
    cg = CallGraph(CONTEXT, p, "X0")
    for ctx in result.reachable_contexts():
        cg.method_of[f"X{ids[ctx.id]}"] = ctx.method.ref
    for s, label, _, t in result.canonical_transitions():
        cg.edges.append(CallEdge(f"X{s}", label, f"X{t}"))
    for ctx in result.reachable_contexts():
        src = f"X{ids[ctx.id]}"
        for label, res in sorted(ctx.resolutions.items()):
            if not res.is_default:
                continue
            cands = _default_candidates(p, ctx.method.node(label).stmt) or [UNKNOWN]
            for ref in cands:
                cg.method_of.setdefault(ref, ref)
                cg.edges.append(CallEdge(src, label, ref, True))
    cg.edges.sort()
    return cg


def build_cha(program: Program) -> CallGraph:
    """Method-level graph from the entry: static calls go to their target,
    virtual calls to every method the name could dispatch to.  Calls to
    extern methods are default edges."""
    cg = CallGraph(CHA, program, program.entry)
    cg.method_of[program.entry] = program.entry
    stack = [program.entry]
    while stack:
        ref = stack.pop()
        m = program.method(ref)
        # every call node, including CFG-unreachable ones the engine also visits
        for node in m.call_nodes:
            for t in _default_candidates(program, node.stmt):
                external = program.method(t).external
                cg.edges.append(CallEdge(ref, node.label, t, external))
                if t not in cg.method_of:
                    cg.method_of[t] = t
                    if not external:
                        stack.append(t)
    cg.edges.sort()
    return cg


def count_k_paths(cg: CallGraph, k: int) -> int:
    """Number of call-edge sequences of length ``k`` from the entry,
    ignoring default edges.  Counts are exact Python integers."""
    if k < 0:
        raise ValueError("k must be non-negative")
    adj = {n: [e.target for e in cg.out_edges(n)] for n in cg.method_of}
    layer: Counter = Counter({cg.entry: 1})
    for _ in range(k):
        nxt: Counter = Counter()
        for node, n in layer.items():
            for t in adj.get(node, ()):
                nxt[t] += n
        layer = nxt
    return sum(layer.values())


def enumerate_paths(cg: CallGraph, k: int) -> set[tuple[tuple[str, str, str], ...]]:
    """All length-``k`` paths from the entry, projected to methods as
    (caller, site, callee) triples.  Exponential; for cross-checking."""
    out = set()

    def walk(node: str, path: tuple) -> None:
        if len(path) == k:
            out.add(path)
            return
        for e in cg.out_edges(node):
            step = (cg.method_of[node], e.site, cg.method_of[e.target])
            walk(e.target, path + (step,))

    walk(cg.entry, ())
    return out


def delta_percent(fcpa: int, cha: int) -> str:
    """Share of class-hierarchy paths pruned, with two decimals."""
    if cha == 0:
        return "0.00"
    return f"{(cha - fcpa) * 100 / cha:.2f}"


def path_lines(context_cg: CallGraph, cha_cg: CallGraph, k_max: int) -> list[str]:
    lines = []
    for k in range(1, k_max + 1):
        a, b = count_k_paths(context_cg, k), count_k_paths(cha_cg, k)
        lines.append(f"k={k} fcpa={a} cha={b} delta={delta_percent(a, b)}")
    return lines


def clean_methods(cg: CallGraph, cha: Optional[CallGraph] = None) -> set[str]:
    """Analysed methods that contain no default site and cannot be reached
    from one (following class-hierarchy edges past the unknown call)."""
    if cg.mode != CONTEXT:
        raise ValueError("clean methods need a context-sensitive call graph")
    cha = cha or build_cha(cg.program)
    analysed = {cg.method_of[n] for n in cg.method_of if n.startswith("X")}
    has_default = {cg.method_of[e.source] for e in cg.edges if e.is_default}
    adj = _cha_closure(cha.program)
    reached = {e.target for e in cg.edges if e.is_default}
    stack = list(reached)
    while stack:
        for t in adj.get(stack.pop(), ()):
            if t not in reached:
                reached.add(t)
                stack.append(t)
    return analysed - has_default - reached


def _cha_closure(p: Program) -> dict[str, set[str]]:
    """Class-hierarchy call edges of every method, not just those reachable
    from the entry."""
    adj: dict[str, set[str]] = {}
    for m in p.all_methods():
        for n in m.call_nodes:
            adj.setdefault(m.ref, set()).update(_default_candidates(p, n.stmt))
    return adj


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(cg: CallGraph, name: str = "callgraph") -> str:
    out = [f"digraph {name} {{"]
    for n in cg.nodes:
        label = f"{n}: {cg.method_of[n]}" if cg.mode == CONTEXT and n.startswith("X") else n
        out.append(f"  {_q(n)} [label={_q(label)}];")
    for e in sorted(cg.edges):
        style = ", style=dashed" if e.is_default else ""
        out.append(f"  {_q(e.source)} -> {_q(e.target)} [label={_q(e.site)}{style}];")
    out.append("}")
    return "\n".join(out) + "\n"
