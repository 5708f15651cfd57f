"""Flow- and context-sensitive points-to analysis.

Abstract objects are allocation sites (the label of the ``new`` node), plus
two pseudo-sites: ``SUMMARY`` (any object we cannot predict, printed ``BOT``)
and ``NULL``.  A :class:`PointsToGraph` holds variable edges and field edges;
meet is union, so the empty graph is the top value.

Static fields live in a :class:`GlobalGraph` shared by the whole run.  It
only grows and is consulted at static loads and at call nodes; nodes that
consulted it are revisited whenever it grows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .engine import AnalysisClient, CallResolution, Context
from .ir import (
    THIS, Cast, CfgNode, Copy, Diagnostic, DispatchError, Load, Method, New,
    NullAssign, Program, StaticCall, StaticLoad, StaticStore, Store,
    VarArg, VirtualCall, lookup_dispatch, subtypes,
)

SUMMARY = "BOT"
NULL = "null"
PSEUDO_SITES = frozenset({SUMMARY, NULL})

HeapKey = tuple[str, str]


def shadow(formal: str) -> str:
    """Root that keeps an argument's objects alive after the formal is
    overwritten, so the caller sees the callee's effects on them."""
    return "@" + formal


def _real(sites: Iterable[str]) -> list[str]:
    return [s for s in sites if s not in PSEUDO_SITES]


class PointsToGraph:
    """Immutable may-points-to graph with structural equality."""

    __slots__ = ("vars", "heap", "_key")

    def __init__(self, vars: Optional[Mapping[str, Iterable[str]]] = None,
                 heap: Optional[Mapping[HeapKey, Iterable[str]]] = None):
        self.vars: dict[str, frozenset] = {v: frozenset(s) for v, s in (vars or {}).items() if s}
        self.heap: dict[HeapKey, frozenset] = {k: frozenset(s) for k, s in (heap or {}).items() if s}
        self._key = None

    def key(self):
        if self._key is None:
            self._key = (tuple(sorted((v, tuple(sorted(s))) for v, s in self.vars.items())),
                         tuple(sorted((k, tuple(sorted(s))) for k, s in self.heap.items())))
        return self._key

    def __eq__(self, other):
        return isinstance(other, PointsToGraph) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"PointsToGraph({format_graph(self)!r})"

    def pts(self, var: str) -> frozenset:
        return self.vars.get(var, frozenset())

    def field(self, site: str, fld: str) -> frozenset:
        return self.heap.get((site, fld), frozenset())

    def sites(self) -> set[str]:
        out = set()
        for s in self.vars.values():
            out |= s
        for (src, _), s in self.heap.items():
            out.add(src)
            out |= s
        return out

    def reachable_from(self, roots: Iterable[str]) -> set[str]:
        """Sites reachable from ``roots`` through field edges."""
        by_src: dict[str, list[frozenset]] = {}
        for (src, _), s in self.heap.items():
            by_src.setdefault(src, []).append(s)
        seen = set(roots)
        stack = list(seen)
        while stack:
            for targets in by_src.get(stack.pop(), ()):
                for t in targets:
                    if t not in seen:
                        seen.add(t)
                        stack.append(t)
        return seen

    def restrict_heap(self, keep: set[str]) -> dict[HeapKey, frozenset]:
        return {k: s for k, s in self.heap.items() if k[0] in keep}


TOP_GRAPH = PointsToGraph()


def graph_meet(a: PointsToGraph, b: PointsToGraph) -> PointsToGraph:
    if not a.vars and not a.heap:
        return b
    if not b.vars and not b.heap:
        return a
    vars = dict(a.vars)
    for v, s in b.vars.items():
        vars[v] = vars.get(v, frozenset()) | s
    heap = dict(a.heap)
    for k, s in b.heap.items():
        heap[k] = heap.get(k, frozenset()) | s
    return PointsToGraph(vars, heap)


def graph_leq(a: PointsToGraph, b: PointsToGraph) -> bool:
    """a ⊑ b: a has every edge of b."""
    return (all(s <= a.pts(v) for v, s in b.vars.items())
            and all(s <= a.heap.get(k, frozenset()) for k, s in b.heap.items()))


def gc(g: PointsToGraph) -> PointsToGraph:
    """Drop field edges of sites no variable can reach."""
    live = g.reachable_from(s for pts in g.vars.values() for s in pts)
    if all(src in live for src, _ in g.heap):
        return g
    return PointsToGraph(g.vars, g.restrict_heap(live))


def format_graph(g: PointsToGraph) -> str:
    """Canonical text: ``v -> {..}`` lines by variable, then ``s.f -> {..}``
    lines by (site, field).  The top graph prints as ``T``."""
    lines = [f"{v} -> {{{','.join(sorted(g.vars[v]))}}}" for v in sorted(g.vars)]
    lines += [f"{s}.{f} -> {{{','.join(sorted(g.heap[(s, f)]))}}}" for s, f in sorted(g.heap)]
    return "; ".join(lines) if lines else "T"


@dataclass
class GlobalGraph:
    """Flow-insensitive facts shared across methods and contexts.

    ``statics`` maps (declaring class, field) to sites; ``heap`` collects
    every field edge written anywhere (so objects reached through statics
    are described soundly wherever they were updated).  Both only grow.
    """
    statics: dict[HeapKey, set] = field(default_factory=dict)
    heap: dict[HeapKey, set] = field(default_factory=dict)
    dependents: set = field(default_factory=set)
    version: int = 0

    def add_static(self, key: HeapKey, sites: Iterable[str]) -> None:
        self._add(self.statics, key, sites)

    def add_heap(self, key: HeapKey, sites: Iterable[str]) -> None:
        self._add(self.heap, key, sites)

    def _add(self, table, key, sites) -> None:
        new = {s for s in sites if s != NULL}
        cur = table.setdefault(key, set())
        if not new <= cur:
            cur |= new
            self.version += 1

    def reachable_from(self, roots: Iterable[str]) -> set[str]:
        by_src: dict[str, list[set]] = {}
        for (src, _), s in self.heap.items():
            by_src.setdefault(src, []).append(s)
        seen = set(roots)
        stack = list(seen)
        while stack:
            for targets in by_src.get(stack.pop(), ()):
                for t in targets:
                    if t not in seen:
                        seen.add(t)
                        stack.append(t)
        return seen

    def escaped(self) -> set[str]:
        """Sites reachable from some static field."""
        return self.reachable_from(s for sites in self.statics.values() for s in sites)

    def edges_from(self, sites: set[str]) -> dict[HeapKey, frozenset]:
        return {k: frozenset(s) for k, s in self.heap.items() if k[0] in sites and s}


def _with_heap(heap, extra: Mapping[HeapKey, Iterable[str]]) -> dict:
    out = dict(heap)
    for k, s in extra.items():
        out[k] = out.get(k, frozenset()) | frozenset(s)
    return out


def import_global(g: PointsToGraph, glob: GlobalGraph,
                  roots: Optional[Iterable[str]] = None) -> PointsToGraph:
    """Add global field edges for escaped sites present in ``g`` (or in
    ``roots``), closed under reachability in the global heap."""
    escaped = glob.escaped()
    if not escaped:
        return g
    present = set(roots) if roots is not None else g.sites()
    start = present & escaped
    if not start:
        return g
    closure = glob.reachable_from(start)
    return PointsToGraph(g.vars, _with_heap(g.heap, glob.edges_from(closure)))


def static_owner(p: Program, cls: str, fld: str) -> str:
    """Class that declares static field ``fld`` as seen from ``cls``."""
    for c in p.superclass_chain(cls):
        if fld in p.class_map[c].static_fields:
            return c
    return cls


def pta_transfer(p: Program, stmt, g: PointsToGraph, glob: GlobalGraph,
                 label: Optional[str] = None) -> PointsToGraph:
    """Effect of a non-call statement at node ``label`` (the allocation
    site of a ``new``), followed by garbage collection."""
    vars, heap = dict(g.vars), g.heap

    def assign(x: str, sites: Iterable[str]) -> None:
        sites = frozenset(sites)
        if sites:
            vars[x] = sites
        else:
            vars.pop(x, None)

    if isinstance(stmt, New):
        if label is None:
            raise ValueError("allocation needs the node label")
        assign(stmt.target, {label})
    elif isinstance(stmt, Copy):
        assign(stmt.target, g.pts(stmt.source))
    elif isinstance(stmt, NullAssign):
        assign(stmt.target, {NULL})
    elif isinstance(stmt, Cast):
        src = g.pts(stmt.source)
        ok = subtypes(p, stmt.class_name)
        assign(stmt.target, {s for s in src
                             if s in PSEUDO_SITES or p.allocation_sites.get(s) in ok})
    elif isinstance(stmt, Load):
        base = g.pts(stmt.base)
        out = set()
        if SUMMARY in base:
            out.add(SUMMARY)
        for o in _real(base):
            out |= g.field(o, stmt.field)
        assign(stmt.target, out)
    elif isinstance(stmt, Store):
        val = g.pts(stmt.source) - {NULL}
        heap = dict(heap)
        if val:
            for o in _real(g.pts(stmt.base)):
                key = (o, stmt.field)
                heap[key] = heap.get(key, frozenset()) | val
                glob.add_heap(key, val)
    elif isinstance(stmt, StaticLoad):
        key = (static_owner(p, stmt.class_name, stmt.field), stmt.field)
        sites = frozenset(glob.statics.get(key, ()))
        assign(stmt.target, sites)
        closure = glob.reachable_from(_real(sites))
        heap = _with_heap(heap, glob.edges_from(closure))
    elif isinstance(stmt, StaticStore):
        key = (static_owner(p, stmt.class_name, stmt.field), stmt.field)
        sites = g.pts(stmt.source)
        glob.add_static(key, sites)
        # the stored objects are now visible to everyone, with what we know of them
        for k, s in g.restrict_heap(g.reachable_from(_real(sites))).items():
            glob.add_heap(k, s)
    elif stmt.defs():
        # scalar assignment: the target holds no reference
        for x in stmt.defs():
            vars.pop(x, None)
    return gc(PointsToGraph(vars, heap))


def _arg_sites(g: PointsToGraph, node: CfgNode) -> list[tuple[int, frozenset]]:
    out = []
    for i, a in enumerate(node.stmt.args):
        if isinstance(a, VarArg):
            out.append((i, g.pts(a.name)))
        else:
            out.append((i, frozenset()))
    return out


def receiver_sites_for(p: Program, g: PointsToGraph, node: CfgNode, target: Method) -> frozenset:
    """Receiver sites of a virtual call that dispatch to ``target``."""
    s = node.stmt
    out = set()
    for o in _real(g.pts(s.receiver)):
        cls = p.allocation_sites.get(o)
        if cls is None:
            continue
        try:
            if lookup_dispatch(p, cls, s.method, len(s.args)) == target.ref:
                out.add(o)
        except DispatchError:
            pass
    return frozenset(out)


def pta_call_entry(p: Program, target: Method, node: CfgNode, g: PointsToGraph) -> PointsToGraph:
    """Callee-side graph: formals bound to the actuals' sites, plus the
    heap reachable from them."""
    stmt = node.stmt
    if len(stmt.args) != len(target.params):
        raise ValueError(f"{node.label}: {target.ref} takes {len(target.params)} "
                         f"arguments, {len(stmt.args)} given")
    vars: dict[str, frozenset] = {}
    for (i, sites), formal in zip(_arg_sites(g, node), target.params):
        if sites:
            vars[formal] = sites
    if isinstance(stmt, VirtualCall):
        recv = receiver_sites_for(p, g, node, target)
        if recv:
            vars[THIS] = recv
    for formal in list(vars):
        vars[shadow(formal)] = vars[formal]
    live = g.reachable_from(_real(s for sites in vars.values() for s in sites))
    return PointsToGraph(vars, g.restrict_heap(live))


def pta_call_exit(target: Method, node: CfgNode, exit_graph: PointsToGraph) -> PointsToGraph:
    """Caller-side contribution of the callee: the returned sites bound to
    the call's target, and the callee's final view of the heap reachable
    from its arguments and its result."""
    ret = frozenset()
    for r in target.return_vars:
        ret |= exit_graph.pts(r)
    roots = set(_real(ret))
    for v, sites in exit_graph.vars.items():
        if v.startswith("@"):
            roots |= set(_real(sites))
    live = exit_graph.reachable_from(roots)
    vars = {node.stmt.target: ret} if ret else {}
    return PointsToGraph(vars, exit_graph.restrict_heap(live))


def passed_sites(p: Program, g: PointsToGraph, node: CfgNode, targets: Iterable[Method]) -> set:
    out = set()
    for _, sites in _arg_sites(g, node):
        out |= set(_real(sites))
    if isinstance(node.stmt, VirtualCall):
        for t in targets:
            out |= receiver_sites_for(p, g, node, t)
    return out


def pta_call_local(p: Program, node: CfgNode, g: PointsToGraph,
                   targets: Iterable[Method]) -> PointsToGraph:
    """What the call leaves untouched: the target variable is killed and
    field edges of objects handed to a callee are dropped (the callee's
    view returns through the call-exit function)."""
    targets = list(targets)
    vars = dict(g.vars)
    vars.pop(node.stmt.target, None)
    if not targets:
        return PointsToGraph(vars, g.heap)
    handed = g.reachable_from(passed_sites(p, g, node, targets))
    heap = {k: s for k, s in g.heap.items() if k[0] not in handed}
    return PointsToGraph(vars, heap)


def pta_default_site(p: Program, node: CfgNode, g: PointsToGraph,
                     glob: Optional[GlobalGraph] = None) -> PointsToGraph:
    """Unknown callee: the result is SUMMARY and every field of every
    object reachable from an argument (or the receiver) may now also hold
    SUMMARY."""
    stmt = node.stmt
    roots = set()
    for _, sites in _arg_sites(g, node):
        roots |= set(_real(sites))
    if isinstance(stmt, VirtualCall):
        roots |= set(_real(g.pts(stmt.receiver)))
    heap = dict(g.heap)
    for o in g.reachable_from(roots):
        cls = p.allocation_sites.get(o)
        if cls is None:
            continue
        for f in p.fields_of(cls):
            heap[(o, f)] = heap.get((o, f), frozenset()) | {SUMMARY}
            if glob is not None:
                glob.add_heap((o, f), {SUMMARY})
    vars = dict(g.vars)
    vars[stmt.target] = frozenset({SUMMARY})
    return PointsToGraph(vars, heap)


def pta_resolve_targets(p: Program, node: CfgNode, g: PointsToGraph) -> CallResolution:
    stmt = node.stmt
    if isinstance(stmt, StaticCall):
        if p.method(stmt.method).external:
            return CallResolution((), True)
        return CallResolution((stmt.method,))
    recv = g.pts(stmt.receiver)
    targets = set()
    for o in _real(recv):
        cls = p.allocation_sites.get(o)
        if cls is None:
            continue
        try:
            targets.add(lookup_dispatch(p, cls, stmt.method, len(stmt.args)))
        except DispatchError:
            pass  # the concrete call would fail
    return CallResolution(tuple(sorted(targets)), SUMMARY in recv)


class PointsToAnalysis(AnalysisClient[PointsToGraph]):
    def __init__(self, program: Program):
        self.program = program
        self.glob = GlobalGraph()
        self._seen_version = 0

    def top_value(self):
        return TOP_GRAPH

    def boundary_value(self, entry):
        return TOP_GRAPH

    def meet(self, a, b):
        return graph_meet(a, b)

    def leq(self, a, b):
        return graph_leq(a, b)

    def _depend(self, ctx: Context, node: CfgNode) -> None:
        self.glob.dependents.add((ctx.id, node.label))

    def normal_flow_function(self, ctx, node, value):
        if isinstance(node.stmt, StaticLoad):
            self._depend(ctx, node)
        return pta_transfer(self.program, node.stmt, value, self.glob, node.label)

    def call_entry_flow_function(self, ctx, target, node, value):
        return pta_call_entry(self.program, target, node, value)

    def call_exit_flow_function(self, ctx, target, node, value):
        self._depend(ctx, node)
        return import_global(pta_call_exit(target, node, value), self.glob)

    def call_local_flow_function(self, ctx, node, value):
        res = ctx.resolutions[node.label]
        if res.is_default:
            out = pta_default_site(self.program, node, value, self.glob)
        else:
            targets = [self.program.method(t) for t in res.targets]
            out = pta_call_local(self.program, node, value, targets)
        self._depend(ctx, node)
        return gc(import_global(out, self.glob))

    def resolve_targets(self, ctx, node, value):
        return pta_resolve_targets(self.program, node, value)

    def take_requeue(self):
        if self.glob.version == self._seen_version:
            return ()
        self._seen_version = self.glob.version
        return sorted(self.glob.dependents)

    def format_value(self, a):
        return format_graph(a)


def pta_diagnostics(result) -> list[Diagnostic]:
    """Virtual calls whose receiver has no points-to facts in some reachable
    context (the receiver was never given an object on any path)."""
    out = []
    seen = set()
    for ctx in result.reachable_contexts():
        m = ctx.method
        reachable = _cfg_reachable(m)
        for node in m.call_nodes:
            s = node.stmt
            if not isinstance(s, VirtualCall) or node.label not in reachable:
                continue
            if not ctx.value_before(node.label).pts(s.receiver):
                key = (m.ref, node.label)
                if key not in seen:
                    seen.add(key)
                    out.append(Diagnostic(
                        "warning", f"receiver {s.receiver!r} is unbound at this call",
                        m.ref, node.label, node.line))
    return out


def _cfg_reachable(m: Method) -> set[str]:
    seen = {m.entry_node}
    stack = [m.entry_node]
    while stack:
        for s in m.node(stack.pop()).successors:
            if s not in seen:
                seen.add(s)
                stack.append(s)
    return seen


__all__ = [
    "SUMMARY", "NULL", "PointsToGraph", "GlobalGraph", "PointsToAnalysis",
    "graph_meet", "graph_leq", "gc", "format_graph", "pta_transfer",
    "pta_call_entry", "pta_call_exit", "pta_call_local", "pta_default_site",
    "pta_resolve_targets", "pta_diagnostics", "shadow",
]
