"""Independent reference implementations for checking the engine.

* :func:`inline_oracle` expands every call of a non-recursive program in
  place and solves the single resulting CFG intraprocedurally.
* :func:`run_concrete` interprets a program along a given sequence of
  branch decisions.
* :func:`check_abstraction` compares a concrete trace with a merged
  solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence

from .engine import BACKWARD, AnalysisClient, DataFlowSolution
from .ir import (
    BinOp, Branch, Cast, CfgNode, ConstAssign, Copy, DispatchError, Goto,
    IntArg, Load, Method, Neg, NegArg, New, Nop, NullAssign, Program, Return,
    StaticCall, StaticLoad, StaticStore, Statement, Store, VirtualCall,
    lookup_dispatch, subtypes,
)
from .pta import SUMMARY, static_owner
from .scalar_clients.sign import BOT, TOP, Sign

SEP = "/"


class OracleRefused(Exception):
    """The program is outside what the inline oracle can expand."""


# --- inlining --------------------------------------------------------------

@dataclass(frozen=True)
class Forget(Statement):
    """Oracle-only statement: the listed variables leave scope."""
    names: frozenset

    def __str__(self):
        return "forget " + ",".join(sorted(self.names))


@dataclass(frozen=True)
class Origin:
    method: str
    label: str
    prefix: str
    side: str = "both"  # "in" | "out" | "both"


@dataclass
class InlinedProgram:
    method: Method
    origin: dict[str, Origin]


def _check_inlinable(p: Program) -> None:
    state: dict[str, int] = {}

    def visit(ref: str) -> None:
        state[ref] = 1
        m = p.method(ref)
        for n in m.call_nodes:
            s = n.stmt
            if isinstance(s, VirtualCall):
                raise OracleRefused(f"{ref}:{n.label}: virtual call")
            callee = p.method(s.method)
            if callee.external:
                raise OracleRefused(f"{ref}:{n.label}: call to extern {callee.ref}")
            if len(callee.return_vars) != 1:
                raise OracleRefused(f"{callee.ref} must return exactly one variable")
            if state.get(callee.ref) == 1:
                raise OracleRefused(f"recursion through {callee.ref}")
            if callee.ref not in state:
                visit(callee.ref)
        state[ref] = 2

    visit(p.entry)


def _bind(formal: str, arg) -> Statement:
    if isinstance(arg, IntArg):
        return ConstAssign(formal, arg.value)
    if isinstance(arg, NegArg):
        return Neg(formal, arg.name)
    return Copy(formal, arg.name)


def _rename(stmt: Statement, r) -> Statement:
    """Copy of ``stmt`` with variables passed through ``r`` (labels are
    handled by the caller)."""
    if isinstance(stmt, ConstAssign):
        return ConstAssign(r(stmt.target), stmt.value)
    if isinstance(stmt, Copy):
        return Copy(r(stmt.target), r(stmt.source))
    if isinstance(stmt, Neg):
        return Neg(r(stmt.target), r(stmt.source))
    if isinstance(stmt, BinOp):
        return BinOp(r(stmt.target), r(stmt.left), stmt.op, r(stmt.right))
    if isinstance(stmt, Return):
        return Return(r(stmt.value))
    if isinstance(stmt, (Nop, Branch, Goto)):
        return stmt
    raise OracleRefused(f"statement not supported by the inline oracle: {stmt}")


def inline_program(p: Program) -> InlinedProgram:
    """Expand all calls from the entry method into one CFG.

    Variables and labels of a copy reached through call string
    ``c1/c2/`` are prefixed with it.  A call ``x = call g(args)`` becomes::

        forget(g's copy) ; formal_i = arg_i ... ; <g's body> ; x = ret ; forget(g's copy)
    """
    _check_inlinable(p)
    nodes: list[CfgNode] = []
    origin: dict[str, Origin] = {}

    def emit(label, stmt, succ, org) -> None:
        nodes.append(CfgNode(label, stmt, list(succ), synthetic=True))
        origin[label] = org

    def expand(m: Method, prefix: str, entry_label: str, exit_succ: Optional[str]) -> None:
        """Emit ``m``'s nodes with ``prefix``; its entry node gets
        ``entry_label`` and its exit flows to ``exit_succ``."""
        L = lambda lab: prefix + lab  # noqa: E731
        V = lambda v: prefix + v  # noqa: E731
        for n in m.nodes:
            lab = entry_label if n.label == m.entry_node else L(n.label)
            succ = [L(s) for s in n.successors]
            if n.label == m.exit_node:
                succ = [exit_succ] if exit_succ else []
            if not n.is_call:
                emit(lab, _rename(n.stmt, V), succ, Origin(m.ref, n.label, prefix))
                continue
            s = n.stmt
            callee = p.method(s.method)
            sub = prefix + n.label + SEP
            cvars = frozenset(sub + v for v in callee.variables)
            pre, post, ret = lab, lab + "#out", lab + "#ret"
            binds = [lab + f"#bind{i}" for i in range(len(s.args))]
            c_entry = sub + callee.entry_node
            emit(pre, Forget(cvars), [binds[0] if binds else c_entry],
                 Origin(m.ref, n.label, prefix, "in"))
            for i, (formal, arg) in enumerate(zip(callee.params, s.args)):
                nxt = binds[i + 1] if i + 1 < len(binds) else c_entry
                a = arg if isinstance(arg, IntArg) else type(arg)(V(arg.name))
                emit(binds[i], _bind(sub + formal, a), [nxt], Origin("", "", "#"))
            expand(callee, sub, c_entry, ret)
            emit(ret, Copy(V(s.target), sub + callee.return_vars[0]), [post],
                 Origin("", "", "#"))
            emit(post, Forget(cvars), succ, Origin(m.ref, n.label, prefix, "out"))

    main = p.entry_method
    expand(main, "", main.entry_node, None)
    # fix the entry/exit of the synthetic method
    nodes.sort(key=lambda n: n.label != main.entry_node)
    m = Method("__inlined__", [], nodes, locals=[], entry_node=main.entry_node,
               exit_node=main.exit_node)
    return InlinedProgram(m, origin)


def _forget(value, names: frozenset):
    if isinstance(value, dict):
        return {v: s for v, s in value.items() if v not in names}
    return frozenset(value - names)


def _project(value, prefix: str):
    """Variables of one copy, renamed back to the original method."""
    def own(v: str):
        if v.startswith(prefix) and SEP not in v[len(prefix):]:
            return v[len(prefix):]
        return None
    if isinstance(value, dict):
        return {own(v): s for v, s in value.items() if own(v) is not None}
    return frozenset(own(v) for v in value if own(v) is not None)


def solve_intraprocedural(client: AnalysisClient, m: Method, boundary) -> tuple[dict, dict]:
    """Round-robin fixpoint over a single CFG with the client's normal flow
    function (plus :class:`Forget`).  Returns (before, after) per label in
    program order."""
    backward = client.direction == BACKWARD
    top = client.top_value()
    start = m.exit_node if backward else m.entry_node
    preds = {n.label: (n.successors if backward else m.predecessors[n.label]) for n in m.nodes}
    order = [n.label for n in m.nodes]
    if backward:
        order.reverse()
    inv = {lab: top for lab in order}
    outv = {lab: top for lab in order}
    changed = True
    while changed:
        changed = False
        for lab in order:
            node = m.node(lab)
            a = boundary if lab == start else client.meet_all(outv[q] for q in preds[lab])
            if isinstance(node.stmt, Forget):
                b = _forget(a, node.stmt.names)
            else:
                b = client.normal_flow_function(None, node, a)
            if a != inv[lab] or b != outv[lab]:
                inv[lab], outv[lab] = a, b
                changed = True
    if backward:
        return outv, inv
    return inv, outv


def inline_oracle(program: Program, client: AnalysisClient) -> DataFlowSolution:
    """Merged per-node solution computed by full inlining; raises
    :class:`OracleRefused` for recursive or dynamically dispatched code."""
    inl = inline_program(program)
    boundary = client.boundary_value(program.entry_method)
    before, after = solve_intraprocedural(client, inl.method, boundary)
    mb: dict[tuple[str, str], Any] = {}
    ma: dict[tuple[str, str], Any] = {}
    for lab, org in inl.origin.items():
        if org.prefix == "#":
            continue
        key = (org.method, org.label)
        if org.side in ("in", "both"):
            v = _project(before[lab], org.prefix)
            mb[key] = client.meet(mb[key], v) if key in mb else v
        if org.side in ("out", "both"):
            v = _project(after[lab], org.prefix)
            ma[key] = client.meet(ma[key], v) if key in ma else v
    return DataFlowSolution(mb, ma)


# --- concrete interpreter --------------------------------------------------

@dataclass(frozen=True)
class Obj:
    oid: int
    site: str
    cls: Optional[str]  # None for objects returned by extern methods


class _Null:
    def __repr__(self):
        return "null"


NULL_REF = _Null()


@dataclass
class Frame:
    method: Method
    vars: dict[str, Any]
    label: str
    call_node: Optional[CfgNode] = None
    ret: Any = None


@dataclass(frozen=True)
class TraceStep:
    method: str
    label: str
    vars: dict
    heap: dict  # oid -> (site, {field: value}) for objects reachable from vars
    depth: int


@dataclass
class Trace:
    steps: list[TraceStep] = field(default_factory=list)
    status: str = "exit"  # exit | fuel | fault
    fault: Optional[str] = None
    result: dict = field(default_factory=dict)  # final variables of the entry method


class _Fault(Exception):
    pass


def _reachable_heap(roots: Iterable[Any], heap: dict[int, dict]) -> dict:
    out = {}
    stack = [v for v in roots if isinstance(v, Obj)]
    while stack:
        o = stack.pop()
        if o.oid in out:
            continue
        fields = dict(heap.get(o.oid, {}))
        out[o.oid] = (o.site, fields)
        stack.extend(v for v in fields.values() if isinstance(v, Obj))
    return out


class _OutOfFuel(Exception):
    pass


def run_concrete(program: Program, choices: Sequence[bool] = (), fuel: int = 10_000,
                 max_bits: int = 4096) -> Trace:
    """Execute from the entry.  ``choices[i]`` decides the i-th executed
    branch (True jumps to the target); once exhausted, branches fall through.
    Each executed node counts one unit of fuel and is recorded with the
    state just before it.  Integers are unbounded, but a result wider than
    ``max_bits`` ends the run like fuel exhaustion does."""
    trace = Trace()
    heap: dict[int, dict] = {}
    statics: dict[tuple[str, str], Any] = {}
    next_oid = [0]
    choice_iter = iter(choices)
    main = program.entry_method
    stack = [Frame(main, {}, main.entry_node)]

    def new_obj(site: str, cls: Optional[str]) -> Obj:
        next_oid[0] += 1
        o = Obj(next_oid[0], site, cls)
        heap[o.oid] = {}
        return o

    def deref(v, what: str) -> Obj:
        if v is None or v is NULL_REF:
            raise _Fault(f"{what} on null")
        if not isinstance(v, Obj) or v.cls is None:
            raise _Fault(f"{what} on a non-object")
        return v

    def arith(v) -> Optional[int]:
        if v is None or isinstance(v, int):
            return v
        raise _Fault("arithmetic on a reference")

    def arg_value(fr: Frame, a):
        if isinstance(a, IntArg):
            return a.value
        if isinstance(a, NegArg):
            v = arith(fr.vars.get(a.name))
            return None if v is None else -v
        return fr.vars.get(a.name)

    def static_key(cls, fld):
        return (static_owner(program, cls, fld), fld)

    steps = 0
    try:
        while stack:
            if steps >= fuel:
                trace.status = "fuel"
                return trace
            steps += 1
            fr = stack[-1]
            m = fr.method
            node = m.node(fr.label)
            trace.steps.append(TraceStep(m.ref, node.label, dict(fr.vars),
                                         _reachable_heap(fr.vars.values(), heap), len(stack)))
            s = node.stmt
            nxt = node.successors[0] if node.successors else None
            V = fr.vars
            if node.label == m.exit_node:
                stack.pop()
                if not stack:
                    trace.result = dict(V)
                    break
                caller = stack[-1]
                caller.vars[fr.call_node.stmt.target] = fr.ret
                caller.label = caller.method.node(fr.call_node.label).successors[0]
                continue
            if isinstance(s, ConstAssign):
                V[s.target] = s.value
            elif isinstance(s, Copy):
                V[s.target] = V.get(s.source)
            elif isinstance(s, Neg):
                v = arith(V.get(s.source))
                V[s.target] = None if v is None else -v
            elif isinstance(s, BinOp):
                a, b = arith(V.get(s.left)), arith(V.get(s.right))
                if a is None or b is None:
                    V[s.target] = None
                else:
                    v = a + b if s.op == "+" else a - b if s.op == "-" else a * b
                    if v.bit_length() > max_bits:
                        raise _OutOfFuel()
                    V[s.target] = v
            elif isinstance(s, New):
                V[s.target] = new_obj(node.label, s.class_name)
            elif isinstance(s, NullAssign):
                V[s.target] = NULL_REF
            elif isinstance(s, Load):
                o = deref(V.get(s.base), f"load .{s.field}")
                V[s.target] = heap[o.oid].get(s.field, NULL_REF)
            elif isinstance(s, Store):
                o = deref(V.get(s.base), f"store .{s.field}")
                heap[o.oid][s.field] = V.get(s.source)
            elif isinstance(s, Cast):
                v = V.get(s.source)
                if isinstance(v, Obj) and (v.cls is None
                                           or v.cls not in subtypes(program, s.class_name)):
                    raise _Fault(f"bad cast to {s.class_name}")
                V[s.target] = v
            elif isinstance(s, StaticLoad):
                V[s.target] = statics.get(static_key(s.class_name, s.field), NULL_REF)
            elif isinstance(s, StaticStore):
                statics[static_key(s.class_name, s.field)] = V.get(s.source)
            elif isinstance(s, Return):
                fr.ret = V.get(s.value)
            elif isinstance(s, Branch):
                if next(choice_iter, False):
                    nxt = node.successors[1]
            elif isinstance(s, (StaticCall, VirtualCall)):
                args = [arg_value(fr, a) for a in s.args]
                if isinstance(s, StaticCall):
                    callee = program.method(s.method)
                    formals: dict[str, Any] = {}
                    if callee.external:
                        V[s.target] = new_obj(node.label, None)
                        fr.label = nxt
                        continue
                else:
                    recv = deref(V.get(s.receiver), f"call .{s.method}()")
                    try:
                        callee = program.method(
                            lookup_dispatch(program, recv.cls, s.method, len(s.args)))
                    except DispatchError as e:
                        raise _Fault(str(e)) from None
                    formals = {"this": recv}
                formals.update(zip(callee.params, args))
                stack.append(Frame(callee, formals, callee.entry_node, call_node=node))
                continue
            fr.label = nxt
    except _OutOfFuel:
        trace.status = "fuel"
    except _Fault as e:
        trace.status = "fault"
        trace.fault = f"{stack[-1].method.ref}:{stack[-1].label}: {e}"
    return trace


def format_value(v) -> str:
    if v is None:
        return "?"
    if isinstance(v, Obj):
        return f"<{v.site}#{v.oid}>"
    return repr(v)


def dump_trace(trace: Trace) -> str:
    """One line per step; meant for debugging."""
    lines = []
    for st in trace.steps:
        vs = " ".join(f"{k}={format_value(st.vars[k])}" for k in sorted(st.vars))
        lines.append(f"node={st.method}:{st.label} {vs}".rstrip())
    lines.append(f"status={trace.status}" + (f" fault={trace.fault}" if trace.fault else ""))
    return "\n".join(lines) + "\n"


# --- abstraction checks ----------------------------------------------------

@dataclass(frozen=True)
class Violation:
    method: str
    label: str
    var: str
    detail: str

    def __str__(self):
        return f"{self.method}:{self.label}: {self.var}: {self.detail}"


def check_abstraction(trace: Trace, solution: DataFlowSolution, kind: str) -> list[Violation]:
    """Concrete facts at each step not covered by the merged value before
    that node.  ``kind`` is ``"sign"`` or ``"pta"``.  Reported once per
    (method, node, variable)."""
    if kind not in ("sign", "pta"):
        raise ValueError(f"unknown abstraction {kind!r}")
    found: dict[tuple[str, str, str], Violation] = {}
    for st in trace.steps:
        key = (st.method, st.label)
        if key not in solution.before:
            for var in st.vars:
                found.setdefault(key + (var,), Violation(st.method, st.label, var,
                                                         "node not analysed"))
            continue
        value = solution.before[key]
        check = _check_sign if kind == "sign" else _check_pta
        for var, detail in check(st, value):
            found.setdefault(key + (var,), Violation(st.method, st.label, var, detail))
    return [found[k] for k in sorted(found)]


def _check_sign(st: TraceStep, env):
    for var, v in sorted(st.vars.items()):
        if not isinstance(v, int) or isinstance(v, bool):
            continue
        a = env.get(var, TOP)
        if a is not BOT and a is not Sign.of(v):
            yield var, f"value {v} but sign {a}"


def _check_pta(st: TraceStep, g):
    for var, v in sorted(st.vars.items()):
        if not isinstance(v, Obj):
            continue
        pts = g.pts(var)
        if SUMMARY in pts:
            continue
        if v.site not in pts:
            yield var, f"object from {v.site} not in {{{','.join(sorted(pts))}}}"
            continue
        problem = _check_heap(v, st.heap, g, set())
        if problem:
            yield var, problem


def _check_heap(o: Obj, heap: dict, g, seen: set) -> Optional[str]:
    if o.oid in seen:
        return None
    seen.add(o.oid)
    _, fields = heap.get(o.oid, (o.site, {}))
    for f, v in sorted(fields.items()):
        if not isinstance(v, Obj):
            continue
        targets = g.field(o.site, f)
        if SUMMARY in targets:
            continue
        if v.site not in targets:
            return f"{o.site}.{f} holds an object from {v.site}"
        problem = _check_heap(v, heap, g, seen)
        if problem:
            return problem
    return None


__all__ = [
    "OracleRefused", "Forget", "InlinedProgram", "inline_program", "inline_oracle",
    "solve_intraprocedural", "Obj", "NULL_REF", "Trace", "TraceStep", "run_concrete",
    "dump_trace", "Violation", "check_abstraction",
]
