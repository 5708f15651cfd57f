"""Program representation: classes, methods, control flow graphs and statements.

Programs are built by :func:`valuectx.parser.parse_program` (or by hand, for
tests) and are treated as immutable afterwards.  Every method owns a CFG with
a synthetic ``entry`` and ``exit`` node; ``return`` statements always flow to
``exit``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional, Union

ENTRY = "entry"
EXIT = "exit"
RESERVED_LABELS = frozenset({ENTRY, EXIT, "null", "BOT"})
THIS = "this"


class IRError(Exception):
    """Semantic error in a program, with an optional source location."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.message = message
        self.line = line
        self.column = column
        where = "" if line is None else f"{line}: " if column is None else f"{line}:{column}: "
        super().__init__(f"{where}{message}")


class DispatchError(IRError):
    pass


# --- call arguments -------------------------------------------------------

@dataclass(frozen=True)
class VarArg:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class NegArg:
    name: str

    def __str__(self) -> str:
        return f"-{self.name}"


@dataclass(frozen=True)
class IntArg:
    value: int

    def __str__(self) -> str:
        return str(self.value)


Arg = Union[VarArg, NegArg, IntArg]


def arg_var(arg: Arg) -> Optional[str]:
    """Variable read by an argument, if any."""
    if isinstance(arg, (VarArg, NegArg)):
        return arg.name
    return None


# --- statements -----------------------------------------------------------

class Statement:
    """Base class; subclasses are frozen dataclasses."""

    def defs(self) -> tuple[str, ...]:
        return ()

    def uses(self) -> tuple[str, ...]:
        return ()

    @property
    def is_call(self) -> bool:
        return False


@dataclass(frozen=True)
class ConstAssign(Statement):
    target: str
    value: int

    def defs(self):
        return (self.target,)

    def __str__(self):
        return f"{self.target} = {self.value}"


@dataclass(frozen=True)
class Copy(Statement):
    target: str
    source: str

    def defs(self):
        return (self.target,)

    def uses(self):
        return (self.source,)

    def __str__(self):
        return f"{self.target} = {self.source}"


@dataclass(frozen=True)
class Neg(Statement):
    target: str
    source: str

    def defs(self):
        return (self.target,)

    def uses(self):
        return (self.source,)

    def __str__(self):
        return f"{self.target} = -{self.source}"


@dataclass(frozen=True)
class BinOp(Statement):
    target: str
    left: str
    op: str
    right: str

    def defs(self):
        return (self.target,)

    def uses(self):
        return (self.left, self.right)

    def __str__(self):
        return f"{self.target} = {self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class New(Statement):
    target: str
    class_name: str

    def defs(self):
        return (self.target,)

    def __str__(self):
        return f"{self.target} = new {self.class_name}"


@dataclass(frozen=True)
class Load(Statement):
    target: str
    base: str
    field: str

    def defs(self):
        return (self.target,)

    def uses(self):
        return (self.base,)

    def __str__(self):
        return f"{self.target} = {self.base}.{self.field}"


@dataclass(frozen=True)
class Store(Statement):
    base: str
    field: str
    source: str

    def uses(self):
        return (self.base, self.source)

    def __str__(self):
        return f"{self.base}.{self.field} = {self.source}"


@dataclass(frozen=True)
class Cast(Statement):
    target: str
    class_name: str
    source: str

    def defs(self):
        return (self.target,)

    def uses(self):
        return (self.source,)

    def __str__(self):
        return f"{self.target} = ({self.class_name}) {self.source}"


@dataclass(frozen=True)
class NullAssign(Statement):
    target: str

    def defs(self):
        return (self.target,)

    def __str__(self):
        return f"{self.target} = null"


@dataclass(frozen=True)
class StaticLoad(Statement):
    target: str
    class_name: str
    field: str

    def defs(self):
        return (self.target,)

    def __str__(self):
        return f"{self.target} = static {self.class_name}.{self.field}"


@dataclass(frozen=True)
class StaticStore(Statement):
    class_name: str
    field: str
    source: str

    def uses(self):
        return (self.source,)

    def __str__(self):
        return f"static {self.class_name}.{self.field} = {self.source}"


@dataclass(frozen=True)
class StaticCall(Statement):
    target: str
    method: str
    args: tuple[Arg, ...]

    @property
    def is_call(self):
        return True

    def defs(self):
        return (self.target,)

    def uses(self):
        return tuple(v for v in map(arg_var, self.args) if v is not None)

    def __str__(self):
        return f"{self.target} = call {self.method}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class VirtualCall(Statement):
    target: str
    receiver: str
    method: str
    args: tuple[Arg, ...]

    @property
    def is_call(self):
        return True

    def defs(self):
        return (self.target,)

    def uses(self):
        return (self.receiver,) + tuple(v for v in map(arg_var, self.args) if v is not None)

    def __str__(self):
        return (f"{self.target} = vcall {self.receiver}.{self.method}"
                f"({', '.join(map(str, self.args))})")


@dataclass(frozen=True)
class Return(Statement):
    value: str

    def uses(self):
        return (self.value,)

    def __str__(self):
        return f"return {self.value}"


@dataclass(frozen=True)
class Branch(Statement):
    label: str

    def __str__(self):
        return f"if goto {self.label}"


@dataclass(frozen=True)
class Goto(Statement):
    label: str

    def __str__(self):
        return f"goto {self.label}"


@dataclass(frozen=True)
class Nop(Statement):
    def __str__(self):
        return "nop"


# --- graph structure ------------------------------------------------------

@dataclass(eq=False)
class CfgNode:
    label: str
    stmt: Statement
    successors: list[str] = field(default_factory=list)
    line: Optional[int] = None
    synthetic: bool = False

    @property
    def is_call(self) -> bool:
        return self.stmt.is_call

    def __repr__(self) -> str:
        return f"CfgNode({self.label}: {self.stmt} -> {self.successors})"


@dataclass(eq=False)
class Method:
    name: str
    params: list[str]
    nodes: list[CfgNode]
    owner: Optional[str] = None
    locals: Optional[list[str]] = None
    external: bool = False
    line: Optional[int] = None
    entry_node: str = ENTRY
    exit_node: str = EXIT

    def __post_init__(self):
        if self.locals is None:
            self.locals = self._infer_locals()

    def _infer_locals(self) -> list[str]:
        formals = set(self.formals)
        seen: dict[str, None] = {}
        for node in self.nodes:
            for v in node.stmt.defs():
                if v not in formals:
                    seen.setdefault(v)
        return list(seen)

    @property
    def ref(self) -> str:
        return f"{self.owner}.{self.name}" if self.owner else self.name

    @property
    def formals(self) -> list[str]:
        """Parameters as bound at a call, including the implicit receiver."""
        return ([THIS] if self.owner else []) + list(self.params)

    @property
    def arity(self) -> int:
        return len(self.params)

    @cached_property
    def node_map(self) -> dict[str, CfgNode]:
        return {n.label: n for n in self.nodes}

    def node(self, label: str) -> CfgNode:
        return self.node_map[label]

    @cached_property
    def predecessors(self) -> dict[str, list[str]]:
        preds: dict[str, list[str]] = {n.label: [] for n in self.nodes}
        for n in self.nodes:
            for s in n.successors:
                if s in preds and n.label not in preds[s]:
                    preds[s].append(n.label)
        return preds

    @cached_property
    def return_vars(self) -> tuple[str, ...]:
        out: dict[str, None] = {}
        for n in self.nodes:
            if isinstance(n.stmt, Return):
                out.setdefault(n.stmt.value)
        return tuple(out)

    @cached_property
    def variables(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self.formals + list(self.locals or ())))

    @cached_property
    def call_nodes(self) -> tuple[CfgNode, ...]:
        return tuple(n for n in self.nodes if n.is_call)

    def __repr__(self) -> str:
        return f"Method({self.ref})"


@dataclass(eq=False)
class ClassDef:
    name: str
    superclass: Optional[str] = None
    fields: list[str] = field(default_factory=list)
    static_fields: list[str] = field(default_factory=list)
    methods: list[Method] = field(default_factory=list)
    line: Optional[int] = None


@dataclass(eq=False)
class Program:
    classes: list[ClassDef]
    free_methods: list[Method]
    entry: str

    @cached_property
    def class_map(self) -> dict[str, ClassDef]:
        return {c.name: c for c in self.classes}

    @cached_property
    def method_map(self) -> dict[str, Method]:
        return {m.ref: m for m in self.all_methods()}

    def all_methods(self) -> Iterator[Method]:
        yield from self.free_methods
        for c in self.classes:
            yield from c.methods

    def method(self, ref: str) -> Method:
        try:
            return self.method_map[ref]
        except KeyError:
            raise IRError(f"unknown method {ref!r}") from None

    @property
    def entry_method(self) -> Method:
        return self.method(self.entry)

    @cached_property
    def allocation_sites(self) -> dict[str, str]:
        """Allocation site label -> allocated class name."""
        sites = {}
        for m in self.all_methods():
            for n in m.nodes:
                if isinstance(n.stmt, New):
                    sites[n.label] = n.stmt.class_name
        return sites

    def superclass_chain(self, name: str) -> list[str]:
        chain, seen = [], set()
        cur: Optional[str] = name
        while cur is not None and cur not in seen and cur in self.class_map:
            seen.add(cur)
            chain.append(cur)
            cur = self.class_map[cur].superclass
        return chain

    def fields_of(self, name: str) -> list[str]:
        """Instance fields of a class including inherited ones."""
        out: dict[str, None] = {}
        for c in reversed(self.superclass_chain(name)):
            for f in self.class_map[c].fields:
                out.setdefault(f)
        return list(out)

    @cached_property
    def all_fields(self) -> frozenset[str]:
        return frozenset(f for c in self.classes for f in c.fields)

    def declares_static(self, class_name: str, fieldname: str) -> bool:
        return any(fieldname in self.class_map[c].static_fields
                   for c in self.superclass_chain(class_name))


# --- queries --------------------------------------------------------------

def reverse_postorder(m: Method, backward: bool = False) -> list[str]:
    """Reverse postorder of ``m``'s CFG from its entry (or from exit on the
    reversed graph when ``backward``).

    Earlier successors are ordered first, so straight-line code comes out in
    textual order.  Nodes unreachable from the start are omitted.
    """
    start = m.exit_node if backward else m.entry_node
    nexts = m.predecessors if backward else {n.label: n.successors for n in m.nodes}
    post: list[str] = []
    visited = {start}
    stack = [(start, iter(reversed(nexts[start])))]
    while stack:
        label, it = stack[-1]
        for s in it:
            if s not in visited and s in nexts:
                visited.add(s)
                stack.append((s, iter(reversed(nexts[s]))))
                break
        else:
            stack.pop()
            post.append(label)
    post.reverse()
    return post


def lookup_dispatch(p: Program, class_name: str, method_name: str,
                    arity: Optional[int] = None) -> str:
    """Most-derived declaration of ``method_name`` at or above ``class_name``."""
    if class_name not in p.class_map:
        raise DispatchError(f"unknown class {class_name!r}")
    for c in p.superclass_chain(class_name):
        for m in p.class_map[c].methods:
            if m.name == method_name and (arity is None or m.arity == arity):
                return m.ref
    raise DispatchError(f"no method {method_name!r} in {class_name!r} or its superclasses")


def subtypes(p: Program, class_name: str) -> set[str]:
    """Reflexive-transitive set of subclasses."""
    out = {class_name}
    changed = True
    while changed:
        changed = False
        for c in p.classes:
            if c.superclass in out and c.name not in out:
                out.add(c.name)
                changed = True
    return out


def cha_targets(p: Program, method_name: str, arity: Optional[int] = None) -> list[str]:
    """Every dispatch target a virtual call to ``method_name`` could reach
    when nothing is known about the receiver."""
    out = set()
    for c in p.classes:
        try:
            out.add(lookup_dispatch(p, c.name, method_name, arity))
        except DispatchError:
            pass
    return sorted(out)


# --- validation -----------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    method: Optional[str] = None
    label: Optional[str] = None
    line: Optional[int] = None

    def __str__(self) -> str:
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.method:
            where.append(self.method + (f":{self.label}" if self.label else ""))
        prefix = f"{', '.join(where)}: " if where else ""
        return f"{self.severity}: {prefix}{self.message}"


def validate(p: Program) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    def err(msg, m=None, label=None, line=None, severity="error"):
        diags.append(Diagnostic(severity, msg, m.ref if m else None, label, line))

    names = [c.name for c in p.classes]
    for c in p.classes:
        if names.count(c.name) > 1 and c is not p.class_map[c.name]:
            err(f"duplicate class {c.name!r}", line=c.line)
        if c.superclass is not None and c.superclass not in p.class_map:
            err(f"class {c.name!r} extends undeclared class {c.superclass!r}", line=c.line)
    for c in p.classes:
        seen, cur = set(), c.name
        while cur is not None and cur in p.class_map:
            if cur in seen:
                err(f"cyclic class hierarchy through {c.name!r}", line=c.line)
                break
            seen.add(cur)
            cur = p.class_map[cur].superclass

    refs: dict[str, Method] = {}
    for m in p.all_methods():
        if m.ref in refs:
            err(f"duplicate method {m.ref!r}", line=m.line)
        refs[m.ref] = m
    for c in p.classes:
        for m in c.methods:
            for sup in p.superclass_chain(c.superclass) if c.superclass else []:
                for other in p.class_map[sup].methods:
                    if other.name == m.name and other.arity != m.arity:
                        err(f"{m.ref} has the name of {other.ref} but a different arity; "
                            "it overloads rather than overrides", m, line=m.line,
                            severity="warning")

    if p.entry not in p.method_map:
        err(f"entry method {p.entry!r} is not declared")
    elif p.method_map[p.entry].params or p.method_map[p.entry].owner:
        err(f"entry method {p.entry!r} must be a free method with no parameters")

    site_owner: dict[str, str] = {}
    for m in p.all_methods():
        if m.external:
            continue
        _validate_method(p, m, err, site_owner)
    return diags


def _validate_method(p: Program, m: Method, err, site_owner: dict[str, str]) -> None:
    labels = [n.label for n in m.nodes]
    for label in set(labels):
        if labels.count(label) > 1:
            err(f"duplicate label {label!r}", m, label)
    node_map = m.node_map
    if m.entry_node not in node_map or m.exit_node not in node_map:
        err("method lacks a synthetic entry or exit node", m)
        return
    if m.predecessors[m.entry_node]:
        err("entry node has predecessors", m, m.entry_node)
    if node_map[m.exit_node].successors:
        err("exit node has successors", m, m.exit_node)

    known = set(m.formals) | set(m.locals or ())
    for n in m.nodes:
        s = n.stmt
        for t in n.successors:
            if t not in node_map:
                err(f"successor {t!r} is not a label", m, n.label, n.line)
        if isinstance(s, (Branch, Goto)) and s.label not in node_map:
            err(f"undefined label {s.label!r}", m, n.label, n.line)
        if isinstance(s, Branch) and len(n.successors) != 2:
            err("branch must have exactly two successors", m, n.label, n.line)
        elif not isinstance(s, (Branch, Goto)) and len(n.successors) > 1:
            err("non-branch node has more than one successor", m, n.label, n.line)
        if isinstance(s, Return) and n.successors != [m.exit_node]:
            err("return must flow to the exit node", m, n.label, n.line)
        for v in s.uses() + s.defs():
            if v not in known:
                err(f"undefined variable {v!r}", m, n.label, n.line)
        if not n.synthetic and n.label in RESERVED_LABELS:
            err(f"label {n.label!r} is reserved", m, n.label, n.line)
        if isinstance(s, (New, Cast)) and s.class_name not in p.class_map:
            err(f"undefined class {s.class_name!r}", m, n.label, n.line)
        if isinstance(s, New):
            if n.label in site_owner:
                err(f"allocation label {n.label!r} already used in {site_owner[n.label]}",
                    m, n.label, n.line)
            site_owner[n.label] = m.ref
        if isinstance(s, (Load, Store)) and s.field not in p.all_fields:
            err(f"undeclared field {s.field!r}", m, n.label, n.line)
        if isinstance(s, (StaticLoad, StaticStore)):
            if s.class_name not in p.class_map:
                err(f"undefined class {s.class_name!r}", m, n.label, n.line)
            elif not p.declares_static(s.class_name, s.field):
                err(f"undeclared static field {s.class_name}.{s.field}", m, n.label, n.line)
        if isinstance(s, StaticCall):
            callee = p.method_map.get(s.method)
            if callee is None or callee.owner is not None:
                err(f"undefined method {s.method!r}", m, n.label, n.line)
            elif callee.arity != len(s.args):
                err(f"{s.method} expects {callee.arity} arguments, got {len(s.args)}",
                    m, n.label, n.line)
        if isinstance(s, VirtualCall) and not cha_targets(p, s.method, len(s.args)):
            err(f"no class defines method {s.method!r} with {len(s.args)} parameters",
                m, n.label, n.line)

    reachable = set(reverse_postorder(m))
    for n in m.nodes:
        if n.label not in reachable and not n.synthetic:
            err("unreachable node", m, n.label, n.line, severity="warning")
