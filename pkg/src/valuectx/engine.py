"""Value-context interprocedural solver.

A *value context* pairs a method with the data flow value reaching it.  Each
context is analysed intraprocedurally with an ordinary worklist; call nodes
look up (or create) the callee context for the value flowing into the call
and splice in its current exit value.  Callers are revisited whenever the
exit value of a callee context is first computed or strictly descends.
Every IN/OUT slot only ever descends, so runs terminate on finite lattices
and the result does not depend on the order the worklist is drained in.

The solver is generic in the value type: clients subclass
:class:`AnalysisClient`.  :func:`do_analysis` runs forward,
:func:`do_analysis_backward` runs backward (contexts are then keyed by the
value at the method's exit and "exit values" live at the method's entry).
"""
from __future__ import annotations

import heapq
import random
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Generic, Iterable, Optional, TypeVar

from .ir import CfgNode, Method, Program, reverse_postorder

A = TypeVar("A")

FORWARD = "forward"
BACKWARD = "backward"


class AnalysisError(Exception):
    pass


class MonotonicityError(AnalysisError):
    def __init__(self, ctx: "Context", label: str, detail: str = ""):
        self.context = ctx
        self.label = label
        msg = f"flow function at {ctx.method.ref}:{label} (context X{ctx.id}) is not monotonic"
        super().__init__(msg + (f": {detail}" if detail else ""))


class DuplicateContextError(AnalysisError):
    pass


@dataclass(frozen=True)
class CallResolution:
    targets: tuple[str, ...]
    is_default: bool = False


class AnalysisClient(ABC, Generic[A]):
    """Lattice and flow functions supplied by a concrete analysis.

    ``meet`` must be commutative, associative and idempotent with
    ``top_value()`` as identity, and all flow functions must be monotone.
    Values are never mutated by the solver; flow functions must return new
    values rather than update their inputs.
    """

    program: Program
    direction: str = FORWARD

    @abstractmethod
    def top_value(self) -> A: ...

    @abstractmethod
    def boundary_value(self, entry: Method) -> A: ...

    @abstractmethod
    def meet(self, a: A, b: A) -> A: ...

    def copy(self, a: A) -> A:
        return a

    def values_equal(self, a: A, b: A) -> bool:
        return a == b

    @abstractmethod
    def normal_flow_function(self, ctx: "Context[A]", node: CfgNode, value: A) -> A: ...

    @abstractmethod
    def call_entry_flow_function(self, ctx: "Context[A]", target: Method, node: CfgNode,
                                 value: A) -> A: ...

    @abstractmethod
    def call_exit_flow_function(self, ctx: "Context[A]", target: Method, node: CfgNode,
                                value: A) -> A: ...

    @abstractmethod
    def call_local_flow_function(self, ctx: "Context[A]", node: CfgNode, value: A) -> A: ...

    @abstractmethod
    def resolve_targets(self, ctx: "Context[A]", node: CfgNode, value: A) -> CallResolution: ...

    def format_value(self, a: A) -> str:
        return str(a)

    def take_requeue(self) -> Iterable[tuple[int, str]]:
        """(context id, node label) pairs to revisit because of state held
        outside the data flow values (e.g. a global heap)."""
        return ()

    def meet_all(self, values: Iterable[A]) -> A:
        acc = self.top_value()
        for v in values:
            acc = self.meet(acc, v)
        return acc

    def leq(self, a: A, b: A) -> bool:
        return self.values_equal(self.meet(a, b), a)


@dataclass(eq=False)
class Context(Generic[A]):
    id: int
    method: Method
    entry_value: A
    exit_value: A
    direction: str = FORWARD
    in_values: dict[str, A] = field(default_factory=dict)
    out_values: dict[str, A] = field(default_factory=dict)
    exit_computed: bool = False
    resolutions: dict[str, CallResolution] = field(default_factory=dict)

    def value_before(self, label: str) -> A:
        """Value just before ``label`` in program order (both directions)."""
        return self.in_values[label]

    def value_after(self, label: str) -> A:
        return self.out_values[label]

    def __repr__(self) -> str:
        return f"X{self.id}<{self.method.ref}>"


class TransitionTable:
    """Edges (caller context, call node, target method) -> callee context.

    A call node that is revisited with a different value is re-pointed to a
    new callee context; the reverse index follows so it stays the exact
    inverse of the forward map.
    """

    def __init__(self):
        self._sites: dict[tuple[int, str], dict[str, int]] = {}
        self.reverse: dict[int, set[tuple[int, str]]] = {}

    @property
    def forward(self) -> dict[tuple[int, str, str], int]:
        return {(c, label, ref): t for (c, label), targets in self._sites.items()
                for ref, t in targets.items()}

    def set_targets(self, ctx_id: int, label: str, targets: dict[str, int]) -> None:
        site = (ctx_id, label)
        old = self._sites.get(site, {})
        if old == targets:
            return
        for callee in set(old.values()) - set(targets.values()):
            self.reverse[callee].discard(site)
        for callee in targets.values():
            self.reverse.setdefault(callee, set()).add(site)
        self._sites[site] = dict(targets)

    def callers(self, ctx_id: int) -> set[tuple[int, str]]:
        return self.reverse.get(ctx_id, set())

    def targets_of(self, ctx_id: int, label: str) -> dict[str, int]:
        return dict(self._sites.get((ctx_id, label), {}))

    def edges(self) -> list[tuple[int, str, str, int]]:
        return sorted((c, label, ref, t) for (c, label), targets in self._sites.items()
                      for ref, t in targets.items())


class Worklist:
    """Pending (context, node) pairs; newest context first, then the
    analysis-order index of the node.  With ``rng`` set, items are removed
    in random order instead (used to check order independence)."""

    def __init__(self, rng: Optional[random.Random] = None):
        self.rng = rng
        self._members: set[tuple[int, str]] = set()
        self._heap: list[tuple[int, int, str]] = []
        self._items: list[tuple[int, str]] = []

    def __len__(self) -> int:
        return len(self._members)

    def __contains__(self, item: tuple[int, str]) -> bool:
        return item in self._members

    def add(self, ctx_id: int, label: str, order: int) -> None:
        key = (ctx_id, label)
        if key in self._members:
            return
        self._members.add(key)
        if self.rng is None:
            heapq.heappush(self._heap, (-ctx_id, order, label))
        else:
            self._items.append(key)

    def pop(self) -> tuple[int, str]:
        if self.rng is None:
            neg_id, _, label = heapq.heappop(self._heap)
            key = (-neg_id, label)
        else:
            i = self.rng.randrange(len(self._items))
            self._items[i], self._items[-1] = self._items[-1], self._items[i]
            key = self._items.pop()
        self._members.discard(key)
        return key


@dataclass
class DataFlowSolution(Generic[A]):
    """Per-method values merged over contexts, keyed by (method ref, label)."""
    before: dict[tuple[str, str], A]
    after: dict[tuple[str, str], A]

    def value_before(self, method: str, label: str) -> A:
        return self.before[(method, label)]

    def value_after(self, method: str, label: str) -> A:
        return self.after[(method, label)]

    def methods(self) -> list[str]:
        return sorted({m for m, _ in self.before})


class InterProceduralAnalysis(Generic[A]):
    direction = FORWARD

    def __init__(self, client: AnalysisClient[A], program: Program, *,
                 order_seed: Optional[int] = None,
                 on_write: Optional[Callable[[Context, str, str, A], None]] = None,
                 max_steps: Optional[int] = None):
        self.client = client
        self.program = program
        self.contexts: list[Context[A]] = []
        self._by_method: dict[str, list[Context[A]]] = {}
        self.transitions = TransitionTable()
        self.worklist = Worklist(random.Random(order_seed) if order_seed is not None else None)
        self.on_write = on_write
        self.max_steps = max_steps
        self.steps = 0
        self._order: dict[str, dict[str, int]] = {}

    # --- graph orientation (overridden for backward) ---
    def _preds(self, m: Method, label: str) -> list[str]:
        return m.predecessors[label]

    def _succs(self, m: Method, label: str) -> list[str]:
        return m.node(label).successors

    def _start(self, m: Method) -> str:
        return m.entry_node

    def _end(self, m: Method) -> str:
        return m.exit_node

    def _order_index(self, m: Method) -> dict[str, int]:
        idx = self._order.get(m.ref)
        if idx is None:
            rpo = reverse_postorder(m, backward=self.direction == BACKWARD)
            idx = {label: i for i, label in enumerate(rpo)}
            for n in m.nodes:
                idx.setdefault(n.label, len(idx))
            self._order[m.ref] = idx
        return idx

    # --- contexts ---
    def get_context(self, method: Method, value: A) -> Optional[Context[A]]:
        for ctx in self._by_method.get(method.ref, ()):
            if self.client.values_equal(ctx.entry_value, value):
                return ctx
        return None

    def init_context(self, method: Method, value: A) -> Context[A]:
        if self.get_context(method, value) is not None:
            raise DuplicateContextError(f"context for {method.ref} with this value exists")
        top = self.client.top_value()
        ctx = Context(len(self.contexts), method, self.client.copy(value), top,
                      direction=self.direction)
        self.contexts.append(ctx)
        self._by_method.setdefault(method.ref, []).append(ctx)
        order = self._order_index(method)
        for n in method.nodes:
            self.worklist.add(ctx.id, n.label, order[n.label])
            ctx.in_values[n.label] = top
            ctx.out_values[n.label] = top
        self._slot_in(ctx)[self._start(method)] = self.client.copy(value)
        return ctx

    def _slot_in(self, ctx: Context[A]) -> dict[str, A]:
        """Values on the side a node's flow function reads."""
        return ctx.in_values if self.direction == FORWARD else ctx.out_values

    def _slot_out(self, ctx: Context[A]) -> dict[str, A]:
        return ctx.out_values if self.direction == FORWARD else ctx.in_values

    def _enqueue(self, ctx: Context[A], label: str) -> None:
        self.worklist.add(ctx.id, label, self._order_index(ctx.method)[label])

    # --- main loop ---
    def run(self) -> "AnalysisResult[A]":
        entry = self.program.entry_method
        self.init_context(entry, self.client.boundary_value(entry))
        client = self.client
        while len(self.worklist):
            ctx_id, label = self.worklist.pop()
            ctx = self.contexts[ctx_id]
            m = ctx.method
            self.steps += 1
            if self.max_steps is not None and self.steps > self.max_steps:
                raise AnalysisError(f"step budget of {self.max_steps} exceeded")
            node = m.node(label)
            ins, outs = self._slot_in(ctx), self._slot_out(ctx)
            old_in = ins[label]
            if label != self._start(m):
                ins[label] = client.meet_all(outs[p] for p in self._preds(m, label))
                self._record(ctx, label, "in", ins[label])
            a = ins[label]
            old_out = outs[label]
            if node.is_call:
                new_out = self._process_call(ctx, node, a)
                if new_out is not None:
                    # Keep call-node values descending.  A call whose IN just
                    # descended may land on a context whose exit value is
                    # still transient and higher; writing it would let the
                    # loop around the call oscillate forever.
                    new_out = client.meet(old_out, new_out)
            else:
                new_out = client.normal_flow_function(ctx, node, a)
                if client.leq(a, old_in) and not client.leq(new_out, old_out):
                    raise MonotonicityError(ctx, label, f"{client.format_value(old_out)} -> "
                                                        f"{client.format_value(new_out)}")
            if new_out is not None and not client.values_equal(new_out, old_out):
                outs[label] = new_out
                self._record(ctx, label, "out", new_out)
                for s in self._succs(m, label):
                    self._enqueue(ctx, s)
            if label == self._end(m):
                value = outs[label]
                if not ctx.exit_computed or not client.values_equal(value, ctx.exit_value):
                    ctx.exit_value = value
                    ctx.exit_computed = True
                    for caller_id, call_label in sorted(self.transitions.callers(ctx.id)):
                        self._enqueue(self.contexts[caller_id], call_label)
            for requeue_id, requeue_label in client.take_requeue():
                self._enqueue(self.contexts[requeue_id], requeue_label)
        return AnalysisResult(self.program, client, self.direction, self.contexts,
                              self.transitions, self.steps)

    def _record(self, ctx, label, side, value) -> None:
        if self.on_write is not None:
            self.on_write(ctx, label, side, value)

    def _process_call(self, ctx: Context[A], node: CfgNode, a: A) -> Optional[A]:
        """Returns the new value on the far side of ``node``, or None to
        leave it unchanged until a freshly created callee context reports
        its exit value."""
        client = self.client
        res = client.resolve_targets(ctx, node, a)
        ctx.resolutions[node.label] = res
        linked: dict[str, int] = {}
        parts: list[A] = []
        fresh = False
        for ref in res.targets:
            target = self.program.method(ref)
            x = self._into_callee(ctx, target, node, a)
            callee = self.get_context(target, x)
            if callee is None:
                callee = self.init_context(target, x)
                fresh = True
            linked[ref] = callee.id
            if not fresh:
                parts.append(self._out_of_callee(ctx, target, node, callee.exit_value))
        self.transitions.set_targets(ctx.id, node.label, linked)
        if fresh:
            return None
        if not res.targets and not res.is_default:
            return client.top_value()
        parts.append(client.call_local_flow_function(ctx, node, a))
        return client.meet_all(parts)

    def _into_callee(self, ctx, target, node, a):
        return self.client.call_entry_flow_function(ctx, target, node, a)

    def _out_of_callee(self, ctx, target, node, value):
        return self.client.call_exit_flow_function(ctx, target, node, value)


class BackwardInterProceduralAnalysis(InterProceduralAnalysis[A]):
    """Mirror image: values flow from successors to predecessors, contexts
    are keyed by the value at the callee's exit, and the call-exit flow
    function produces that key while call-entry maps the callee's result
    at its entry back to the caller."""

    direction = BACKWARD

    def _preds(self, m, label):
        return m.node(label).successors

    def _succs(self, m, label):
        return m.predecessors[label]

    def _start(self, m):
        return m.exit_node

    def _end(self, m):
        return m.entry_node

    def _into_callee(self, ctx, target, node, a):
        return self.client.call_exit_flow_function(ctx, target, node, a)

    def _out_of_callee(self, ctx, target, node, value):
        return self.client.call_entry_flow_function(ctx, target, node, value)


@dataclass
class AnalysisResult(Generic[A]):
    program: Program
    client: AnalysisClient[A]
    direction: str
    contexts: list[Context[A]]
    transitions: TransitionTable
    steps: int = 0

    def get_contexts(self, method: str, include_unreachable: bool = False) -> list[Context[A]]:
        """Contexts of ``method`` in creation order.

        By default only contexts reachable from the entry context through
        the final transition table are returned; contexts created for
        intermediate (since refined) call values are dropped.
        """
        self.program.method(method)
        pool = self.contexts if include_unreachable else self.reachable_contexts()
        return sorted((c for c in pool if c.method.ref == method), key=lambda c: c.id)

    def reachable_contexts(self) -> list[Context[A]]:
        """Contexts reachable from the entry context, in canonical order:
        depth-first, call nodes in reverse postorder (then CFG-unreachable
        ones in textual order), targets by name."""
        order: list[Context[A]] = []
        seen: set[int] = set()

        def visit(ctx: Context[A]) -> None:
            seen.add(ctx.id)
            order.append(ctx)
            for label in _analysis_order(ctx.method):
                if not ctx.method.node(label).is_call:
                    continue
                for _, callee in sorted(self.transitions.targets_of(ctx.id, label).items()):
                    if callee not in seen:
                        visit(self.contexts[callee])

        if self.contexts:
            visit(self.contexts[0])
        return order

    def canonical_ids(self) -> dict[int, int]:
        return {c.id: i for i, c in enumerate(self.reachable_contexts())}

    def canonical_transitions(self) -> list[tuple[int, str, str, int]]:
        ids = self.canonical_ids()
        return sorted((ids[s], label, ref, ids[t])
                      for s, label, ref, t in self.transitions.edges() if s in ids)

    def meet_over_valid_paths(self) -> DataFlowSolution[A]:
        return meet_over_valid_paths(self)

    def contexts_per_method(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for c in self.reachable_contexts():
            counts[c.method.ref] = counts.get(c.method.ref, 0) + 1
        return counts


def _analysis_order(m: Method) -> list[str]:
    rpo = reverse_postorder(m)
    seen = set(rpo)
    return rpo + [n.label for n in m.nodes if n.label not in seen]


def meet_over_valid_paths(result: AnalysisResult[A]) -> DataFlowSolution[A]:
    """Merge every reachable context's values per (method, node)."""
    client = result.client
    before: dict[tuple[str, str], A] = {}
    after: dict[tuple[str, str], A] = {}
    for ctx in result.reachable_contexts():
        ref = ctx.method.ref
        for n in ctx.method.nodes:
            key = (ref, n.label)
            b, a = ctx.value_before(n.label), ctx.value_after(n.label)
            before[key] = client.meet(before[key], b) if key in before else b
            after[key] = client.meet(after[key], a) if key in after else a
    return DataFlowSolution(before, after)


def do_analysis(client: AnalysisClient[A], program: Program, **kwargs) -> AnalysisResult[A]:
    return InterProceduralAnalysis(client, program, **kwargs).run()


def do_analysis_backward(client: AnalysisClient[A], program: Program,
                         **kwargs) -> AnalysisResult[A]:
    return BackwardInterProceduralAnalysis(client, program, **kwargs).run()


def solution_records(result: AnalysisResult[A]) -> list[str]:
    """One line per (context, node), contexts renumbered canonically."""
    fmt = result.client.format_value
    lines = []
    for i, ctx in enumerate(result.reachable_contexts()):
        for label in sorted(n.label for n in ctx.method.nodes):
            lines.append(f"ctx={i} method={ctx.method.ref} node={label} "
                         f"in={fmt(ctx.value_before(label))} out={fmt(ctx.value_after(label))}")
    return lines


def solution_dump(result: AnalysisResult[A]) -> str:
    """Context records, transitions and the merged solution as text; equal
    across worklist orders for a given program and client."""
    fmt = result.client.format_value
    lines = solution_records(result)
    for s, label, ref, t in result.canonical_transitions():
        lines.append(f"edge X{s} -{label}-> X{t} ({ref})")
    merged = result.meet_over_valid_paths()
    for key in sorted(merged.before):
        lines.append(f"merged method={key[0]} node={key[1]} "
                     f"in={fmt(merged.before[key])} out={fmt(merged.after[key])}")
    return "\n".join(lines) + "\n"


def transitions_dot(result: AnalysisResult[A], name: str = "contexts") -> str:
    """Context transition diagram in DOT."""
    fmt = result.client.format_value
    out = [f"digraph {name} {{"]
    for i, ctx in enumerate(result.reachable_contexts()):
        label = (f"X{i}: {ctx.method.ref} [{fmt(ctx.entry_value)} / "
                 f"{fmt(ctx.exit_value)}]")
        out.append(f'  X{i} [label="{_dot_escape(label)}"];')
    for s, label, _, t in result.canonical_transitions():
        out.append(f'  X{s} -> X{t} [label="{_dot_escape(label)}"];')
    out.append("}")
    return "\n".join(out) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
