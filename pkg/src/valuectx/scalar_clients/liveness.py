"""Backward strongly-live-variables analysis.

A variable is strongly live if it may be read before being overwritten by
a computation whose own result is live.  Values are frozensets; the top
value is the empty set and meet is union.  Contexts are keyed by the set
live at the callee's exit, which is either empty or the callee's returned
variables.
"""
from __future__ import annotations

from typing import FrozenSet

from ..engine import BACKWARD, AnalysisClient, CallResolution, Context
from ..ir import (
    CfgNode, Method, Program, Return, StaticCall, Store, StaticStore,
    VirtualCall, arg_var, cha_targets,
)

LiveSet = FrozenSet[str]
EMPTY: LiveSet = frozenset()


def live_transfer(stmt, out: LiveSet) -> LiveSet:
    """Live-in of a non-call statement given its live-out."""
    if isinstance(stmt, Return):
        return out | {stmt.value}
    if isinstance(stmt, (Store, StaticStore)):
        # heap writes are observable; keep their operands
        return out | set(stmt.uses())
    defs = stmt.defs()
    if not defs:
        return out | set(stmt.uses())
    if not any(d in out for d in defs):
        return out
    return (out - set(defs)) | set(stmt.uses())


def _arg_vars(node: CfgNode) -> set[str]:
    return {v for v in map(arg_var, node.stmt.args) if v is not None}


def _receiver(node: CfgNode) -> set[str]:
    s = node.stmt
    return {s.receiver} if isinstance(s, VirtualCall) else set()


def live_call_exit(target: Method, node: CfgNode, out: LiveSet) -> LiveSet:
    """Callee exit key: its returned variables iff the call's result is live."""
    if node.stmt.target in out:
        return frozenset(target.return_vars)
    return EMPTY


def live_call_entry(target: Method, node: CfgNode, callee_in: LiveSet) -> LiveSet:
    """Actuals whose formal is live at the callee's entry."""
    live = set()
    for formal, arg in zip(target.params, node.stmt.args):
        v = arg_var(arg)
        if v is not None and formal in callee_in:
            live.add(v)
    return frozenset(live)


def live_call_local(node: CfgNode, out: LiveSet) -> LiveSet:
    return frozenset((out - {node.stmt.target}) | _receiver(node))


def live_default_site(node: CfgNode, out: LiveSet) -> LiveSet:
    """Unknown callee: every argument may be read."""
    return frozenset((out - {node.stmt.target}) | _receiver(node) | _arg_vars(node))


def scalar_resolve(program: Program, node: CfgNode) -> CallResolution:
    """Static calls go to their declared target (extern ones are default
    sites); virtual calls go to every class-hierarchy candidate."""
    s = node.stmt
    if isinstance(s, StaticCall):
        if program.method(s.method).external:
            return CallResolution((), True)
        return CallResolution((s.method,))
    return CallResolution(tuple(cha_targets(program, s.method, len(s.args))))


class LivenessAnalysis(AnalysisClient[frozenset]):
    direction = BACKWARD

    def __init__(self, program: Program):
        self.program = program

    def top_value(self):
        return EMPTY

    def boundary_value(self, entry):
        return EMPTY

    def meet(self, a, b):
        return a | b

    def normal_flow_function(self, ctx: Context, node: CfgNode, value):
        return live_transfer(node.stmt, value)

    def call_entry_flow_function(self, ctx, target, node, value):
        return live_call_entry(target, node, value)

    def call_exit_flow_function(self, ctx, target, node, value):
        return live_call_exit(target, node, value)

    def call_local_flow_function(self, ctx, node, value):
        if ctx.resolutions[node.label].is_default:
            return live_default_site(node, value)
        return live_call_local(node, value)

    def resolve_targets(self, ctx, node, value):
        return scalar_resolve(self.program, node)

    def format_value(self, a):
        return "{" + ",".join(sorted(a)) + "}"
