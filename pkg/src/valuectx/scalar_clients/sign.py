"""Forward sign analysis over scalar locals.

Values are environments mapping variables to a :class:`Sign`.  A variable
missing from the environment is ⊤ (not yet initialised), so the empty
environment is the top value and environments are kept without ⊤ entries.
"""
from __future__ import annotations

import enum
from typing import Mapping

from ..engine import AnalysisClient, CallResolution, Context
from ..ir import (
    Arg, BinOp, Cast, CfgNode, ConstAssign, Copy, IntArg, Load, Method, Neg,
    NegArg, New, NullAssign, Program, StaticCall, StaticLoad, VarArg,
    VirtualCall, cha_targets,
)


class Sign(enum.Enum):
    TOP = "T"
    NEG = "-"
    ZERO = "0"
    POS = "+"
    BOT = "B"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def of(cls, n: int) -> "Sign":
        return cls.POS if n > 0 else cls.NEG if n < 0 else cls.ZERO


TOP, NEG, ZERO, POS, BOT = Sign.TOP, Sign.NEG, Sign.ZERO, Sign.POS, Sign.BOT

SignEnv = Mapping[str, Sign]


def sign_meet(a: Sign, b: Sign) -> Sign:
    if a is TOP:
        return b
    if b is TOP or a is b:
        return a
    return BOT


def sign_leq(a: Sign, b: Sign) -> bool:
    return sign_meet(a, b) is a


def sign_neg(a: Sign) -> Sign:
    return {NEG: POS, POS: NEG}.get(a, a)


def sign_mul(a: Sign, b: Sign) -> Sign:
    if a is TOP or b is TOP:
        return TOP
    if a is ZERO or b is ZERO:
        return ZERO
    if a is BOT or b is BOT:
        return BOT
    return POS if a is b else NEG


def sign_add(a: Sign, b: Sign) -> Sign:
    if a is TOP or b is TOP:
        return TOP
    if a is ZERO:
        return b
    if b is ZERO:
        return a
    return a if a is b and a is not BOT else BOT


def sign_sub(a: Sign, b: Sign) -> Sign:
    return sign_add(a, sign_neg(b))


_ARITH = {"+": sign_add, "-": sign_sub, "*": sign_mul}


def env(**signs: Sign) -> dict[str, Sign]:
    """Build a canonical environment, dropping ⊤ entries."""
    return {k: v for k, v in signs.items() if v is not TOP}


def _set(e: SignEnv, var: str, s: Sign) -> dict[str, Sign]:
    out = dict(e)
    if s is TOP:
        out.pop(var, None)
    else:
        out[var] = s
    return out


def env_meet(a: SignEnv, b: SignEnv) -> dict[str, Sign]:
    out = dict(a)
    for v, s in b.items():
        out[v] = sign_meet(out.get(v, TOP), s)
    return out


def env_leq(a: SignEnv, b: SignEnv) -> bool:
    return env_meet(a, b) == dict(a)


def format_env(e: SignEnv) -> str:
    """``a^+b^-`` with variables sorted; the empty environment prints as T."""
    if not e:
        return "T"
    return "".join(f"{v}^{e[v]}" for v in sorted(e))


def arg_sign(e: SignEnv, arg: Arg) -> Sign:
    if isinstance(arg, IntArg):
        return Sign.of(arg.value)
    if isinstance(arg, NegArg):
        return sign_neg(e.get(arg.name, TOP))
    return e.get(arg.name, TOP)


def sign_transfer(stmt, e: SignEnv) -> dict[str, Sign]:
    """Effect of a non-call statement."""
    if isinstance(stmt, ConstAssign):
        return _set(e, stmt.target, Sign.of(stmt.value))
    if isinstance(stmt, Copy):
        return _set(e, stmt.target, e.get(stmt.source, TOP))
    if isinstance(stmt, Neg):
        return _set(e, stmt.target, sign_neg(e.get(stmt.source, TOP)))
    if isinstance(stmt, BinOp):
        s = _ARITH[stmt.op](e.get(stmt.left, TOP), e.get(stmt.right, TOP))
        return _set(e, stmt.target, s)
    if isinstance(stmt, (Load, StaticLoad)):
        # the loaded value may be any integer
        return _set(e, stmt.target, BOT)
    if isinstance(stmt, (New, NullAssign, Cast)):
        return _set(e, stmt.target, TOP)
    return dict(e)


def sign_call_entry(target: Method, node: CfgNode, e: SignEnv) -> dict[str, Sign]:
    args = node.stmt.args
    if len(args) != len(target.params):
        raise ValueError(f"{node.label}: {target.ref} takes {len(target.params)} "
                         f"arguments, {len(args)} given")
    out: dict[str, Sign] = {}
    for formal, arg in zip(target.params, args):
        s = arg_sign(e, arg)
        if s is not TOP:
            out[formal] = s
    return out


def sign_call_exit(target: Method, node: CfgNode, exit_env: SignEnv) -> dict[str, Sign]:
    """Only the assigned variable, with the meet of the callee's returned
    variables at its exit."""
    returned = TOP
    for r in target.return_vars:
        returned = sign_meet(returned, exit_env.get(r, TOP))
    return _set({}, node.stmt.target, returned)


def sign_call_local(node: CfgNode, e: SignEnv) -> dict[str, Sign]:
    return _set(e, node.stmt.target, TOP)


class SignAnalysis(AnalysisClient[dict]):
    def __init__(self, program: Program):
        self.program = program

    def top_value(self):
        return {}

    def boundary_value(self, entry):
        return {}

    def meet(self, a, b):
        return env_meet(a, b)

    def copy(self, a):
        return dict(a)

    def normal_flow_function(self, ctx: Context, node: CfgNode, value):
        return sign_transfer(node.stmt, value)

    def call_entry_flow_function(self, ctx, target, node, value):
        return sign_call_entry(target, node, value)

    def call_exit_flow_function(self, ctx, target, node, value):
        return sign_call_exit(target, node, value)

    def call_local_flow_function(self, ctx, node, value):
        if self._is_external(node):
            # unknown callee: any integer may come back
            return _set(value, node.stmt.target, BOT)
        return sign_call_local(node, value)

    def _is_external(self, node: CfgNode) -> bool:
        s = node.stmt
        return isinstance(s, StaticCall) and self.program.method(s.method).external

    def resolve_targets(self, ctx, node, value):
        s = node.stmt
        if isinstance(s, StaticCall):
            if self.program.method(s.method).external:
                return CallResolution((), True)
            return CallResolution((s.method,))
        assert isinstance(s, VirtualCall)
        return CallResolution(tuple(cha_targets(self.program, s.method, len(s.args))))

    def format_value(self, a):
        return format_env(a)


__all__ = [
    "Sign", "TOP", "NEG", "ZERO", "POS", "BOT", "SignAnalysis", "sign_meet",
    "sign_leq", "sign_neg", "sign_mul", "sign_add", "sign_sub", "sign_transfer",
    "sign_call_entry", "sign_call_exit", "sign_call_local", "env", "env_meet",
    "env_leq", "format_env", "arg_sign", "VarArg",
]
