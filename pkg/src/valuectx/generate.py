"""Random IR programs for differential and property testing.

All generators return program text that passes validation.  Control flow
only jumps backwards through ``if goto`` (which can fall through), so every
node can reach its method's exit.
"""
from __future__ import annotations

import random
from dataclasses import dataclass


@dataclass
class GenConfig:
    max_methods: int = 5
    max_nodes: int = 8
    max_calls: int = 3
    recursive: bool = False


def _pick(rng: random.Random, xs):
    return xs[rng.randrange(len(xs))]


def _control(rng, labels, i, lines) -> bool:
    """Maybe emit a branch or jump at position ``i``; True if emitted."""
    r = rng.random()
    later = labels[i + 1:]
    if r < 0.15 and labels[:i]:
        lines.append(f"if goto {_pick(rng, labels[:i] + later)}")
        return True
    if r < 0.3 and later:
        lines.append(f"if goto {_pick(rng, later)}")
        return True
    if r < 0.35 and later:
        lines.append(f"goto {_pick(rng, later)}")
        return True
    return False


def scalar_program(rng: random.Random, cfg: GenConfig = GenConfig()) -> str:
    """Integer-only program of free methods ``main, f1..fk``.

    Without ``cfg.recursive`` method i only calls methods j > i.  With it,
    the callees form at least one call cycle ``f1 -> f2 -> .. -> fk -> f1``
    (``f1 -> f1`` when k = 1), so the programs are mutually recursive.
    """
    k = rng.randint(1 if cfg.recursive else 0, cfg.max_methods - 1)
    names = ["main"] + [f"f{i}" for i in range(1, k + 1)]
    arity = {n: (0 if n == "main" else rng.randint(1, 2)) for n in names}
    out = []
    for mi, name in enumerate(names):
        params = [f"p{j}" for j in range(arity[name])]
        n_body = rng.randint(1, cfg.max_nodes - (0 if name == "main" else 1))
        labels = [f"{name}_{j}" for j in range(n_body)]
        if name != "main":
            labels.append(f"{name}_ret")
        defined = list(params)
        body = []
        calls = 0
        forced = None
        if cfg.recursive and name != "main":
            forced = names[mi % k + 1]
        elif cfg.recursive and name == "main":
            forced = "f1"
        force_at = rng.randrange(n_body) if forced else -1
        for i in range(n_body):
            stmt = []
            callees = names[mi + 1:] if not cfg.recursive else names[1:]
            if i == force_at or (callees and calls < cfg.max_calls and rng.random() < 0.25):
                callee = forced if i == force_at else _pick(rng, callees)
                args = []
                for _ in range(arity[callee]):
                    r = rng.random()
                    if defined and r < 0.5:
                        args.append(_pick(rng, defined))
                    elif defined and r < 0.7:
                        args.append("-" + _pick(rng, defined))
                    else:
                        args.append(str(rng.randint(-3, 3)))
                x = f"v{rng.randrange(4)}"
                stmt.append(f"{x} = call {callee}({', '.join(args)})")
                defined.append(x)
                calls += 1
            elif not _control(rng, labels, i, stmt):
                x = f"v{rng.randrange(4)}"
                r = rng.random()
                if not defined or r < 0.3:
                    stmt.append(f"{x} = {rng.randint(-3, 3)}")
                elif r < 0.5:
                    stmt.append(f"{x} = {_pick(rng, defined)}")
                elif r < 0.6:
                    stmt.append(f"{x} = -{_pick(rng, defined)}")
                elif r < 0.95:
                    op = _pick(rng, ["+", "-", "*"])
                    stmt.append(f"{x} = {_pick(rng, defined)} {op} {_pick(rng, defined)}")
                else:
                    stmt.append("nop")
                    x = None
                if x:
                    defined.append(x)
            body.append(f"  {labels[i]}: {stmt[0]}")
        if name != "main":
            body.append(f"  {labels[-1]}: return {_pick(rng, defined)}")
        out.append(f"method {name}({', '.join(params)}) {{")
        out.extend(body)
        out.append("}")
    out.append("entry main")
    return "\n".join(out) + "\n"


_CLASSES = """\
class A {
  field f
  field g
  static field s
%(A)s
}
class B extends A {
%(B)s
}
class C {
  field f
%(C)s
}
extern method ext(x)
"""


def pointer_program(rng: random.Random, cfg: GenConfig = GenConfig()) -> str:
    """Reference-manipulating program over classes A, B extends A and C,
    with virtual calls ``m(p)``, free methods ``h1..``, statics, casts,
    nulls and an extern method.  Calls may recurse."""
    n_free = rng.randint(0, max(0, cfg.max_methods - 3))
    free = [f"h{i}" for i in range(1, n_free + 1)]
    counter = [0]

    def body(prefix: str, params: list[str], is_main: bool) -> list[str]:
        n = rng.randint(1, cfg.max_nodes - (0 if is_main else 1))
        labels = [f"{prefix}{j}" for j in range(n)]
        defined = list(params)
        lines = []
        calls = 0
        for i in range(n):
            stmt: list[str] = []
            x = f"x{rng.randrange(4)}"
            r = rng.random()
            if not defined or r < 0.2:
                counter[0] += 1
                stmt.append(f"{x} = new {_pick(rng, ['A', 'B', 'C'])}")
            elif _control(rng, labels, i, stmt):
                x = None
            elif r < 0.35:
                stmt.append(f"{x} = {_pick(rng, defined)}")
            elif r < 0.45:
                stmt.append(f"{x} = {_pick(rng, defined)}.{_pick(rng, ['f', 'g'])}")
            elif r < 0.55:
                stmt.append(f"{_pick(rng, defined)}.{_pick(rng, ['f', 'g'])} = {_pick(rng, defined)}")
                x = None
            elif r < 0.6:
                stmt.append(f"{x} = null")
            elif r < 0.65:
                stmt.append(f"{x} = ({_pick(rng, ['A', 'B'])}) {_pick(rng, defined)}")
            elif r < 0.7:
                stmt.append(f"{x} = static A.s")
            elif r < 0.75:
                stmt.append(f"static A.s = {_pick(rng, defined)}")
                x = None
            elif r < 0.82 and calls < cfg.max_calls:
                stmt.append(f"{x} = vcall {_pick(rng, defined)}.m({_pick(rng, defined)})")
                calls += 1
            elif r < 0.9 and free and calls < cfg.max_calls:
                stmt.append(f"{x} = call {_pick(rng, free)}({_pick(rng, defined)})")
                calls += 1
            elif r < 0.93:
                stmt.append(f"{x} = call ext({_pick(rng, defined)})")
            else:
                counter[0] += 1
                stmt.append(f"{x} = new {_pick(rng, ['A', 'B', 'C'])}")
            if x:
                defined.append(x)
            lines.append(f"    {labels[i]}: {stmt[0]}")
        if not is_main:
            lines.append(f"    {prefix}r: return {_pick(rng, defined)}")
        return lines

    def cls_method(cname: str) -> str:
        return "\n".join([f"  method m(p) {{"] + body(f"{cname.lower()}m", ["this", "p"], False)
                         + ["  }"]).replace("\n    ", "\n    ")

    parts = _CLASSES % {"A": cls_method("A"), "B": cls_method("B") if rng.random() < 0.7 else "",
                        "C": cls_method("C")}
    out = [parts]
    for h in free:
        out.append(f"method {h}(q) {{")
        out.extend(body(f"{h}_", ["q"], False))
        out.append("}")
    out.append("method main() {")
    out.extend(body("mn", [], True))
    out.append("}")
    out.append("entry main")
    return "\n".join(out) + "\n"
