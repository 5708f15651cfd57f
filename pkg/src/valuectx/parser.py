"""Textual IR: tokenizer, recursive-descent parser and canonical printer.

Example::

    method f(a, b) {
      n2: if goto c2
      n3: c = a * b
      j1: goto n4
      c2: c = call g(10)
      n4: nop
      n5: return c
    }
    entry main
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .ir import (
    ENTRY, EXIT, RESERVED_LABELS, Arg, BinOp, Branch, Cast, CfgNode, ClassDef,
    ConstAssign, Copy, Goto, IntArg, IRError, Load, Method, Neg, NegArg, New,
    Nop, NullAssign, Program, Return, StaticCall, StaticLoad, StaticStore,
    Store, VarArg, VirtualCall, validate,
)

KEYWORDS = frozenset({
    "class", "extends", "field", "static", "method", "entry", "extern", "new",
    "null", "call", "vcall", "return", "if", "goto", "nop",
})

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}(),.=:+\-*])
""", re.VERBOSE)


class IRSyntaxError(IRError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # name | int | punct | newline | eof
    value: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise IRSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "newline":
            tokens.append(Token("newline", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind in ("int", "name", "punct"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


@dataclass
class _Line:
    label: str
    stmt: object
    line: int


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[Token] = None) -> IRSyntaxError:
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.value)
        return IRSyntaxError(f"{msg} (found {found})", tok.line, tok.column)

    def at(self, value: str) -> bool:
        return self.tok.kind in ("name", "punct") and self.tok.value == value

    def expect(self, value: str) -> Token:
        if not self.at(value):
            raise self.error(f"expected {value!r}")
        tok = self.tok
        self.i += 1
        return tok

    def name(self, what: str = "name") -> str:
        tok = self.tok
        if tok.kind != "name" or tok.value in KEYWORDS:
            raise self.error(f"expected {what}")
        self.i += 1
        return tok.value

    def integer(self) -> int:
        sign = -1 if self.at("-") else 1
        if sign < 0:
            self.i += 1
        if self.tok.kind != "int":
            raise self.error("expected integer")
        value = int(self.tok.value)
        self.i += 1
        return sign * value

    def skip_newlines(self) -> None:
        while self.tok.kind == "newline":
            self.i += 1

    def end_of_statement(self) -> None:
        if self.tok.kind == "newline":
            self.skip_newlines()
        elif not self.at("}") and self.tok.kind != "eof":
            raise self.error("expected end of line")

    # grammar
    def program(self) -> Program:
        classes: list[ClassDef] = []
        free: list[Method] = []
        entry: Optional[str] = None
        entry_tok: Optional[Token] = None
        self.skip_newlines()
        while self.tok.kind != "eof":
            if self.at("class"):
                classes.append(self.class_decl())
            elif self.at("method"):
                free.append(self.method_decl(owner=None))
            elif self.at("extern"):
                free.append(self.extern_decl())
            elif self.at("entry"):
                entry_tok = self.expect("entry")
                if entry is not None:
                    raise self.error("duplicate entry declaration", entry_tok)
                entry = self.name("method name")
                self.end_of_statement()
            else:
                raise self.error("expected 'class', 'method', 'extern' or 'entry'")
            self.skip_newlines()
        if entry is None:
            if any(m.name == "main" for m in free):
                entry = "main"
            else:
                raise IRSyntaxError("missing 'entry' declaration", self.tok.line, self.tok.column)
        return Program(classes, free, entry)

    def class_decl(self) -> ClassDef:
        line = self.expect("class").line
        name = self.name("class name")
        sup = None
        if self.at("extends"):
            self.i += 1
            sup = self.name("class name")
        cls = ClassDef(name, sup, line=line)
        self.expect("{")
        self.skip_newlines()
        while not self.at("}"):
            if self.at("field"):
                self.i += 1
                cls.fields.append(self.name("field name"))
                self.end_of_statement()
            elif self.at("static"):
                self.i += 1
                self.expect("field")
                cls.static_fields.append(self.name("field name"))
                self.end_of_statement()
            elif self.at("method"):
                cls.methods.append(self.method_decl(owner=name))
                self.skip_newlines()
            else:
                raise self.error("expected 'field', 'static field', 'method' or '}'")
        self.expect("}")
        self.end_of_statement()
        return cls

    def params(self) -> list[str]:
        self.expect("(")
        out = []
        if not self.at(")"):
            out.append(self.name("parameter"))
            while self.at(","):
                self.i += 1
                out.append(self.name("parameter"))
        self.expect(")")
        return out

    def extern_decl(self) -> Method:
        line = self.expect("extern").line
        self.expect("method")
        name = self.name("method name")
        params = self.params()
        self.end_of_statement()
        return Method(name, params, [], external=True, line=line, locals=[])

    def method_decl(self, owner: Optional[str]) -> Method:
        line = self.expect("method").line
        name = self.name("method name")
        params = self.params()
        self.expect("{")
        self.skip_newlines()
        lines: list[_Line] = []
        seen: dict[str, Token] = {}
        while not self.at("}"):
            tok = self.tok
            label = self.name("label")
            if label in RESERVED_LABELS:
                raise self.error(f"label {label!r} is reserved", tok)
            if label in seen:
                raise IRSyntaxError(f"duplicate label {label!r}", tok.line, tok.column)
            seen[label] = tok
            self.expect(":")
            lines.append(_Line(label, self.instr(), tok.line))
            self.end_of_statement()
        self.expect("}")
        self.end_of_statement()
        return _build_method(name, params, owner, lines, line)

    def args(self) -> tuple[Arg, ...]:
        self.expect("(")
        out: list[Arg] = []
        if not self.at(")"):
            out.append(self.arg())
            while self.at(","):
                self.i += 1
                out.append(self.arg())
        self.expect(")")
        return tuple(out)

    def arg(self) -> Arg:
        if self.tok.kind == "int" or (self.at("-") and self.peek().kind == "int"):
            return IntArg(self.integer())
        if self.at("-"):
            self.i += 1
            return NegArg(self.name("variable"))
        return VarArg(self.name("variable"))

    def instr(self):
        if self.at("return"):
            self.i += 1
            return Return(self.name("variable"))
        if self.at("if"):
            self.i += 1
            self.expect("goto")
            return Branch(self.name("label"))
        if self.at("goto"):
            self.i += 1
            return Goto(self.name("label"))
        if self.at("nop"):
            self.i += 1
            return Nop()
        if self.at("static"):
            self.i += 1
            cls = self.name("class name")
            self.expect(".")
            fld = self.name("field name")
            self.expect("=")
            return StaticStore(cls, fld, self.name("variable"))
        target = self.name("variable")
        if self.at("."):
            self.i += 1
            fld = self.name("field name")
            self.expect("=")
            return Store(target, fld, self.name("variable"))
        self.expect("=")
        return self.rhs(target)

    def rhs(self, x: str):
        tok = self.tok
        if tok.kind == "int" or (self.at("-") and self.peek().kind == "int"):
            return ConstAssign(x, self.integer())
        if self.at("-"):
            self.i += 1
            return Neg(x, self.name("variable"))
        if self.at("new"):
            self.i += 1
            return New(x, self.name("class name"))
        if self.at("null"):
            self.i += 1
            return NullAssign(x)
        if self.at("static"):
            self.i += 1
            cls = self.name("class name")
            self.expect(".")
            return StaticLoad(x, cls, self.name("field name"))
        if self.at("call"):
            self.i += 1
            ref = self.name("method name")
            return StaticCall(x, ref, self.args())
        if self.at("vcall"):
            self.i += 1
            recv = self.name("variable")
            self.expect(".")
            meth = self.name("method name")
            return VirtualCall(x, recv, meth, self.args())
        if self.at("("):
            self.i += 1
            cls = self.name("class name")
            self.expect(")")
            return Cast(x, cls, self.name("variable"))
        y = self.name("variable or expression")
        if self.at("."):
            self.i += 1
            return Load(x, y, self.name("field name"))
        if self.tok.kind == "punct" and self.tok.value in "+-*":
            op = self.tok.value
            self.i += 1
            return BinOp(x, y, op, self.name("variable"))
        return Copy(x, y)


def _build_method(name, params, owner, lines: list[_Line], line) -> Method:
    labels = [ln.label for ln in lines]
    nodes = [CfgNode(ENTRY, Nop(), [labels[0] if labels else EXIT], synthetic=True)]
    for i, ln in enumerate(lines):
        fall = labels[i + 1] if i + 1 < len(labels) else EXIT
        s = ln.stmt
        if isinstance(s, Goto):
            succ = [s.label]
        elif isinstance(s, Return):
            succ = [EXIT]
        elif isinstance(s, Branch):
            succ = [fall, s.label]
        else:
            succ = [fall]
        nodes.append(CfgNode(ln.label, s, succ, line=ln.line))
    nodes.append(CfgNode(EXIT, Nop(), [], synthetic=True))
    return Method(name, params, nodes, owner=owner, line=line)


def parse_unchecked(text: str) -> Program:
    """Parse without semantic validation."""
    return _Parser(text).program()


def parse_program(text: str) -> Program:
    """Parse and validate; raises :class:`IRError` on the first error."""
    p = parse_unchecked(text)
    for d in validate(p):
        if d.severity == "error":
            raise IRError(f"{d.method + ': ' if d.method else ''}{d.message}", d.line)
    return p


def format_method(m: Method, indent: str = "") -> list[str]:
    if m.external:
        return [f"{indent}extern method {m.name}({', '.join(m.params)})"]
    out = [f"{indent}method {m.name}({', '.join(m.params)}) {{"]
    for n in m.nodes:
        if not n.synthetic:
            out.append(f"{indent}  {n.label}: {n.stmt}")
    out.append(f"{indent}}}")
    return out


def format_program(p: Program) -> str:
    """Canonical text; ``parse_program(format_program(p))`` rebuilds ``p``."""
    out: list[str] = []
    for c in p.classes:
        head = f"class {c.name}" + (f" extends {c.superclass}" if c.superclass else "")
        out.append(head + " {")
        out.extend(f"  field {f}" for f in c.fields)
        out.extend(f"  static field {f}" for f in c.static_fields)
        for m in c.methods:
            out.extend(format_method(m, "  "))
        out.append("}")
    for m in p.free_methods:
        out.extend(format_method(m))
    out.append(f"entry {p.entry}")
    return "\n".join(out) + "\n"
