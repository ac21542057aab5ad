"""Tokenizer and recursive-descent parser for object models.

The concrete syntax::

    shared Top : ref = null
    shared HP : ref[threads]
    shared c : int[-8..8] = 0

    method push(v) {
        local done := false
        local x := new_node(v)
        while !done {
            local old := Top
            x.next := old
            done := cas(Top, old, x)
        }
        return
    }

Statements may be separated by newlines or ``;``. ``//`` and ``#`` start
comments. ``return`` takes a value only when it sits on the same line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional

from .ast import (Assign, Atomic, Binary, Break, Cas, Field, If, Index, Lit, LocalDecl,
                  Method, Name, NewNode, NThreads, Program, Retire, Return, SharedDecl,
                  Skip, Tid, Unary, While)


class ModelSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{message}")
        self.line = line
        self.col = col


KEYWORDS = {
    "shared", "int", "bool", "ref", "threads", "method", "local", "if", "else",
    "while", "atomic", "cas", "new_node", "retire", "return", "skip", "break",
    "null", "tid", "nthreads", "EMPTY", "true", "false",
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>(//|\#)[^\n]*)
  | (?P<num>[0-9]+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|\.\.|==|!=|<=|>=|&&|\|\||[-+<>!(){}\[\],;:.=])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str      # "num" | "id" | "kw" | "op" | "eof"
    text: str
    line: int
    col: int


def tokenize(source: str) -> List[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            raise ModelSyntaxError(f"unexpected character {source[pos]!r}",
                                   line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "id":
            tokens.append(Token("kw" if text in KEYWORDS else "id", text, line, col))
        elif kind in ("num", "op"):
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


_CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
_EXPR_START_KW = {"null", "tid", "nthreads", "EMPTY", "true", "false"}


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.toks = tokens
        self.i = 0

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "op") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def expect_id(self) -> Token:
        if self.tok.kind != "id":
            self.error("expected identifier")
        return self.advance()

    def error(self, message: str):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ModelSyntaxError(f"{message}, found {found}", t.line, t.col)

    def loc(self):
        return (self.tok.line, self.tok.col)

    def skip_semis(self):
        while self.at(";"):
            self.advance()

    # -- program structure

    def program(self) -> Program:
        shared, methods = [], []
        self.skip_semis()
        while self.at("shared"):
            shared.append(self.shared_decl())
            self.skip_semis()
        while self.at("method"):
            methods.append(self.method())
            self.skip_semis()
        if self.tok.kind != "eof":
            if self.at("shared"):
                self.error("shared declarations must precede methods")
            self.error("expected 'method'")
        if not methods:
            raise ModelSyntaxError("no method declared", self.tok.line, self.tok.col)
        return Program(tuple(shared), tuple(methods))

    def shared_decl(self) -> SharedDecl:
        loc = self.loc()
        self.expect("shared")
        name = self.expect_id().text
        self.expect(":")
        lo = hi = None
        if self.at("int"):
            self.advance()
            self.expect("[")
            lo = self.signed_num()
            self.expect("..")
            hi = self.signed_num()
            self.expect("]")
            typ = "int"
        elif self.at("bool"):
            self.advance()
            typ = "bool"
        elif self.at("ref"):
            self.advance()
            typ = "ref"
            if self.at("["):
                self.advance()
                self.expect("threads")
                self.expect("]")
                typ = "ref[threads]"
        else:
            self.error("expected a type (int[lo..hi], bool, ref, ref[threads])")
        init = None
        if self.at("="):
            self.advance()
            init = self.literal()
        return SharedDecl(name, typ, lo, hi, init, loc)

    def signed_num(self) -> int:
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        if self.tok.kind != "num":
            self.error("expected integer")
        v = int(self.advance().text)
        return -v if neg else v

    def literal(self) -> Lit:
        loc = self.loc()
        if self.tok.kind == "num" or self.at("-"):
            return Lit(self.signed_num(), loc)
        for kw, val in (("null", None), ("true", True), ("false", False), ("EMPTY", "EMPTY")):
            if self.at(kw):
                self.advance()
                return Lit(val, loc)
        self.error("expected literal")

    def method(self) -> Method:
        loc = self.loc()
        self.expect("method")
        name = self.expect_id().text
        self.expect("(")
        param = None
        if self.tok.kind == "id":
            param = self.advance().text
        self.expect(")")
        return Method(name, param, self.block(), loc)

    def block(self):
        self.expect("{")
        stmts = []
        self.skip_semis()
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            stmts.append(self.stmt())
            self.skip_semis()
        self.advance()
        return tuple(stmts)

    # -- statements

    def stmt(self):
        loc = self.loc()
        t = self.tok
        if self.at("local"):
            self.advance()
            name = self.expect_id().text
            rhs = None
            if self.at(":="):
                self.advance()
                rhs = self.rhs()
            return LocalDecl(name, rhs, loc)
        if self.at("if"):
            return self.if_stmt()
        if self.at("while"):
            self.advance()
            cond = self.expr()
            return While(cond, self.block(), loc)
        if self.at("atomic"):
            self.advance()
            return Atomic(self.block(), loc)
        if self.at("retire"):
            self.advance()
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return Retire(e, loc)
        if self.at("return"):
            ret = self.advance()
            value = None
            if self.tok.line == ret.line and self.starts_expr():
                value = self.expr()
            return Return(value, loc)
        if self.at("skip"):
            self.advance()
            return Skip(loc)
        if self.at("break"):
            self.advance()
            return Break(loc)
        if t.kind == "id":
            target = self.postfix()
            if not isinstance(target, (Name, Index, Field)):
                self.error("expected assignable location")
            if not self.at(":="):
                self.error("expected ':='")
            self.advance()
            return Assign(target, self.rhs(), loc)
        self.error("unknown construct")

    def if_stmt(self):
        loc = self.loc()
        self.expect("if")
        cond = self.expr()
        then = self.block()
        orelse = ()
        if self.at("else"):
            self.advance()
            orelse = (self.if_stmt(),) if self.at("if") else self.block()
        return If(cond, then, orelse, loc)

    def starts_expr(self) -> bool:
        t = self.tok
        if t.kind in ("num", "id"):
            return True
        if t.kind == "kw":
            return t.text in _EXPR_START_KW
        return t.kind == "op" and t.text in ("(", "!", "-")

    def rhs(self):
        loc = self.loc()
        if self.at("cas"):
            self.advance()
            self.expect("(")
            target = self.postfix()
            if not isinstance(target, (Name, Index, Field)):
                self.error("cas needs an assignable location")
            self.expect(",")
            expected = self.expr()
            self.expect(",")
            new = self.expr()
            self.expect(")")
            return Cas(target, expected, new, loc)
        if self.at("new_node"):
            self.advance()
            self.expect("(")
            v = self.expr()
            self.expect(")")
            return NewNode(v, loc)
        return self.expr()

    # -- expressions

    def expr(self):
        return self.or_expr()

    def or_expr(self):
        left = self.and_expr()
        while self.at("||"):
            loc = self.loc()
            self.advance()
            left = Binary("||", left, self.and_expr(), loc)
        return left

    def and_expr(self):
        left = self.cmp_expr()
        while self.at("&&"):
            loc = self.loc()
            self.advance()
            left = Binary("&&", left, self.cmp_expr(), loc)
        return left

    def cmp_expr(self):
        left = self.add_expr()
        if self.tok.kind == "op" and self.tok.text in _CMP_OPS:
            loc = self.loc()
            op = self.advance().text
            left = Binary(op, left, self.add_expr(), loc)
        return left

    def add_expr(self):
        left = self.unary()
        while self.at("+") or self.at("-"):
            loc = self.loc()
            op = self.advance().text
            left = Binary(op, left, self.unary(), loc)
        return left

    def unary(self):
        if self.at("!") or self.at("-"):
            loc = self.loc()
            op = self.advance().text
            operand = self.unary()
            if op == "-" and isinstance(operand, Lit) and isinstance(operand.value, int) \
                    and not isinstance(operand.value, bool):
                return Lit(-operand.value, loc)
            return Unary(op, operand, loc)
        return self.postfix()

    def postfix(self):
        e = self.primary()
        while True:
            if self.at("."):
                loc = self.loc()
                self.advance()
                if self.tok.kind != "id" or self.tok.text not in ("value", "next"):
                    self.error("expected field 'value' or 'next'")
                e = Field(e, self.advance().text, loc)
            elif self.at("[") and isinstance(e, Name):
                self.advance()
                idx = self.expr()
                self.expect("]")
                e = Index(e.name, idx, e.loc)
            else:
                return e

    def primary(self):
        loc = self.loc()
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Lit(int(t.text), loc)
        if t.kind == "id":
            self.advance()
            return Name(t.text, loc)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if self.at("tid"):
            self.advance()
            return Tid(loc)
        if self.at("nthreads"):
            self.advance()
            return NThreads(loc)
        if t.kind == "kw" and t.text in ("null", "true", "false", "EMPTY"):
            return self.literal()
        self.error("expected expression")


def parse(source: str) -> Program:
    """Parse model source into a :class:`Program` (syntax only, see ``validate``)."""
    return _Parser(tokenize(source)).program()
