"""Static checks on parsed programs."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List

from .ast import (Assign, Atomic, Binary, Break, Cas, Field, If, Index, Lit, LocalDecl, Loc,
                  Name, NewNode, NThreads, Program, Retire, Return, Skip, Tid, Unary, While)
from .parser import parse


@dataclass(frozen=True)
class Issue:
    rule: str
    message: str
    loc: Loc

    def __str__(self):
        return f"{self.loc[0]}:{self.loc[1]}: [{self.rule}] {self.message}"


class ModelValidationError(ValueError):
    def __init__(self, issues: List[Issue]):
        super().__init__("\n".join(str(i) for i in issues))
        self.issues = issues


_METHOD_NAME = re.compile(r"^[a-z_][a-z0-9_]*$")


def declared_locals(method):
    names = [method.param] if method.param else []
    for s in _walk(method.body):
        if isinstance(s, LocalDecl) and s.name not in names:
            names.append(s.name)
    return names


def _walk(stmts):
    for s in stmts:
        yield s
        if isinstance(s, If):
            yield from _walk(s.then)
            yield from _walk(s.orelse)
        elif isinstance(s, (While, Atomic)):
            yield from _walk(s.body)


class _Checker:
    def __init__(self, program: Program):
        self.p = program
        self.issues: List[Issue] = []
        self.shared = {}

    def add(self, rule, message, loc):
        self.issues.append(Issue(rule, message, loc))

    def run(self):
        for d in self.p.shared:
            if d.name in self.shared:
                self.add("duplicate-shared", f"shared variable {d.name!r} declared twice", d.loc)
            self.shared[d.name] = d
            self.check_init(d)
        seen = set()
        for m in self.p.methods:
            if m.name in seen:
                self.add("duplicate-method", f"method {m.name!r} defined twice", m.loc)
            seen.add(m.name)
            if not _METHOD_NAME.match(m.name):
                self.add("method-name", f"method name {m.name!r} must be lower-case", m.loc)
            self.locals = set(declared_locals(m))
            for name in sorted(self.locals & set(self.shared)):
                self.add("shadowing", f"local {name!r} shadows a shared variable", m.loc)
            self.stmts(m.body, in_loop=False, in_atomic=False)
        return self.issues

    def check_init(self, d):
        if d.type == "int":
            if d.lo > d.hi:
                self.add("range", f"empty range {d.lo}..{d.hi} for {d.name!r}", d.loc)
            if d.init is not None:
                v = d.init.value
                if not isinstance(v, int) or isinstance(v, bool):
                    self.add("init-type", f"{d.name!r} needs an integer initializer", d.loc)
                elif not d.lo <= v <= d.hi:
                    self.add("literal-range", f"initializer {v} outside {d.lo}..{d.hi}", d.loc)
        elif d.type == "bool":
            if d.init is not None and not isinstance(d.init.value, bool):
                self.add("init-type", f"{d.name!r} needs a boolean initializer", d.loc)
        elif d.init is not None and d.init.value is not None:
            self.add("init-type", f"references can only be initialized to null", d.loc)

    def stmts(self, stmts, in_loop, in_atomic):
        for s in stmts:
            self.stmt(s, in_loop, in_atomic)

    def stmt(self, s, in_loop, in_atomic):
        if isinstance(s, Assign):
            self.lvalue(s.target)
            self.rhs(s.rhs)
            self.literal_into(s.target, s.rhs)
        elif isinstance(s, LocalDecl):
            if s.rhs is not None:
                self.rhs(s.rhs)
        elif isinstance(s, If):
            self.expr(s.cond)
            self.stmts(s.then, in_loop, in_atomic)
            self.stmts(s.orelse, in_loop, in_atomic)
        elif isinstance(s, While):
            if in_atomic:
                self.add("loop-in-atomic", "atomic blocks must be loop-free", s.loc)
            self.expr(s.cond)
            self.stmts(s.body, True, in_atomic)
        elif isinstance(s, Atomic):
            if in_atomic:
                self.add("nested-atomic", "atomic blocks cannot be nested", s.loc)
            self.stmts(s.body, False, True)
        elif isinstance(s, Retire):
            self.expr(s.node)
        elif isinstance(s, Return):
            if in_atomic:
                self.add("return-in-atomic", "return is not allowed inside atomic", s.loc)
            if s.value is not None:
                self.expr(s.value)
        elif isinstance(s, Break):
            if in_atomic:
                self.add("break-in-atomic", "break is not allowed inside atomic", s.loc)
            elif not in_loop:
                self.add("break-outside-loop", "break outside of a loop", s.loc)
        elif not isinstance(s, Skip):
            self.add("unknown-construct", f"unsupported statement {type(s).__name__}", s.loc)

    def literal_into(self, target, rhs):
        if isinstance(target, Name) and isinstance(rhs, Lit) and target.name in self.shared:
            d = self.shared[target.name]
            v = rhs.value
            if d.type == "int" and isinstance(v, int) and not isinstance(v, bool) \
                    and not d.lo <= v <= d.hi:
                self.add("literal-range", f"literal {v} outside {d.lo}..{d.hi} of {d.name!r}",
                         rhs.loc)

    def lvalue(self, e):
        if isinstance(e, Name):
            self.name(e)
        else:
            self.expr(e)

    def rhs(self, r):
        if isinstance(r, Cas):
            self.lvalue(r.target)
            self.expr(r.expected)
            self.expr(r.new)
        elif isinstance(r, NewNode):
            self.expr(r.value)
        else:
            self.expr(r)

    def name(self, e: Name):
        if e.name in self.locals:
            return
        d = self.shared.get(e.name)
        if d is None:
            self.add("undeclared", f"undeclared identifier {e.name!r}", e.loc)
        elif d.type == "ref[threads]":
            self.add("array-misuse", f"array {e.name!r} must be indexed", e.loc)

    def expr(self, e):
        if isinstance(e, Name):
            self.name(e)
        elif isinstance(e, Index):
            d = self.shared.get(e.array)
            if d is None:
                self.add("undeclared", f"undeclared array {e.array!r}", e.loc)
            elif d.type != "ref[threads]":
                self.add("array-misuse", f"{e.array!r} is not an array", e.loc)
            self.expr(e.index)
        elif isinstance(e, Field):
            self.expr(e.obj)
        elif isinstance(e, Unary):
            self.expr(e.operand)
        elif isinstance(e, Binary):
            self.expr(e.left)
            self.expr(e.right)
        elif not isinstance(e, (Lit, Tid, NThreads)):
            self.add("unknown-construct", f"unsupported expression {type(e).__name__}",
                     getattr(e, "loc", (0, 0)))


def validate(program: Program) -> List[Issue]:
    """Return every rule violation in ``program``; an empty list means ok."""
    return _Checker(program).run()


def load_program(source: str) -> Program:
    """Parse and validate; raises on syntax errors or rule violations."""
    program = parse(source)
    issues = validate(program)
    if issues:
        raise ModelValidationError(issues)
    return program
