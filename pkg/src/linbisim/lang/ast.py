"""AST for the object modelling language."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

Loc = Tuple[int, int]


# -- expressions

@dataclass(frozen=True)
class Lit:
    value: Union[int, bool, str, None]   # str only for EMPTY; None is null
    loc: Loc


@dataclass(frozen=True)
class Name:
    name: str
    loc: Loc


@dataclass(frozen=True)
class Index:
    array: str
    index: "Expr"
    loc: Loc


@dataclass(frozen=True)
class Field:
    obj: "Expr"
    field: str          # "value" | "next"
    loc: Loc


@dataclass(frozen=True)
class Tid:
    loc: Loc


@dataclass(frozen=True)
class NThreads:
    loc: Loc


@dataclass(frozen=True)
class Unary:
    op: str             # "!" | "-"
    operand: "Expr"
    loc: Loc


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    loc: Loc


Expr = Union[Lit, Name, Index, Field, Tid, NThreads, Unary, Binary]
LValue = Union[Name, Index, Field]


# -- right-hand sides that are not plain expressions

@dataclass(frozen=True)
class Cas:
    target: LValue
    expected: Expr
    new: Expr
    loc: Loc


@dataclass(frozen=True)
class NewNode:
    value: Expr
    loc: Loc


Rhs = Union[Expr, Cas, NewNode]


# -- statements

@dataclass(frozen=True)
class Assign:
    target: LValue
    rhs: Rhs
    loc: Loc


@dataclass(frozen=True)
class LocalDecl:
    name: str
    rhs: Optional[Rhs]
    loc: Loc


@dataclass(frozen=True)
class If:
    cond: Expr
    then: Tuple["Stmt", ...]
    orelse: Tuple["Stmt", ...]
    loc: Loc


@dataclass(frozen=True)
class While:
    cond: Expr
    body: Tuple["Stmt", ...]
    loc: Loc


@dataclass(frozen=True)
class Atomic:
    body: Tuple["Stmt", ...]
    loc: Loc


@dataclass(frozen=True)
class Retire:
    node: Expr
    loc: Loc


@dataclass(frozen=True)
class Return:
    value: Optional[Expr]
    loc: Loc


@dataclass(frozen=True)
class Skip:
    loc: Loc


@dataclass(frozen=True)
class Break:
    loc: Loc


Stmt = Union[Assign, LocalDecl, If, While, Atomic, Retire, Return, Skip, Break]


# -- declarations

@dataclass(frozen=True)
class SharedDecl:
    name: str
    type: str                        # "int" | "bool" | "ref" | "ref[threads]"
    lo: Optional[int]
    hi: Optional[int]
    init: Optional[Lit]
    loc: Loc


@dataclass(frozen=True)
class Method:
    name: str
    param: Optional[str]
    body: Tuple[Stmt, ...]
    loc: Loc


@dataclass(frozen=True)
class Program:
    shared: Tuple[SharedDecl, ...]
    methods: Tuple[Method, ...]

    def method(self, name: str) -> Method:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)


def walk_stmts(stmts):
    """Yield every statement in ``stmts``, depth first."""
    for s in stmts:
        yield s
        if isinstance(s, If):
            yield from walk_stmts(s.then)
            yield from walk_stmts(s.orelse)
        elif isinstance(s, (While, Atomic)):
            yield from walk_stmts(s.body)
