"""Abstract syntax of the loop language.

Nodes are frozen dataclasses so programs can be shared between threads and used as
dictionary keys. Statement ids are not part of structural equality: two programs that
print the same compare equal even when their statements were numbered differently.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass, field
from typing import Union

from databricks.labs.specfix.lang.widths import IntWidth

ADDITIVE = ("+", "-")
MULTIPLICATIVE = ("*", "/")
ARITHMETIC = ADDITIVE + MULTIPLICATIVE
COMPARISONS = ("<", "<=", ">", ">=", "==", "!=")

# x < c  <=>  c > x
FLIPPED = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "==": "==", "!=": "!="}


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in ARITHMETIC:
            raise ValueError(f"unknown arithmetic operator: {self.op}")


@dataclass(frozen=True)
class Group:
    """Parentheses written in the source."""

    inner: Expr


Expr = Union[Const, Var, BinOp, Group]


@dataclass(frozen=True)
class Compare:
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in COMPARISONS:
            raise ValueError(f"unknown comparison: {self.op}")

    def flipped(self) -> Compare:
        return Compare(FLIPPED[self.op], self.right, self.left)


@dataclass(frozen=True)
class And:
    left: Cond
    right: Cond


@dataclass(frozen=True)
class Or:
    left: Cond
    right: Cond


@dataclass(frozen=True)
class Not:
    inner: Cond


Cond = Union[Compare, And, Or, Not]


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr
    sid: int = field(default=0, compare=False)


@dataclass(frozen=True)
class While:
    cond: Cond
    body: tuple[Stmt, ...]
    sid: int = field(default=0, compare=False)


@dataclass(frozen=True)
class If:
    cond: Cond
    then: tuple[Stmt, ...]
    orelse: tuple[Stmt, ...] | None = None
    sid: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Return:
    sid: int = field(default=0, compare=False)


Stmt = Union[Assign, While, If, Return]


@dataclass(frozen=True)
class Decl:
    name: str
    width: IntWidth
    is_input: bool = False


@dataclass(frozen=True)
class Program:
    decls: tuple[Decl, ...]
    body: tuple[Stmt, ...]

    @property
    def widths(self) -> dict[str, IntWidth]:
        return {d.name: d.width for d in self.decls}

    @property
    def inputs(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.decls if d.is_input)

    def width_of(self, name: str) -> IntWidth:
        for decl in self.decls:
            if decl.name == name:
                return decl.width
        raise KeyError(name)

    def statements(self) -> Iterator[Stmt]:
        """All statements in source pre-order."""
        yield from walk(self.body)

    def loops(self) -> list[While]:
        return [s for s in self.statements() if isinstance(s, While)]

    def find(self, sid: int) -> Stmt:
        for stmt in self.statements():
            if stmt.sid == sid:
                return stmt
        raise KeyError(f"no statement with id {sid}")

    def replace(self, sid: int, new: Stmt | None) -> Program:
        """Returns a copy with statement `sid` replaced, or removed when `new` is None."""
        return dataclasses.replace(self, body=_replace_in(self.body, sid, new))

    def retyped(self, widths: dict[str, IntWidth]) -> Program:
        decls = tuple(dataclasses.replace(d, width=widths.get(d.name, d.width)) for d in self.decls)
        return dataclasses.replace(self, decls=decls)


def walk(body: Iterable[Stmt]) -> Iterator[Stmt]:
    for stmt in body:
        yield stmt
        if isinstance(stmt, While):
            yield from walk(stmt.body)
        elif isinstance(stmt, If):
            yield from walk(stmt.then)
            if stmt.orelse is not None:
                yield from walk(stmt.orelse)


def _replace_in(body: tuple[Stmt, ...], sid: int, new: Stmt | None) -> tuple[Stmt, ...]:
    out: list[Stmt] = []
    for stmt in body:
        if stmt.sid == sid:
            if new is not None:
                out.append(new)
            continue
        if isinstance(stmt, While):
            stmt = dataclasses.replace(stmt, body=_replace_in(stmt.body, sid, new))
        elif isinstance(stmt, If):
            orelse = None if stmt.orelse is None else _replace_in(stmt.orelse, sid, new)
            stmt = dataclasses.replace(stmt, then=_replace_in(stmt.then, sid, new), orelse=orelse)
        out.append(stmt)
    return tuple(out)


def filter_body(body: tuple[Stmt, ...], keep: Callable[[Stmt], bool]) -> tuple[Stmt, ...]:
    """Drops statements rejected by `keep`; compound statements are filtered recursively."""
    out: list[Stmt] = []
    for stmt in body:
        if not keep(stmt):
            continue
        if isinstance(stmt, While):
            stmt = dataclasses.replace(stmt, body=filter_body(stmt.body, keep))
        elif isinstance(stmt, If):
            orelse = None if stmt.orelse is None else filter_body(stmt.orelse, keep)
            stmt = dataclasses.replace(stmt, then=filter_body(stmt.then, keep), orelse=orelse)
        out.append(stmt)
    return tuple(out)


def strip(e: Expr) -> Expr:
    """Removes grouping at the root."""
    while isinstance(e, Group):
        e = e.inner
    return e


def variables(node: Expr | Cond) -> set[str]:
    match node:
        case Var(name):
            return {name}
        case Const():
            return set()
        case Group(inner) | Not(inner):
            return variables(inner)
        case BinOp(_, left, right) | Compare(_, left, right) | And(left, right) | Or(left, right):
            return variables(left) | variables(right)
    raise TypeError(f"not an expression: {node!r}")


def constants(node: Expr | Cond) -> list[int]:
    match node:
        case Const(value):
            return [value]
        case Var():
            return []
        case Group(inner) | Not(inner):
            return constants(inner)
        case BinOp(_, left, right) | Compare(_, left, right) | And(left, right) | Or(left, right):
            return constants(left) + constants(right)
    raise TypeError(f"not an expression: {node!r}")


def atoms(cond: Cond) -> list[Compare]:
    match cond:
        case Compare():
            return [cond]
        case Not(inner):
            return atoms(inner)
        case And(left, right) | Or(left, right):
            return atoms(left) + atoms(right)
    raise TypeError(f"not a condition: {cond!r}")


def binary_count(node: Expr | Cond) -> int:
    match node:
        case Const() | Var():
            return 0
        case BinOp(_, left, right):
            return 1 + binary_count(left) + binary_count(right)
        case Group(inner) | Not(inner):
            return binary_count(inner)
        case Compare(_, left, right) | And(left, right) | Or(left, right):
            return binary_count(left) + binary_count(right)
    raise TypeError(f"not an expression: {node!r}")


def map_atoms(cond: Cond, fn: Callable[[Compare], Cond]) -> Cond:
    match cond:
        case Compare():
            return fn(cond)
        case Not(inner):
            return Not(map_atoms(inner, fn))
        case And(left, right):
            return And(map_atoms(left, fn), map_atoms(right, fn))
        case Or(left, right):
            return Or(map_atoms(left, fn), map_atoms(right, fn))
    raise TypeError(f"not a condition: {cond!r}")


def _precedence(op: str) -> int:
    return 2 if op in MULTIPLICATIVE else 1


def make_binary(op: str, left: Expr, right: Expr) -> BinOp:
    """Builds `left op right`, grouping operands so the tree prints and re-parses as built."""
    if isinstance(left, BinOp) and _precedence(left.op) < _precedence(op):
        left = Group(left)
    if isinstance(right, BinOp) and _precedence(right.op) <= _precedence(op):
        right = Group(right)
    if isinstance(right, Const) and right.value < 0 and op in ADDITIVE:
        # a - -1 is legal but a - (-1) reads better and round-trips the same way
        right = Group(right)
    return BinOp(op, left, right)


def substitute(e: Expr, names: dict[str, Expr]) -> Expr:
    match e:
        case Var(name) if name in names:
            return names[name]
        case Const() | Var():
            return e
        case Group(inner):
            return Group(substitute(inner, names))
        case BinOp(op, left, right):
            return BinOp(op, substitute(left, names), substitute(right, names))
    raise TypeError(f"not an expression: {e!r}")
