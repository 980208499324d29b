from __future__ import annotations

from dataclasses import dataclass

from databricks.labs.specfix.lang.ast import (
    And,
    Assign,
    BinOp,
    Compare,
    Cond,
    Const,
    Expr,
    Group,
    If,
    Not,
    Or,
    Stmt,
    Var,
    While,
)
from databricks.labs.specfix.lang.printer import print_expr


@dataclass(frozen=True)
class SubExpression:
    """One binary operation of an expression, in evaluation order.

    `named` refers to earlier results through their temporary names, `original` is the
    same operation written over the source operands.
    """

    index: int
    name: str
    named: BinOp
    original: BinOp

    @property
    def op(self) -> str:
        return self.named.op

    def __str__(self) -> str:
        return print_expr(self.original)


class _Splitter:
    def __init__(self):
        self.out: list[SubExpression] = []

    def visit(self, e: Expr) -> Expr:
        match e:
            case Const() | Var():
                return e
            case Group(inner):
                return self.visit(inner)
            case BinOp(op, left, right):
                named = BinOp(op, self.visit(left), self.visit(right))
                name = f"_t{len(self.out) + 1}"
                self.out.append(SubExpression(len(self.out), name, named, e))
                return Var(name)
        raise TypeError(f"not an expression: {e!r}")

    def visit_cond(self, c: Cond):
        match c:
            case Compare(_, left, right):
                self.visit(left)
                self.visit(right)
            case Not(inner):
                self.visit_cond(inner)
            case And(left, right) | Or(left, right):
                self.visit_cond(left)
                self.visit_cond(right)


def split(e: Expr) -> list[SubExpression]:
    """Lists every binary sub-expression of `e`, innermost and leftmost first; `e` itself is last."""
    splitter = _Splitter()
    splitter.visit(e)
    return splitter.out


def split_cond(c: Cond) -> list[SubExpression]:
    splitter = _Splitter()
    splitter.visit_cond(c)
    return splitter.out


def split_stmt(stmt: Stmt) -> list[SubExpression]:
    match stmt:
        case Assign(_, expr):
            return split(expr)
        case While(cond) | If(cond):
            return split_cond(cond)
    return []
