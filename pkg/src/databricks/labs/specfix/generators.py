"""Seeded random programs and expressions for property tests.

Everything here is driven by an explicit `random.Random`, so a failing property can be
replayed from its seed. Trees are built with `make_binary`, which makes them print and
re-parse to themselves.
"""

from __future__ import annotations

import logging
import random
from collections.abc import Sequence
from dataclasses import dataclass

from databricks.labs.specfix.lang.ast import (
    COMPARISONS,
    And,
    Assign,
    Compare,
    Cond,
    Const,
    Decl,
    Expr,
    If,
    Not,
    Or,
    Program,
    Stmt,
    Var,
    While,
    make_binary,
)
from databricks.labs.specfix.lang.parser import renumber
from databricks.labs.specfix.lang.widths import IntWidth
from databricks.labs.specfix.overflow.intervals import Interval

logger = logging.getLogger(__name__)

RING = ("+", "-", "*")
NAMES = ("a", "b", "c", "d", "e", "f")


@dataclass(frozen=True)
class ProgramShape:
    inputs: int = 2
    locals: int = 2
    statements: int = 4
    depth: int = 3
    widths: tuple[IntWidth, ...] = (IntWidth.I8,)
    input_width: IntWidth = IntWidth.I8
    ops: tuple[str, ...] = RING
    loops: bool = False
    constants: tuple[int, int] = (-8, 8)


def random_expr(
    rng: random.Random,
    names: Sequence[str],
    depth: int = 4,
    ops: Sequence[str] = RING,
    constants: tuple[int, int] = (-4, 4),
) -> Expr:
    """A random expression of at most `depth` nested operators over `names` and small literals."""
    if depth <= 0 or rng.random() < 0.25:
        if names and rng.random() < 0.7:
            return Var(rng.choice(list(names)))
        return Const(rng.randint(*constants))
    op = rng.choice(list(ops))
    left = random_expr(rng, names, depth - 1, ops, constants)
    right = random_expr(rng, names, depth - 1, ops, constants)
    if op == "/" and (not isinstance(right, Const) or right.value == 0):
        right = Const(rng.choice([c for c in range(constants[0], constants[1] + 1) if c != 0] or [1]))
    return make_binary(op, left, right)


def random_expr_pair(
    rng: random.Random, variables: int = 3, depth: int = 4, ops: Sequence[str] = RING
) -> tuple[Expr, Expr]:
    """Two expressions over the same variables; about half the pairs are equivalent by construction."""
    names = NAMES[:variables]
    first = random_expr(rng, names, depth, ops)
    if rng.random() < 0.5:
        return first, random_expr(rng, names, depth, ops)
    # commuting the top-level operands keeps the value of + and *
    match first:
        case Const() | Var():
            return first, make_binary("+", Const(0), first)
    assert not isinstance(first, (Const, Var))
    if first.op in ("+", "*"):
        return first, make_binary(first.op, first.right, first.left)
    return first, make_binary("+", first, Const(0))


def random_cond(
    rng: random.Random, names: Sequence[str], depth: int = 1, constants: tuple[int, int] = (-8, 8)
) -> Cond:
    if depth <= 0 or rng.random() < 0.6:
        left = random_expr(rng, names, 1, RING, constants)
        right = random_expr(rng, names, 1, RING, constants)
        return Compare(rng.choice(COMPARISONS), left, right)
    kind = rng.choice(("and", "or", "not"))
    if kind == "not":
        return Not(random_cond(rng, names, depth - 1, constants))
    left = random_cond(rng, names, depth - 1, constants)
    right = random_cond(rng, names, depth - 1, constants)
    return And(left, right) if kind == "and" else Or(left, right)


def _counting_loop(
    rng: random.Random, counter: str, bound: int, defined: Sequence[str], locals_: Sequence[str], shape: ProgramShape
) -> list[Stmt]:
    body: list[Stmt] = []
    others = [n for n in defined if n != counter and n in locals_]
    if others and rng.random() < 0.5:
        target = rng.choice(others)
        body.append(Assign(target, random_expr(rng, defined, 1, shape.ops, shape.constants)))
    body.append(Assign(counter, make_binary("+", Var(counter), Const(1))))
    return [Assign(counter, Const(0)), While(Compare("<", Var(counter), Const(bound)), tuple(body))]


def random_program(rng: random.Random, shape: ProgramShape = ProgramShape()) -> Program:
    """A well-formed program: every variable is assigned before it is read and loops always count up to a bound."""
    inputs = list(NAMES[: shape.inputs])
    local_names = [f"t{i}" for i in range(shape.locals)]
    decls = [Decl(name, shape.input_width, True) for name in inputs]
    decls += [Decl(name, rng.choice(shape.widths)) for name in local_names]
    defined = list(inputs)
    body: list[Stmt] = []
    for _ in range(shape.statements):
        pending = [n for n in local_names if n not in defined]
        roll = rng.random()
        if pending and (roll < 0.6 or len(defined) == len(inputs)):
            target = pending[0]
            body.append(Assign(target, random_expr(rng, defined, shape.depth, shape.ops, shape.constants)))
            defined.append(target)
        elif shape.loops and pending and roll < 0.8:
            counter = pending[0]
            defined.append(counter)
            body.extend(_counting_loop(rng, counter, rng.randint(1, 4), defined, local_names, shape))
        else:
            assigned = [n for n in defined if n not in inputs] or defined
            then = (Assign(rng.choice(assigned), random_expr(rng, defined, shape.depth, shape.ops, shape.constants)),)
            orelse = None
            if rng.random() < 0.5:
                expr = random_expr(rng, defined, shape.depth, shape.ops, shape.constants)
                orelse = (Assign(rng.choice(assigned), expr),)
            body.append(If(random_cond(rng, defined, 1, shape.constants), then, orelse))
    program = renumber(Program(tuple(decls), tuple(body)))
    logger.debug(f"generated program with {len(body)} top-level statements")
    return program


def random_ranges(rng: random.Random, p: Program, span: int = 16) -> dict[str, Interval]:
    """A sub-range of at most `span` values inside the width of every input."""
    out = {}
    for decl in p.decls:
        if not decl.is_input:
            continue
        full = Interval.of(decl.width)
        lo = rng.randint(full.lo, full.hi)
        out[decl.name] = Interval(lo, min(full.hi, lo + rng.randint(0, span - 1)))
    return out
