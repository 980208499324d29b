from __future__ import annotations

import dataclasses
import logging
from functools import cache

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken, VisitError

from databricks.labs.specfix.lang.ast import (
    And,
    Assign,
    BinOp,
    Compare,
    Cond,
    Const,
    Decl,
    Expr,
    Group,
    If,
    Not,
    Or,
    Program,
    Return,
    Stmt,
    Var,
    While,
)
from databricks.labs.specfix.lang.widths import IntWidth

logger = logging.getLogger(__name__)

GRAMMAR = r"""
program: decl* stmt*

decl: "input" width NAME ("," NAME)* ";"   -> input_decl
    | width NAME ("," NAME)* ";"           -> local_decl

width: "i8"   -> i8
     | "i16"  -> i16
     | "i32"  -> i32
     | "i64"  -> i64

?stmt: NAME "=" expr ";"                      -> assign
     | "while" "(" cond ")" body              -> while_stmt
     | "if" "(" cond ")" body ["else" body]   -> if_stmt
     | "return" ";"                           -> return_stmt

body: "{" stmt* "}"
    | stmt

?cond: or_cond
?or_cond: and_cond
        | or_cond "||" and_cond   -> or_
?and_cond: not_cond
         | and_cond "&&" not_cond -> and_
?not_cond: "!" not_cond           -> not_
         | cond_atom
?cond_atom: expr CMP expr         -> compare
          | "(" cond ")"

?expr: term
     | expr "+" term    -> add
     | expr "-" term    -> sub
?term: factor
     | term "*" factor  -> mul
     | term "/" factor  -> div
?factor: INT            -> const
       | "-" INT        -> neg_const
       | NAME           -> var
       | "(" expr ")"   -> group

CMP: "<=" | ">=" | "==" | "!=" | "<" | ">"
NAME: /[a-zA-Z][a-zA-Z0-9_]*/
COMMENT: /\/\/[^\n]*/

%import common.INT
%import common.WS
%ignore WS
%ignore COMMENT
"""


class ParseError(ValueError):
    """Syntax error with the 1-based position and the tokens the parser would have accepted."""

    def __init__(self, message: str, line: int = 0, column: int = 0, expected: frozenset[str] = frozenset()):
        self.line = line
        self.column = column
        self.expected = expected
        where = f" at line {line}, column {column}" if line > 0 else ""
        hint = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{message}{where}{hint}")


class ResolutionError(ValueError):
    """Undeclared or duplicate identifiers, or a program without statements."""


@cache
def _parser() -> Lark:
    # LALR tables are built once per process
    return Lark(GRAMMAR, parser="lalr", start=["program", "expr", "cond"], propagate_positions=True)


class _ToAst(Transformer):
    def __init__(self):
        super().__init__()
        self.uses: list[Token] = []

    def i8(self, _):
        return IntWidth.I8

    def i16(self, _):
        return IntWidth.I16

    def i32(self, _):
        return IntWidth.I32

    def i64(self, _):
        return IntWidth.I64

    def input_decl(self, children):
        width, *names = children
        return [(Decl(str(name), width, True), name) for name in names]

    def local_decl(self, children):
        width, *names = children
        return [(Decl(str(name), width, False), name) for name in names]

    @v_args(inline=True)
    def const(self, token):
        return Const(int(token))

    @v_args(inline=True)
    def neg_const(self, token):
        return Const(-int(token))

    @v_args(inline=True)
    def var(self, token):
        self.uses.append(token)
        return Var(str(token))

    @v_args(inline=True)
    def group(self, inner):
        return Group(inner)

    @v_args(inline=True)
    def add(self, left, right):
        return BinOp("+", left, right)

    @v_args(inline=True)
    def sub(self, left, right):
        return BinOp("-", left, right)

    @v_args(inline=True)
    def mul(self, left, right):
        return BinOp("*", left, right)

    @v_args(inline=True)
    def div(self, left, right):
        return BinOp("/", left, right)

    @v_args(inline=True)
    def compare(self, left, op, right):
        return Compare(str(op), left, right)

    @v_args(inline=True)
    def and_(self, left, right):
        return And(left, right)

    @v_args(inline=True)
    def or_(self, left, right):
        return Or(left, right)

    @v_args(inline=True)
    def not_(self, inner):
        return Not(inner)

    def body(self, children):
        return tuple(children)

    @v_args(inline=True)
    def assign(self, target, expr):
        self.uses.append(target)
        return Assign(str(target), expr)

    @v_args(inline=True)
    def while_stmt(self, cond, body):
        return While(cond, body)

    @v_args(inline=True)
    def if_stmt(self, cond, then, orelse):
        return If(cond, then, orelse)

    def return_stmt(self, _):
        return Return()

    def program(self, children):
        declared: dict[str, Decl] = {}
        stmts: list[Stmt] = []
        for child in children:
            if not isinstance(child, list):
                stmts.append(child)
                continue
            for decl, token in child:
                if decl.name in declared:
                    raise ResolutionError(f"duplicate declaration: {decl.name} at line {token.line}")
                declared[decl.name] = decl
        if not stmts:
            raise ResolutionError("empty program")
        for token in self.uses:
            if str(token) not in declared:
                raise ResolutionError(f"undeclared variable: {token} at line {token.line}, column {token.column}")
        body, _ = _number(tuple(stmts), 1)
        return Program(tuple(declared.values()), body)


def _number(body: tuple[Stmt, ...], next_id: int) -> tuple[tuple[Stmt, ...], int]:
    """Assigns statement ids in source pre-order, starting at `next_id`."""
    out = []
    for stmt in body:
        sid = next_id
        next_id += 1
        match stmt:
            case While():
                inner, next_id = _number(stmt.body, next_id)
                stmt = dataclasses.replace(stmt, body=inner, sid=sid)
            case If():
                then, next_id = _number(stmt.then, next_id)
                orelse = None
                if stmt.orelse is not None:
                    orelse, next_id = _number(stmt.orelse, next_id)
                stmt = dataclasses.replace(stmt, then=then, orelse=orelse, sid=sid)
            case _:
                stmt = dataclasses.replace(stmt, sid=sid)
        out.append(stmt)
    return tuple(out), next_id


def renumber(p: Program) -> Program:
    """Re-assigns statement ids as if `p` had just been parsed."""
    body, _ = _number(p.body, 1)
    return dataclasses.replace(p, body=body)


def _parse(source: str, start: str):
    try:
        tree = _parser().parse(source, start=start)
        return _ToAst().transform(tree)
    except VisitError as e:
        if isinstance(e.orig_exc, ValueError):
            raise e.orig_exc from None
        raise
    except UnexpectedEOF as e:
        raise ParseError("unexpected end of input", 0, 0, frozenset(e.expected)) from None
    except UnexpectedToken as e:
        raise ParseError(f"unexpected token {e.token!r}", e.line, e.column, frozenset(e.accepts or e.expected)) from None
    except UnexpectedCharacters as e:
        raise ParseError(f"unexpected character {e.char!r}", e.line, e.column, frozenset(e.allowed or ())) from None
    except UnexpectedInput as e:
        raise ParseError("syntax error", e.line, e.column) from None


def parse(source: str) -> Program:
    """Parses a whole program, resolving every identifier against its declarations."""
    program = _parse(source, "program")
    logger.debug(f"parsed program with {len(program.decls)} declarations and {len(program.body)} statements")
    return program


def parse_expr(source: str) -> Expr:
    return _parse(source, "expr")


def parse_cond(source: str) -> Cond:
    return _parse(source, "cond")
