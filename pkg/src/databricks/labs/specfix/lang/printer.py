from __future__ import annotations

from databricks.labs.specfix.lang.ast import (
    MULTIPLICATIVE,
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
    Program,
    Return,
    Stmt,
    Var,
    While,
)

INDENT = "    "


def _binds(op: str) -> int:
    return 2 if op in MULTIPLICATIVE else 1


def print_expr(e: Expr) -> str:
    match e:
        case Const(value):
            return str(value)
        case Var(name):
            return name
        case Group(inner):
            return f"({print_expr(inner)})"
        case BinOp(op, left, right):
            lhs = print_expr(left)
            rhs = print_expr(right)
            # trees built without make_binary still print with their meaning intact
            if isinstance(left, BinOp) and _binds(left.op) < _binds(op):
                lhs = f"({lhs})"
            if isinstance(right, BinOp) and _binds(right.op) <= _binds(op):
                rhs = f"({rhs})"
            return f"{lhs} {op} {rhs}"
    raise TypeError(f"not an expression: {e!r}")


def print_cond(c: Cond) -> str:
    match c:
        case Compare(op, left, right):
            return f"{print_expr(left)} {op} {print_expr(right)}"
        case Not(inner):
            return f"!({print_cond(inner)})"
        case And(left, right):
            return f"{_operand(left, Or)} && {_operand(right, (Or, And))}"
        case Or(left, right):
            return f"{print_cond(left)} || {_operand(right, Or)}"
    raise TypeError(f"not a condition: {c!r}")


def _operand(c: Cond, loose) -> str:
    text = print_cond(c)
    return f"({text})" if isinstance(c, loose) else text


def _block(body: tuple[Stmt, ...], depth: int) -> list[str]:
    lines = []
    for stmt in body:
        lines.extend(_stmt(stmt, depth))
    return lines


def _stmt(stmt: Stmt, depth: int) -> list[str]:
    pad = INDENT * depth
    match stmt:
        case Assign(target, expr):
            return [f"{pad}{target} = {print_expr(expr)};"]
        case Return():
            return [f"{pad}return;"]
        case While(cond, body):
            return [f"{pad}while ({print_cond(cond)}) {{", *_block(body, depth + 1), f"{pad}}}"]
        case If(cond, then, orelse):
            lines = [f"{pad}if ({print_cond(cond)}) {{", *_block(then, depth + 1)]
            if orelse is None:
                return [*lines, f"{pad}}}"]
            return [*lines, f"{pad}}} else {{", *_block(orelse, depth + 1), f"{pad}}}"]
    raise TypeError(f"not a statement: {stmt!r}")


def print_stmt(stmt: Stmt) -> str:
    return "\n".join(_stmt(stmt, 0))


def pretty_print(p: Program) -> str:
    """Canonical source text: one declaration per line, four-space indents, braces on every block."""
    lines = []
    for decl in p.decls:
        prefix = "input " if decl.is_input else ""
        lines.append(f"{prefix}{decl.width.keyword} {decl.name};")
    lines.extend(_block(p.body, 0))
    return "\n".join(lines) + "\n"
