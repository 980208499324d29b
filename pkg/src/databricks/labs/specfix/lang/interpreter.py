"""Fuel-bounded interpreter with three arithmetic modes.

`wrapped` reduces every intermediate result to its evaluation width, `checked` stops at
the first operation whose operands satisfy an overflow rule, and `mathematical` computes
over unbounded integers. An assignment evaluates at the widest of its target, the
variables it reads and its literals; a condition atom at the widest of its variables and
literals, or i64 when it reads no variable.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum

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
    Program,
    Return,
    Stmt,
    Var,
    While,
    binary_count,
    constants,
    variables,
)
from databricks.labs.specfix.lang.widths import IntWidth, WidthExhausted
from databricks.labs.specfix.overflow.rules import OverflowKind, RuleMode, check_op

logger = logging.getLogger(__name__)

DEFAULT_FUEL = 1_000_000


class Mode(str, Enum):
    WRAPPED = "wrapped"
    CHECKED = "checked"
    MATHEMATICAL = "mathematical"


class Status(str, Enum):
    HALTED = "halted"
    FUEL_EXHAUSTED = "fuel-exhausted"
    OVERFLOW_TRAP = "overflow-trap"
    RUNTIME_ERROR = "runtime-error"


class MissingInputError(ValueError):
    """An input variable has no value, or a value outside its declared width."""


@dataclass(frozen=True)
class Trap:
    sid: int
    # position of the failing operation in split order; equal to the operation count for a narrowing store
    sub: int
    kind: OverflowKind
    detail: str = ""


@dataclass(frozen=True)
class RunOutcome:
    status: Status
    store: Mapping[str, int]
    steps: int
    trap: Trap | None = None
    error: str | None = None
    error_sid: int | None = None
    iterations: Mapping[int, int] = field(default_factory=dict)

    @property
    def halted(self) -> bool:
        return self.status == Status.HALTED

    @property
    def trap_site(self) -> int | None:
        if self.trap is not None:
            return self.trap.sid
        return self.error_sid


class Tracer:
    """Observation hooks; subclasses may raise to stop a run early."""

    def loop_head(self, sid: int, store: Mapping[str, int], steps: int) -> None:
        pass

    def assigning(self, sid: int, store: Mapping[str, int]) -> None:
        pass

    def assigned(self, sid: int, target: str, value: int, store: Mapping[str, int]) -> None:
        pass


class StateRevisit(Exception):
    """A loop head saw the same state twice, so the run can never halt."""

    def __init__(self, sid: int, state: tuple, stem: int, cycle: int):
        super().__init__(f"loop {sid} revisited a state after {cycle} iterations")
        self.sid = sid
        self.state = state
        self.stem = stem
        self.cycle = cycle


class LassoTracer(Tracer):
    """Detects a repeated loop-head state, optionally restricted to one loop and some variables."""

    def __init__(self, loop_sid: int | None = None, project: tuple[str, ...] | None = None):
        self._loop_sid = loop_sid
        self._project = project
        self._seen: dict[tuple, int] = {}
        self._visits = 0

    def state(self, sid: int, store: Mapping[str, int]) -> tuple:
        if self._project is None:
            return (sid, *sorted(store.items()))
        return (sid, *(store.get(name) for name in self._project))

    @property
    def visits(self) -> int:
        return self._visits

    def reset(self) -> None:
        """Forgets every state seen so far, e.g. when the observed loop is entered again."""
        self._seen.clear()
        self._visits = 0

    def loop_head(self, sid: int, store: Mapping[str, int], steps: int) -> None:
        if self._loop_sid is not None and sid != self._loop_sid:
            return
        state = self.state(sid, store)
        first = self._seen.get(state)
        if first is not None:
            raise StateRevisit(sid, state, first, self._visits - first)
        self._seen[state] = self._visits
        self._visits += 1


class _OutOfFuel(Exception):
    pass


class _Halt(Exception):
    pass


class _Trapped(Exception):
    def __init__(self, trap: Trap):
        super().__init__(trap.detail)
        self.trap = trap


class _Crash(Exception):
    def __init__(self, message: str, sid: int):
        super().__init__(message)
        self.sid = sid


def trunc_div(x: int, y: int) -> int:
    """Integer division rounding toward zero."""
    q = abs(x) // abs(y)
    return -q if (x < 0) != (y < 0) else q


def apply_op(op: str, x: int, y: int) -> int:
    match op:
        case "+":
            return x + y
        case "-":
            return x - y
        case "*":
            return x * y
        case "/":
            return trunc_div(x, y)
    raise ValueError(f"unknown arithmetic operator: {op}")


def compare(op: str, x: int, y: int) -> bool:
    match op:
        case "<":
            return x < y
        case "<=":
            return x <= y
        case ">":
            return x > y
        case ">=":
            return x >= y
        case "==":
            return x == y
        case "!=":
            return x != y
    raise ValueError(f"unknown comparison: {op}")


def _literal_width(value: int) -> IntWidth:
    try:
        return IntWidth.smallest_fitting(value)
    except WidthExhausted:
        return IntWidth.I64


def evaluation_width(p: Program, node: Expr | Cond, target: IntWidth | None = None) -> IntWidth:
    names = variables(node)
    if target is None and not names:
        return IntWidth.I64
    widths = [p.width_of(name) for name in names]
    widths.extend(_literal_width(value) for value in constants(node))
    if target is not None:
        widths.append(target)
    return max(widths)


def assignment_width(p: Program, stmt: Assign) -> IntWidth:
    return evaluation_width(p, stmt.expr, p.width_of(stmt.target))


class _Machine:
    def __init__(self, p: Program, fuel: int, mode: Mode, tracer: Tracer | None, rule_mode: RuleMode):
        self._program = p
        self._rule_mode = rule_mode
        self._fuel = fuel
        self._mode = mode
        self._tracer = tracer or Tracer()
        self._widths = p.widths
        self._cache: dict[tuple[int, IntWidth | None], IntWidth] = {}
        self.store: dict[str, int] = {}
        self.steps = 0
        self.iterations: dict[int, int] = {}
        self._sub = 0

    def _tick(self):
        if self.steps >= self._fuel:
            raise _OutOfFuel()
        self.steps += 1

    def _width(self, node: Expr | Cond, target: IntWidth | None = None) -> IntWidth:
        key = (id(node), target)
        if key not in self._cache:
            self._cache[key] = evaluation_width(self._program, node, target)
        return self._cache[key]

    def execute(self, body: tuple[Stmt, ...]):
        for stmt in body:
            self._step(stmt)

    def _step(self, stmt: Stmt):
        match stmt:
            case Assign(target, expr):
                self._tick()
                self._tracer.assigning(stmt.sid, self.store)
                self._sub = 0
                target_width = self._widths[target]
                value = self._eval(expr, self._width(expr, target_width), stmt.sid)
                self.store[target] = self._narrow(value, target_width, stmt.sid, self._sub)
                self._tracer.assigned(stmt.sid, target, self.store[target], self.store)
            case While(cond, body):
                while True:
                    self._tick()
                    self._tracer.loop_head(stmt.sid, self.store, self.steps)
                    if not self._test(cond, stmt.sid):
                        break
                    self.iterations[stmt.sid] = self.iterations.get(stmt.sid, 0) + 1
                    self.execute(body)
            case If(cond, then, orelse):
                self._tick()
                if self._test(cond, stmt.sid):
                    self.execute(then)
                elif orelse is not None:
                    self.execute(orelse)
            case Return():
                self._tick()
                raise _Halt()

    def _narrow(self, value: int, width: IntWidth, sid: int, sub: int) -> int:
        if self._mode == Mode.MATHEMATICAL or width.fits(value):
            return value
        if self._mode == Mode.WRAPPED:
            return width.wrap(value)
        kind = OverflowKind.IO if value > width.intmax else OverflowKind.IU
        raise _Trapped(Trap(sid, sub, kind, f"{value} does not fit {width.keyword}"))

    def _test(self, cond: Cond, sid: int) -> bool:
        self._sub = 0
        return self._cond(cond, sid)

    def _cond(self, cond: Cond, sid: int) -> bool:
        match cond:
            case Compare(op, left, right):
                width = self._width(cond)
                return compare(op, self._eval(left, width, sid), self._eval(right, width, sid))
            case Not(inner):
                return not self._cond(inner, sid)
            case And(left, right):
                if self._cond(left, sid):
                    return self._cond(right, sid)
                self._sub += binary_count(right)
                return False
            case Or(left, right):
                if self._cond(left, sid):
                    self._sub += binary_count(right)
                    return True
                return self._cond(right, sid)
        raise TypeError(f"not a condition: {cond!r}")

    def _eval(self, e: Expr, width: IntWidth, sid: int) -> int:
        match e:
            case Const(value):
                return value
            case Var(name):
                if name not in self.store:
                    raise _Crash(f"read of uninitialized variable {name}", sid)
                return self.store[name]
            case Group(inner):
                return self._eval(inner, width, sid)
            case BinOp(op, left, right):
                x = self._eval(left, width, sid)
                y = self._eval(right, width, sid)
                sub = self._sub
                self._sub += 1
                return self._operate(op, x, y, width, sid, sub)
        raise TypeError(f"not an expression: {e!r}")

    def _operate(self, op: str, x: int, y: int, width: IntWidth, sid: int, sub: int) -> int:
        if op == "/" and y == 0:
            raise _Crash("division by zero", sid)
        if self._mode == Mode.CHECKED:
            if op == "/":
                kind = OverflowKind.IO if x == width.intmin and y == -1 else OverflowKind.NONE
            else:
                kind = check_op(op, x, y, width, self._rule_mode)
            if kind != OverflowKind.NONE:
                raise _Trapped(Trap(sid, sub, kind, f"{x} {op} {y} at {width.keyword}"))
        result = apply_op(op, x, y)
        if self._mode == Mode.WRAPPED:
            return width.wrap(result)
        return result


def run(
    p: Program,
    inputs: Mapping[str, int],
    fuel: int = DEFAULT_FUEL,
    mode: Mode = Mode.WRAPPED,
    tracer: Tracer | None = None,
    rule_mode: RuleMode = RuleMode.CORRECTED,
) -> RunOutcome:
    """Executes `p` on `inputs` until it halts, traps, fails or spends `fuel` steps.

    Every executed statement and every loop-condition test costs one step. In checked mode
    `rule_mode` picks the overflow rules deciding whether an operation traps.
    """
    if fuel < 1:
        raise ValueError("fuel must be at least 1")
    machine = _Machine(p, fuel, Mode(mode), tracer, RuleMode(rule_mode))
    widths = p.widths
    for name in p.inputs:
        if name not in inputs:
            raise MissingInputError(f"missing input variable: {name}")
        value = inputs[name]
        if mode != Mode.MATHEMATICAL and not widths[name].fits(value):
            raise MissingInputError(f"input {name}={value} is outside {widths[name].keyword}")
        machine.store[name] = value
    declared_inputs = set(p.inputs)
    for name in inputs:
        if name not in declared_inputs:
            raise MissingInputError(f"not an input variable: {name}")
    status, trap, error, error_sid = Status.HALTED, None, None, None
    try:
        machine.execute(p.body)
    except _Halt:
        pass
    except _OutOfFuel:
        status = Status.FUEL_EXHAUSTED
    except _Trapped as e:
        status, trap = Status.OVERFLOW_TRAP, e.trap
    except _Crash as e:
        status, error, error_sid = Status.RUNTIME_ERROR, str(e), e.sid
    return RunOutcome(status, dict(machine.store), machine.steps, trap, error, error_sid, dict(machine.iterations))


def halting_statements(p: Program) -> set[int]:
    """Every return statement plus the final top-level statement.

    The language has no procedures, so no statement can belong to a called function.
    """
    halting = {s.sid for s in p.statements() if isinstance(s, Return)}
    halting.add(p.body[-1].sid)
    return halting


def evaluate(e: Expr, valuation: Mapping[str, int]) -> int:
    """Value of `e` over unbounded integers."""
    match e:
        case Const(value):
            return value
        case Var(name):
            return valuation[name]
        case Group(inner):
            return evaluate(inner, valuation)
        case BinOp(op, left, right):
            x = evaluate(left, valuation)
            y = evaluate(right, valuation)
            if op == "/" and y == 0:
                raise ZeroDivisionError("division by zero")
            return apply_op(op, x, y)
    raise TypeError(f"not an expression: {e!r}")
