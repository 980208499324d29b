from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from databricks.labs.specfix.lang.ast import (
    FLIPPED,
    And,
    Assign,
    BinOp,
    Compare,
    Cond,
    Const,
    Expr,
    Not,
    Or,
    Program,
    Var,
    While,
    strip,
    walk,
)
from databricks.labs.specfix.lang.domain import input_domain
from databricks.labs.specfix.lang.interpreter import Mode, StateRevisit, Tracer, run
from databricks.labs.specfix.lang.printer import print_cond, print_expr
from databricks.labs.specfix.overflow.intervals import Interval

logger = logging.getLogger(__name__)

PROBE_FUEL = 10_000
MAX_TRACE = 64

NEGATED = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}


class Monotonicity(str, Enum):
    REGULAR_ARITHMETIC = "regular-arithmetic"
    REGULAR_GEOMETRIC = "regular-geometric"
    IRREGULAR_MONOTONIC = "irregular-monotonic"
    NON_MONOTONIC = "non-monotonic"
    INSUFFICIENT_DATA = "insufficient-data"

    @property
    def monotonic(self) -> bool:
        return self in (
            Monotonicity.REGULAR_ARITHMETIC,
            Monotonicity.REGULAR_GEOMETRIC,
            Monotonicity.IRREGULAR_MONOTONIC,
        )


class Direction(str, Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"

    @property
    def opposite(self) -> Direction:
        return Direction.DECREASING if self == Direction.INCREASING else Direction.INCREASING


@dataclass(frozen=True)
class MonotonicityTrace:
    sid: int
    sequences: tuple[tuple[int, ...], ...]
    classification: Monotonicity
    direction: Direction | None = None
    static: bool = False

    def __str__(self) -> str:
        direction = "" if self.direction is None else f" {self.direction.value}"
        how = " (static)" if self.static else ""
        return f"stmt {self.sid}: {self.classification.value}{direction}{how}"


def classify_sequence(values: Sequence[int]) -> tuple[Monotonicity, Direction | None]:
    """Classifies one value sequence: strictly monotone, and regular when it is an arithmetic or geometric progression."""
    if len(values) < 2:
        return Monotonicity.INSUFFICIENT_DATA, None
    steps = [b - a for a, b in zip(values, values[1:])]
    if all(step > 0 for step in steps):
        direction = Direction.INCREASING
    elif all(step < 0 for step in steps):
        direction = Direction.DECREASING
    else:
        return Monotonicity.NON_MONOTONIC, None
    if len(set(steps)) == 1:
        return Monotonicity.REGULAR_ARITHMETIC, direction
    if 0 not in values:
        ratios = {Fraction(b, a) for a, b in zip(values, values[1:])}
        if len(ratios) == 1:
            return Monotonicity.REGULAR_GEOMETRIC, direction
    return Monotonicity.IRREGULAR_MONOTONIC, direction


def combine(results: Sequence[tuple[Monotonicity, Direction | None]]) -> tuple[Monotonicity, Direction | None]:
    """All probes must agree on the direction; the weakest regularity wins."""
    informative = [r for r in results if r[0] != Monotonicity.INSUFFICIENT_DATA]
    if not informative:
        return Monotonicity.INSUFFICIENT_DATA, None
    if any(kind == Monotonicity.NON_MONOTONIC for kind, _ in informative):
        return Monotonicity.NON_MONOTONIC, None
    directions = {direction for _, direction in informative}
    if len(directions) > 1:
        return Monotonicity.NON_MONOTONIC, None
    kinds = {kind for kind, _ in informative}
    kind = kinds.pop() if len(kinds) == 1 else Monotonicity.IRREGULAR_MONOTONIC
    return kind, directions.pop()


@dataclass(frozen=True)
class Update:
    """An assignment of shape `x = x op b` with a positive constant `b`."""

    variable: str
    op: str
    step: int

    @classmethod
    def of(cls, stmt: Assign) -> Update | None:
        return cls.match(stmt.target, stmt.expr)

    @classmethod
    def match(cls, variable: str, e: Expr) -> Update | None:
        match strip(e):
            case BinOp(op, Var(name), Const(step)) if name == variable and step > 0:
                return cls(name, op, step)
            case BinOp("+" | "*" as op, Const(step), Var(name)) if name == variable and step > 0:
                return cls(name, op, step)
        return None

    def __str__(self) -> str:
        return f"{self.variable} {self.op} {self.step}"


def static_classification(stmt: Assign, region: Interval | None = None) -> MonotonicityTrace | None:
    """Classifies `x = x op b` without running anything, over unbounded integers.

    Multiplication needs `x` to be positive, which `region` must show. Division by `b > 1` moves
    `x` toward zero, down from a positive region and up from a negative one, and stays at zero.
    """
    update = Update.of(stmt)
    if update is None:
        return None
    positive = region is not None and region.lo > 0
    negative = region is not None and region.hi < 0
    match update.op:
        case "+":
            return MonotonicityTrace(stmt.sid, (), Monotonicity.REGULAR_ARITHMETIC, Direction.INCREASING, True)
        case "-":
            return MonotonicityTrace(stmt.sid, (), Monotonicity.REGULAR_ARITHMETIC, Direction.DECREASING, True)
        case "*" if update.step > 1 and positive:
            return MonotonicityTrace(stmt.sid, (), Monotonicity.REGULAR_GEOMETRIC, Direction.INCREASING, True)
        case "/" if update.step > 1 and positive:
            return MonotonicityTrace(stmt.sid, (), Monotonicity.IRREGULAR_MONOTONIC, Direction.DECREASING, True)
        case "/" if update.step > 1 and negative:
            return MonotonicityTrace(stmt.sid, (), Monotonicity.IRREGULAR_MONOTONIC, Direction.INCREASING, True)
    return None


class _ValueTracer(Tracer):
    def __init__(self, sid: int):
        self._sid = sid
        self.values: list[int] = []

    def assigned(self, sid: int, target: str, value: int, store: Mapping[str, int]) -> None:
        if sid == self._sid and len(self.values) < MAX_TRACE:
            self.values.append(value)


def observed_values(p: Program, sid: int, probes: Sequence[Mapping[str, int]], mode: Mode) -> list[tuple[int, ...]]:
    """Successive values stored by statement `sid`, one sequence per probe input."""
    out = []
    for inputs in probes:
        tracer = _ValueTracer(sid)
        try:
            run(p, inputs, PROBE_FUEL, mode, tracer)
        except (StateRevisit, ValueError) as e:
            logger.debug(f"probe {dict(inputs)} stopped early: {e}")
        out.append(tuple(tracer.values))
    return out


def classify_monotonic(
    p: Program,
    stmt: Assign | int,
    loop: While | int,
    probes: Sequence[Mapping[str, int]],
    mode: Mode = Mode.MATHEMATICAL,
    region: Interval | None = None,
) -> MonotonicityTrace:
    """Classifies the values an assignment inside `loop` produces.

    Simple updates are classified statically when arithmetic does not wrap; anything else
    is classified from the values observed while running the probes.
    """
    if isinstance(stmt, int):
        found = p.find(stmt)
        if not isinstance(found, Assign):
            raise ValueError(f"statement {stmt} is not an assignment")
        stmt = found
    loop_sid = loop if isinstance(loop, int) else loop.sid
    if mode == Mode.MATHEMATICAL:
        fast = static_classification(stmt, region)
        if fast is not None:
            logger.debug(f"loop {loop_sid}: {fast}")
            return fast
    sequences = observed_values(p, stmt.sid, probes, mode)
    classification, direction = combine([classify_sequence(values) for values in sequences])
    trace = MonotonicityTrace(stmt.sid, tuple(sequences), classification, direction)
    logger.debug(f"loop {loop_sid}: {trace}")
    return trace


class Bound(str, Enum):
    ABOVE = "bounded-above"
    BELOW = "bounded-below"
    UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class AtomBound:
    atom: Compare
    index: int
    variable: str | None
    kind: Bound
    bound: Expr | None = None
    negated: bool = False

    def __str__(self) -> str:
        if self.kind == Bound.UNCLASSIFIED:
            return f"{print_cond(self.atom)}: {self.kind.value}"
        assert self.bound is not None
        return f"{self.variable} {self.kind.value} by {print_expr(self.bound)}"


@dataclass(frozen=True)
class Boundedness:
    atoms: tuple[AtomBound, ...]

    def for_variable(self, name: str) -> list[AtomBound]:
        return [a for a in self.atoms if a.variable == name]

    def __str__(self) -> str:
        return "; ".join(str(a) for a in self.atoms)


def oriented(atom: Compare) -> Compare | None:
    """The atom rewritten as `variable ~ bound`, or None when it has another shape."""
    left, right = strip(atom.left), strip(atom.right)
    if isinstance(left, Var) and isinstance(right, (Var, Const)):
        return Compare(atom.op, left, right)
    if isinstance(left, Const) and isinstance(right, Var):
        return Compare(FLIPPED[atom.op], right, left)
    return None


def _classify(atom: Compare, index: int, negated: bool) -> AtomBound:
    shaped = oriented(atom)
    if shaped is None:
        return AtomBound(atom, index, None, Bound.UNCLASSIFIED)
    op = NEGATED[shaped.op] if negated else shaped.op
    assert isinstance(shaped.left, Var)
    if op in ("<", "<="):
        return AtomBound(atom, index, shaped.left.name, Bound.ABOVE, shaped.right, negated)
    if op in (">", ">="):
        return AtomBound(atom, index, shaped.left.name, Bound.BELOW, shaped.right, negated)
    return AtomBound(atom, index, shaped.left.name, Bound.UNCLASSIFIED, None, negated)


def boundedness(cond: Cond) -> Boundedness:
    out: list[AtomBound] = []

    def visit(c: Cond, negated: bool):
        match c:
            case Compare():
                out.append(_classify(c, len(out), negated))
            case Not(inner):
                visit(inner, not negated)
            case And(left, right) | Or(left, right):
                visit(left, negated)
                visit(right, negated)

    visit(cond, False)
    return Boundedness(tuple(out))


class _EntryTracer(Tracer):
    def __init__(self, sid: int):
        self._sid = sid
        self.store: Mapping[str, int] | None = None

    def loop_head(self, sid: int, store: Mapping[str, int], steps: int) -> None:
        if sid == self._sid and self.store is None:
            self.store = dict(store)


def entry_region(
    p: Program,
    loop: While | int,
    probes: Sequence[Mapping[str, int]] = (),
    ranges: Mapping[str, Interval] | None = None,
    mode: Mode = Mode.MATHEMATICAL,
) -> dict[str, Interval]:
    """Values variables hold when `loop` is first reached.

    Observed from the probes when any of them reaches the loop, otherwise the declared
    input ranges of inputs the program does not reassign before the loop.
    """
    loop_sid = loop if isinstance(loop, int) else loop.sid
    seen: dict[str, Interval] = {}
    for inputs in probes:
        tracer = _EntryTracer(loop_sid)
        try:
            run(p, inputs, PROBE_FUEL, mode, tracer)
        except (StateRevisit, ValueError):
            pass
        if tracer.store is None:
            continue
        for name, value in tracer.store.items():
            point = Interval.point(value)
            seen[name] = seen[name].hull(point) if name in seen else point
    if seen:
        return seen
    before = set()
    for stmt in p.body:
        if stmt.sid == loop_sid:
            break
        before |= {s.target for s in _assignments(stmt)}
    return {name: interval for name, interval in input_domain(p, ranges).items() if name not in before}


def _assignments(stmt) -> list[Assign]:
    return [s for s in walk((stmt,)) if isinstance(s, Assign)]
