from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
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
    walk,
)
from databricks.labs.specfix.lang.domain import (
    EXHAUSTIVE_LIMIT,
    InputSpaceTooLarge,
    enumerate_inputs,
    input_domain,
    space_size,
)
from databricks.labs.specfix.lang.interpreter import Mode, RunOutcome, Status, evaluation_width, run
from databricks.labs.specfix.lang.printer import print_expr
from databricks.labs.specfix.lang.testcases import TestCase, format_valuation
from databricks.labs.specfix.lang.widths import IntWidth
from databricks.labs.specfix.overflow.intervals import Interval
from databricks.labs.specfix.overflow.rules import OverflowKind, RuleMode
from databricks.labs.specfix.overflow.split import split_stmt

logger = logging.getLogger(__name__)

DETECTION_FUEL = 100_000


class DetectionMode(str, Enum):
    CONCRETE = "concrete"
    INTERVAL = "interval"
    EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class OverflowFinding:
    sid: int
    sub: int
    kind: OverflowKind
    expr: str
    mode: DetectionMode
    witness: Mapping[str, int] | None = field(default=None, compare=False)
    count: int = field(default=0, compare=False)

    @property
    def key(self) -> tuple[int, int, str]:
        return self.sid, self.sub, self.kind.value

    def __str__(self) -> str:
        witness = "" if self.witness is None else format_valuation(self.witness)
        line = f"{self.kind.value} stmt={self.sid} sub={self.expr} witness={witness} mode={self.mode.value}"
        if self.count:
            line += f" count={self.count}"
        return line

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "stmt": self.sid,
            "sub": self.sub,
            "expr": self.expr,
            "mode": self.mode.value,
            "witness": None if self.witness is None else dict(self.witness),
            "count": self.count,
        }


def describe_site(p: Program, sid: int, sub: int) -> str:
    """Printed form of operation `sub` of statement `sid`; past the last operation it is the stored value."""
    stmt = p.find(sid)
    subs = split_stmt(stmt)
    if sub < len(subs):
        return str(subs[sub])
    if isinstance(stmt, Assign):
        return f"{stmt.target} := {print_expr(stmt.expr)}"
    return "?"


class _Aggregator:
    def __init__(self, p: Program, mode: DetectionMode):
        self._program = p
        self._mode = mode
        self._first: dict[tuple[int, int, OverflowKind], Mapping[str, int] | None] = {}
        self._counts: dict[tuple[int, int, OverflowKind], int] = {}

    def add(self, sid: int, sub: int, kind: OverflowKind, witness: Mapping[str, int] | None):
        key = (sid, sub, kind)
        if key not in self._first:
            self._first[key] = None if witness is None else dict(witness)
            logger.debug(f"{kind.value} at statement {sid}, operation {sub}")
        self._counts[key] = self._counts.get(key, 0) + 1

    def findings(self) -> list[OverflowFinding]:
        out = []
        for key in sorted(self._first, key=lambda k: (k[0], k[1], k[2].value)):
            sid, sub, kind = key
            count = self._counts[key] if self._mode != DetectionMode.INTERVAL else 0
            text = describe_site(self._program, sid, sub)
            out.append(OverflowFinding(sid, sub, kind, text, self._mode, self._first[key], count))
        return out


def _record(aggregator: _Aggregator, inputs: Mapping[str, int], outcome: RunOutcome, diagnostics: list[str] | None):
    if outcome.status == Status.OVERFLOW_TRAP and outcome.trap is not None:
        aggregator.add(outcome.trap.sid, outcome.trap.sub, outcome.trap.kind, inputs)
        return
    if outcome.status == Status.HALTED:
        return
    message = f"{format_valuation(inputs)}: {outcome.error or outcome.status.value}"
    if diagnostics is not None:
        diagnostics.append(message)
    logger.debug(f"no verdict for {message}")


def detect_concrete(
    p: Program,
    tests: Iterable[TestCase],
    fuel: int = DETECTION_FUEL,
    diagnostics: list[str] | None = None,
    rule_mode: RuleMode = RuleMode.CORRECTED,
) -> list[OverflowFinding]:
    """Runs every test input in checked mode; runtime errors go to `diagnostics`, not to the findings."""
    aggregator = _Aggregator(p, DetectionMode.CONCRETE)
    for case in tests:
        try:
            outcome = run(p, case.inputs, fuel, Mode.CHECKED, rule_mode=rule_mode)
        except ValueError as e:
            if diagnostics is not None:
                diagnostics.append(f"line {case.line}: {e}")
            logger.warning(f"skipping test on line {case.line}: {e}")
            continue
        _record(aggregator, case.inputs, outcome, diagnostics)
    return aggregator.findings()


def detect_exhaustive(
    p: Program,
    width_cap: IntWidth = IntWidth.I8,
    ranges: Mapping[str, Interval] | None = None,
    fuel: int = DETECTION_FUEL,
    limit: int = EXHAUSTIVE_LIMIT,
    diagnostics: list[str] | None = None,
    rule_mode: RuleMode = RuleMode.CORRECTED,
) -> list[OverflowFinding]:
    """Runs checked mode on every input valuation inside the declared ranges.

    Every finding carries the first witness in enumeration order and the number of
    witnessing valuations.
    """
    too_wide = sorted(d.name for d in p.decls if d.width > width_cap)
    if too_wide:
        raise InputSpaceTooLarge(f"variables wider than {width_cap.keyword}: {', '.join(too_wide)}")
    domain = input_domain(p, ranges)
    aggregator = _Aggregator(p, DetectionMode.EXHAUSTIVE)
    for inputs in enumerate_inputs(domain, limit):
        _record(aggregator, inputs, run(p, inputs, fuel, Mode.CHECKED, rule_mode=rule_mode), diagnostics)
    findings = aggregator.findings()
    logger.info(f"exhaustive detection found {len(findings)} overflow sites")
    return findings


class _IntervalAnalysis:
    def __init__(self, p: Program, aggregator: _Aggregator):
        self._program = p
        self._widths = p.widths
        self._aggregator = aggregator
        self._sub = 0

    def _read(self, env: dict[str, Interval], name: str) -> Interval:
        # an unassigned local fails at run time, so any value is a safe stand-in
        return env.get(name, Interval.of(self._widths[name]))

    def _expr(self, env: dict[str, Interval], e: Expr, width: IntWidth, sid: int) -> Interval:
        match e:
            case Const(value):
                return Interval.point(value)
            case Var(name):
                return self._read(env, name)
            case Group(inner):
                return self._expr(env, inner, width, sid)
            case BinOp(op, left, right):
                x = self._expr(env, left, width, sid)
                y = self._expr(env, right, width, sid)
                sub = self._sub
                self._sub += 1
                return self._check(x.apply(op, y), width, sid, sub)
        raise TypeError(f"not an expression: {e!r}")

    def _check(self, result: Interval, width: IntWidth, sid: int, sub: int) -> Interval:
        if result.hi > width.intmax:
            self._aggregator.add(sid, sub, OverflowKind.IO, None)
        if result.lo < width.intmin:
            self._aggregator.add(sid, sub, OverflowKind.IU, None)
        # a run that overflows stops here, so later code only sees in-range values
        return result.clamp(width)

    def _cond(self, env: dict[str, Interval], c: Cond, sid: int):
        match c:
            case Compare(_, left, right):
                width = evaluation_width(self._program, c)
                self._expr(env, left, width, sid)
                self._expr(env, right, width, sid)
            case Not(inner):
                self._cond(env, inner, sid)
            case And(left, right) | Or(left, right):
                self._cond(env, left, sid)
                self._cond(env, right, sid)

    def block(self, env: dict[str, Interval], body: tuple[Stmt, ...]) -> dict[str, Interval]:
        for stmt in body:
            env = self.stmt(env, stmt)
        return env

    def stmt(self, env: dict[str, Interval], stmt: Stmt) -> dict[str, Interval]:
        self._sub = 0
        match stmt:
            case Assign(target, expr):
                target_width = self._widths[target]
                width = evaluation_width(self._program, expr, target_width)
                value = self._expr(env, expr, width, stmt.sid)
                return {**env, target: self._check(value, target_width, stmt.sid, self._sub)}
            case If(cond, then, orelse):
                self._cond(env, cond, stmt.sid)
                left = self.block(dict(env), then)
                right = self.block(dict(env), orelse or ())
                return _join(left, right)
            case While(cond, body):
                carried = {s.target for s in walk(body) if isinstance(s, Assign)}
                env = {**env, **{name: Interval.of(self._widths[name]) for name in carried}}
                self._cond(env, cond, stmt.sid)
                self.block(dict(env), body)
                return env
            case Return():
                return env
        raise TypeError(f"not a statement: {stmt!r}")


def _join(left: dict[str, Interval], right: dict[str, Interval]) -> dict[str, Interval]:
    out = {}
    for name in left.keys() | right.keys():
        if name in left and name in right:
            out[name] = left[name].hull(right[name])
        # assigned on one branch only: the other branch leaves it unassigned, any read fails
        else:
            out[name] = left.get(name) or right[name]
    return out


def detect_interval(p: Program, ranges: Mapping[str, Interval] | None = None) -> list[OverflowFinding]:
    """Propagates input ranges through the program and reports operations that may leave their width.

    Sound for the declared ranges: a loop makes every variable it assigns range over its whole width.
    """
    aggregator = _Aggregator(p, DetectionMode.INTERVAL)
    analysis = _IntervalAnalysis(p, aggregator)
    analysis.block(dict(input_domain(p, ranges)), p.body)
    findings = aggregator.findings()
    logger.info(f"interval detection found {len(findings)} possible overflow sites")
    return findings


def feasible_mode(
    p: Program,
    mode: DetectionMode,
    ranges: Mapping[str, Interval] | None = None,
    limit: int = EXHAUSTIVE_LIMIT,
) -> DetectionMode:
    """Falls back from exhaustive to interval detection when the input space is larger than `limit`."""
    if DetectionMode(mode) != DetectionMode.EXHAUSTIVE:
        return DetectionMode(mode)
    size = space_size(input_domain(p, ranges))
    if size <= limit:
        return DetectionMode.EXHAUSTIVE
    logger.warning(f"{size} input valuations exceed the exhaustive limit of {limit}, using interval detection")
    return DetectionMode.INTERVAL


def detect(
    p: Program,
    mode: DetectionMode,
    tests: Iterable[TestCase] = (),
    ranges: Mapping[str, Interval] | None = None,
    fuel: int = DETECTION_FUEL,
    limit: int = EXHAUSTIVE_LIMIT,
    rule_mode: RuleMode = RuleMode.CORRECTED,
    diagnostics: list[str] | None = None,
) -> list[OverflowFinding]:
    match DetectionMode(mode):
        case DetectionMode.CONCRETE:
            return detect_concrete(p, tests, fuel, diagnostics, rule_mode)
        case DetectionMode.INTERVAL:
            return detect_interval(p, ranges)
        case DetectionMode.EXHAUSTIVE:
            return detect_exhaustive(p, IntWidth.I64, ranges, fuel, limit, diagnostics, rule_mode)
    raise ValueError(f"unknown detection mode: {mode}")
