"""Repairs for integer overflow: reorder an expression, or give variables a wider type.

A repaired expression must satisfy two conditions at once: none of its operations may
overflow for the inputs in scope, and it must compute the same mathematical value as the
expression it replaces. Widening instead changes declarations and then re-checks every
statement that reads or writes a widened variable, widening further until nothing in the
forward dependence closure can overflow.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce

import networkx as nx

from databricks.labs.specfix.equivalence import UnsupportedOperator, equivalent
from databricks.labs.specfix.lang.ast import (
    ADDITIVE,
    Assign,
    BinOp,
    Const,
    Expr,
    Group,
    Program,
    Var,
    make_binary,
    variables,
)
from databricks.labs.specfix.lang.domain import (
    EXHAUSTIVE_LIMIT,
    InputSpaceTooLarge,
    enumerate_inputs,
    input_domain,
    space_size,
)
from databricks.labs.specfix.lang.interpreter import Mode, Tracer, apply_op, evaluation_width, run
from databricks.labs.specfix.lang.printer import print_expr
from databricks.labs.specfix.lang.testcases import TestCase, format_valuation
from databricks.labs.specfix.lang.widths import IntWidth, WidthExhausted
from databricks.labs.specfix.overflow.detection import (
    DETECTION_FUEL,
    DetectionMode,
    OverflowFinding,
    detect,
    detect_interval,
)
from databricks.labs.specfix.overflow.intervals import Interval
from databricks.labs.specfix.overflow.rules import OverflowKind
from databricks.labs.specfix.overflow.split import split
from databricks.labs.specfix.repair.patches import PatchRecord
from databricks.labs.specfix.termination.dependence import data_graph

logger = logging.getLogger(__name__)

MAX_MUTANTS = 5_000
NO_VALID_PATCH = "no-valid-patch-found"


class Scope(str, Enum):
    AUTO = "auto"
    EXHAUSTIVE = "exhaustive"
    INTERVAL = "interval"
    TESTS = "tests"


class Strategy(str, Enum):
    REWRITE = "rewrite"
    WIDEN = "widen"


DEFAULT_STRATEGIES = (Strategy.REWRITE, Strategy.WIDEN)


@dataclass(frozen=True)
class RewritePatch:
    sid: int
    original: Expr
    mutated: Expr
    derivation: tuple[str, ...] = ()

    def apply(self, p: Program) -> Program:
        stmt = p.find(self.sid)
        if not isinstance(stmt, Assign):
            raise ValueError(f"statement {self.sid} is not an assignment")
        return p.replace(self.sid, dataclasses.replace(stmt, expr=self.mutated))

    def __str__(self) -> str:
        return f"stmt {self.sid}: {print_expr(self.original)} -> {print_expr(self.mutated)}"


@dataclass(frozen=True)
class WideningPatch:
    seed: str
    widened: Mapping[str, tuple[IntWidth, IntWidth]]
    trace: tuple[tuple[str, int | None], ...]
    verified: tuple[int, ...] = ()
    # the language has no external calls, so widened variables never cross a library boundary
    warnings: tuple[str, ...] = ()

    def apply(self, p: Program) -> Program:
        return p.retyped({name: new for name, (_, new) in self.widened.items()})

    def __str__(self) -> str:
        parts = [f"{name}: {old.keyword} -> {new.keyword}" for name, (old, new) in sorted(self.widened.items())]
        return "widen " + ", ".join(parts)


@dataclass(frozen=True)
class Violation:
    sid: int
    sub: int
    kind: OverflowKind
    witness: Mapping[str, int] | None = None

    def __str__(self) -> str:
        witness = "" if self.witness is None else f" witness={format_valuation(self.witness)}"
        return f"{self.kind.value} at statement {self.sid} operation {self.sub}{witness}"


@dataclass(frozen=True)
class Validation:
    """Both conditions of a valid rewrite, reported separately."""

    accepted: bool
    scope: Scope
    overflow_free: bool
    equivalent: bool
    reason: str = ""
    violation: Violation | None = None
    equivalence_witness: Mapping[str, int] | None = None

    def as_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "scope": self.scope.value,
            "overflow_free": self.overflow_free,
            "equivalent": self.equivalent,
            "reason": self.reason,
        }


def _terms(e: Expr) -> list[tuple[str, Expr]]:
    if isinstance(e, BinOp) and e.op in ADDITIVE:
        return [*_terms(e.left), (e.op, e.right)]
    return [("+", e)]


def _factors(e: Expr) -> list[Expr]:
    if isinstance(e, BinOp) and e.op == "*":
        return [*_factors(e.left), e.right]
    return [e]


def _has_division(e: Expr) -> bool:
    match e:
        case BinOp("/", _, _):
            return True
        case BinOp(_, left, right):
            return _has_division(left) or _has_division(right)
        case Group(inner):
            return _has_division(inner)
    return False


def _swaps(order: Sequence[int], labels: Sequence[str], what: str) -> list[str]:
    """Adjacent transpositions that turn the original order into `order`."""
    current = list(range(len(order)))
    steps = []
    for position, wanted in enumerate(order):
        at = current.index(wanted)
        while at > position:
            steps.append(f"swap {what} {labels[current[at - 1]]} and {labels[current[at]]}")
            current[at - 1], current[at] = current[at], current[at - 1]
            at -= 1
    return steps


def _rebuild(terms: Sequence[tuple[str, Expr]]) -> Expr:
    first_sign, first = terms[0]
    assert first_sign == "+"
    out = first
    for sign, term in terms[1:]:
        out = make_binary(sign, out, term)
    return out


def _term_variants(term: Expr, label: str) -> list[tuple[Expr, list[str]]]:
    factors = _factors(term)
    if len(factors) < 2:
        return [(term, [])]
    names = [print_expr(f) for f in factors]
    out = []
    for order in itertools.permutations(range(len(factors))):
        rebuilt = reduce(lambda left, right: make_binary("*", left, right), [factors[i] for i in order])
        out.append((rebuilt, [f"{step} in {label}" for step in _swaps(order, names, "factors")]))
    return out


def derive_mutants(e: Expr, limit: int = MAX_MUTANTS) -> list[RewritePatch]:
    """Reorderings of the additive chain of `e` and of the multiplicative chains of its terms.

    A signed term may lead the chain only when it is added, since the language has no unary minus.
    Results are sorted by printed form; `e` itself is excluded.
    """
    root = e.inner if isinstance(e, Group) else e
    if _has_division(root):
        logger.debug(f"not reordering {print_expr(e)}: division has no checkable equivalence")
        return []
    terms = _terms(root)
    labels = [f"{sign}{print_expr(term)}" for sign, term in terms]
    variants = [_term_variants(term, labels[i]) for i, (_, term) in enumerate(terms)]
    original = print_expr(e)
    seen: dict[str, RewritePatch] = {}
    for order in itertools.permutations(range(len(terms))):
        if terms[order[0]][0] != "+":
            continue
        term_steps = _swaps(order, labels, "terms")
        for picks in itertools.product(*(variants[i] for i in order)):
            mutated = _rebuild([(terms[i][0], pick[0]) for i, pick in zip(order, picks)])
            printed = print_expr(mutated)
            if printed == original or printed in seen:
                continue
            steps = term_steps + [step for pick in picks for step in pick[1]]
            seen[printed] = RewritePatch(0, e, mutated, tuple(steps))
            if len(seen) >= limit:
                logger.warning(f"stopping after {limit} reorderings of {original}")
                return [seen[k] for k in sorted(seen)]
    return [seen[k] for k in sorted(seen)]


def rewrite_mutants(e: Expr) -> list[Expr]:
    return [patch.mutated for patch in derive_mutants(e)]


def _first_overflow(p: Program, stmt: Assign, store: Mapping[str, int]) -> tuple[int, OverflowKind] | None:
    """Checks one evaluation of `stmt` on exact values, at the widths declared in `p`."""
    target_width = p.width_of(stmt.target)
    width = evaluation_width(p, stmt.expr, target_width)
    results: dict[str, int] = {}

    def value(e: Expr) -> int:
        match e:
            case Const(v):
                return v
            case Var(name):
                return results[name] if name in results else store[name]
        raise TypeError(f"not an operand: {e!r}")

    subs = split(stmt.expr)
    try:
        for sub in subs:
            x, y = value(sub.named.left), value(sub.named.right)
            if sub.op == "/" and y == 0:
                return None
            result = apply_op(sub.op, x, y)
            if result > width.intmax:
                return sub.index, OverflowKind.IO
            if result < width.intmin:
                return sub.index, OverflowKind.IU
            results[sub.name] = result
        final = results[subs[-1].name] if subs else value(_leaf(stmt.expr))
    except KeyError:
        # reading an unassigned variable fails before anything can overflow
        return None
    if final > target_width.intmax:
        return len(subs), OverflowKind.IO
    if final < target_width.intmin:
        return len(subs), OverflowKind.IU
    return None


def _leaf(e: Expr) -> Expr:
    while isinstance(e, Group):
        e = e.inner
    return e


class _StoreCollector(Tracer):
    def __init__(self, sids: set[int]):
        self.current: Mapping[str, int] = {}
        self.stores: dict[int, dict[tuple, tuple[Mapping[str, int], dict[str, int]]]] = {sid: {} for sid in sids}

    def assigning(self, sid: int, store: Mapping[str, int]) -> None:
        seen = self.stores.get(sid)
        if seen is None:
            return
        key = tuple(sorted(store.items()))
        if key not in seen:
            seen[key] = (self.current, dict(store))


class SiteChecker:
    """Decides whether an assignment can overflow within a validation scope.

    Exhaustive and test scopes replay the original program over unbounded integers once and
    keep every distinct store reaching each assignment; because those stores do not depend
    on declared widths or on equivalent rewrites, every later check is a pure evaluation.
    """

    def __init__(
        self,
        p: Program,
        scope: Scope = Scope.AUTO,
        ranges: Mapping[str, Interval] | None = None,
        tests: Sequence[TestCase] = (),
        fuel: int = DETECTION_FUEL,
        limit: int = EXHAUSTIVE_LIMIT,
    ):
        self._program = p
        self._ranges = dict(ranges or {})
        self._tests = list(tests)
        self._fuel = fuel
        self._domain = input_domain(p, ranges)
        enumerable = space_size(self._domain) <= limit
        if scope == Scope.AUTO:
            scope = Scope.EXHAUSTIVE if enumerable else Scope.INTERVAL
        if scope == Scope.EXHAUSTIVE and not enumerable:
            raise InputSpaceTooLarge(f"{space_size(self._domain)} input valuations exceed the limit of {limit}")
        if scope == Scope.TESTS and not self._tests:
            raise ValueError("test scope needs at least one test case")
        self.scope = scope
        self._limit = limit
        self._stores: dict[int, list[tuple[Mapping[str, int], dict[str, int]]]] = {}
        self._interval_findings: dict[Program, list[OverflowFinding]] = {}

    def _inputs(self) -> Iterable[Mapping[str, int]]:
        if self.scope == Scope.TESTS:
            return [case.inputs for case in self._tests]
        return enumerate_inputs(self._domain, self._limit)

    def _collect(self, sids: set[int]):
        missing = sids - self._stores.keys()
        if not missing:
            return
        collector = _StoreCollector(missing)
        for inputs in self._inputs():
            collector.current = inputs
            try:
                run(self._program, inputs, self._fuel, Mode.MATHEMATICAL, collector)
            except ValueError as e:
                logger.debug(f"skipping {format_valuation(inputs)}: {e}")
        for sid, seen in collector.stores.items():
            self._stores[sid] = list(seen.values())
        logger.debug(f"collected stores for statements {sorted(missing)} under {self.scope.value} scope")

    def check(self, variant: Program, stmt: Assign) -> Violation | None:
        """First overflow of `stmt`, as it appears in `variant`, over the stores of the original program."""
        if self.scope == Scope.INTERVAL:
            findings = self._interval_findings.get(variant)
            if findings is None:
                findings = detect_interval(variant, self._ranges)
                self._interval_findings[variant] = findings
            for finding in findings:
                if finding.sid == stmt.sid:
                    return Violation(stmt.sid, finding.sub, finding.kind)
            return None
        self._collect({stmt.sid})
        for inputs, store in self._stores[stmt.sid]:
            hit = _first_overflow(variant, stmt, store)
            if hit is not None:
                return Violation(stmt.sid, hit[0], hit[1], inputs)
        return None

    def for_tests(self) -> SiteChecker | None:
        if not self._tests or self.scope == Scope.TESTS:
            return None
        return SiteChecker(self._program, Scope.TESTS, self._ranges, self._tests, self._fuel, self._limit)


def _validate(p: Program, patch: RewritePatch, checker: SiteChecker) -> Validation:
    stmt = p.find(patch.sid)
    if not isinstance(stmt, Assign):
        raise ValueError(f"statement {patch.sid} is not an assignment")
    try:
        verdict = equivalent(stmt.expr, patch.mutated)
        same, eq_witness = verdict.equivalent, verdict.witness
    except UnsupportedOperator:
        same, eq_witness = False, None
    rewritten = dataclasses.replace(stmt, expr=patch.mutated)
    variant = p.replace(patch.sid, rewritten)
    violation = checker.check(variant, rewritten)
    scope = checker.scope
    if violation is not None and scope == Scope.INTERVAL:
        # intervals over-approximate; concrete tests are weaker evidence but may still clear the rewrite
        fallback = checker.for_tests()
        if fallback is not None:
            violation, scope = fallback.check(variant, rewritten), Scope.TESTS
    reasons = []
    if violation is not None:
        subs = split(patch.mutated)
        where = str(subs[violation.sub]) if violation.sub < len(subs) else print_expr(patch.mutated)
        witness = "" if violation.witness is None else f" (witness {format_valuation(violation.witness)})"
        reasons.append(f"sub-expression {where} can {violation.kind.value}{witness}")
    if not same:
        witness = "" if eq_witness is None else f" (witness {format_valuation(eq_witness)})"
        reasons.append(f"not equivalent to {print_expr(stmt.expr)}{witness}")
    accepted = violation is None and same
    return Validation(accepted, scope, violation is None, same, "; ".join(reasons), violation, eq_witness)


def validate_rewrite(
    p: Program,
    patch: RewritePatch,
    scope: Scope = Scope.AUTO,
    ranges: Mapping[str, Interval] | None = None,
    tests: Sequence[TestCase] = (),
) -> Validation:
    """Accepts a rewrite when no operation of it can overflow in scope and it equals the original."""
    return _validate(p, patch, SiteChecker(p, scope, ranges, tests))


def _affected(p: Program, seed: str) -> list[Assign]:
    graph = data_graph(p)
    reach = {seed} | (nx.descendants(graph, seed) if seed in graph else set())
    return [s for s in p.statements() if isinstance(s, Assign) and s.target in reach]


def _widen(p: Program, seed: str, target_width: IntWidth, checker: SiteChecker) -> WideningPatch:
    original = p.widths
    if target_width <= original[seed]:
        raise ValueError(f"{seed} is already {original[seed].keyword}")
    widths = dict(original)
    widths[seed] = target_width
    trace: list[tuple[str, int | None]] = [(seed, None)]
    affected = _affected(p, seed)
    while True:
        retyped = p.retyped(widths)
        changed = {name for name, width in widths.items() if width != original[name]}
        hit = None
        for stmt in affected:
            if stmt.target in changed or variables(stmt.expr) & changed:
                if checker.check(retyped, stmt) is not None:
                    hit = stmt
                    break
        if hit is None:
            break
        # raises WidthExhausted past i64
        widths[hit.target] = widths[hit.target].wider()
        trace.append((hit.target, hit.sid))
        logger.debug(f"widening {hit.target} to {widths[hit.target].keyword} for statement {hit.sid}")
    widened = {name: (original[name], widths[name]) for name in widths if widths[name] != original[name]}
    verified = tuple(
        s.sid for s in affected if s.target not in widened and variables(s.expr) & widened.keys()
    )
    return WideningPatch(seed, widened, tuple(trace), verified)


def widen(
    p: Program,
    seed: str,
    target_width: IntWidth,
    scope: Scope = Scope.AUTO,
    ranges: Mapping[str, Interval] | None = None,
    tests: Sequence[TestCase] = (),
) -> WideningPatch:
    """Widens `seed` and, to a fixpoint, every dependent variable whose assignment could still overflow."""
    return _widen(p, seed, target_width, SiteChecker(p, scope, ranges, tests))


@dataclass
class IORepair:
    outcome: str
    finding: OverflowFinding
    strategy: Strategy | None = None
    patch: RewritePatch | WideningPatch | None = None
    program: Program | None = None
    scope: Scope | None = None
    candidates: list[dict] = field(default_factory=list)

    @property
    def repaired(self) -> bool:
        return self.patch is not None

    def record(self, before: Program) -> PatchRecord | None:
        if self.patch is None or self.program is None:
            return None
        stmt = before.find(self.finding.sid)
        after = self.program.find(self.finding.sid)
        assert self.strategy is not None and self.scope is not None
        return PatchRecord(
            self.strategy.value,
            f"stmt {self.finding.sid}",
            _describe(before, stmt),
            _describe(self.program, after),
            {"scope": self.scope.value, "patch": str(self.patch)},
        )

    def as_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "finding": self.finding.as_dict(),
            "strategy": None if self.strategy is None else self.strategy.value,
            "patch": None if self.patch is None else str(self.patch),
            "scope": None if self.scope is None else self.scope.value,
            "candidates": self.candidates,
        }


def _describe(p: Program, stmt) -> str:
    if isinstance(stmt, Assign):
        return f"{p.width_of(stmt.target).keyword} {stmt.target} = {print_expr(stmt.expr)}"
    return str(stmt.sid)


def repair_io(
    p: Program,
    finding: OverflowFinding,
    strategies: Sequence[Strategy] = DEFAULT_STRATEGIES,
    scope: Scope = Scope.AUTO,
    ranges: Mapping[str, Interval] | None = None,
    tests: Sequence[TestCase] = (),
) -> IORepair:
    """Tries each strategy in order and returns the first patch that validates.

    Every examined candidate is listed with the reason it was rejected.
    """
    report = IORepair(NO_VALID_PATCH, finding)
    stmt = p.find(finding.sid)
    if not isinstance(stmt, Assign):
        report.candidates.append({"strategy": None, "edit": None, "accepted": False, "reason": "not an assignment"})
        return report
    checker = SiteChecker(p, scope, ranges, tests)
    for strategy in strategies:
        if strategy == Strategy.REWRITE and _try_rewrites(p, stmt, checker, report):
            return report
        if strategy == Strategy.WIDEN and _try_widening(p, stmt, checker, report):
            return report
    logger.info(f"no valid patch for {finding}")
    return report


def _try_rewrites(p: Program, stmt: Assign, checker: SiteChecker, report: IORepair) -> bool:
    for candidate in derive_mutants(stmt.expr):
        patch = dataclasses.replace(candidate, sid=stmt.sid)
        validation = _validate(p, patch, checker)
        report.candidates.append(
            {"strategy": Strategy.REWRITE.value, "edit": print_expr(patch.mutated), **validation.as_dict()}
        )
        if validation.accepted:
            logger.info(f"accepted rewrite {patch} under {validation.scope.value} scope")
            report.outcome, report.strategy, report.patch = "repaired", Strategy.REWRITE, patch
            report.program, report.scope = patch.apply(p), validation.scope
            return True
    return False


def _try_widening(p: Program, stmt: Assign, checker: SiteChecker, report: IORepair) -> bool:
    width = p.width_of(stmt.target)
    try:
        patch = _widen(p, stmt.target, width.wider(), checker)
    except WidthExhausted as e:
        report.candidates.append(
            {"strategy": Strategy.WIDEN.value, "edit": f"widen {stmt.target}", "accepted": False, "reason": str(e)}
        )
        return False
    report.candidates.append(
        {"strategy": Strategy.WIDEN.value, "edit": str(patch), "accepted": True, "scope": checker.scope.value}
    )
    logger.info(f"accepted {patch} under {checker.scope.value} scope")
    report.outcome, report.strategy, report.patch = "repaired", Strategy.WIDEN, patch
    report.program, report.scope = patch.apply(p), checker.scope
    return True


@dataclass
class ProgramRepair:
    """Findings repaired one at a time, re-detecting after every accepted patch."""

    program: Program
    repairs: list[IORepair] = field(default_factory=list)
    remaining: list[OverflowFinding] = field(default_factory=list)

    @property
    def outcome(self) -> str:
        if self.remaining:
            return NO_VALID_PATCH
        return "repaired" if self.repairs else "no-findings"

    def as_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "repairs": [r.as_dict() for r in self.repairs],
            "remaining": [f.as_dict() for f in self.remaining],
        }


def repair_all(
    p: Program,
    mode: DetectionMode = DetectionMode.EXHAUSTIVE,
    strategies: Sequence[Strategy] = DEFAULT_STRATEGIES,
    scope: Scope = Scope.AUTO,
    ranges: Mapping[str, Interval] | None = None,
    tests: Sequence[TestCase] = (),
    fuel: int = DETECTION_FUEL,
) -> ProgramRepair:
    """Repairs the first finding, detects again on the patched program and repeats.

    Stops at the first finding without a valid patch, or when a patch brings back a finding
    that was already repaired.
    """
    result = ProgramRepair(p)
    repaired: set[tuple[int, int, str]] = set()
    while True:
        findings = detect(result.program, mode, tests, ranges, fuel)
        if not findings:
            return result
        finding = findings[0]
        if finding.key in repaired:
            logger.warning(f"{finding} came back after being repaired")
            result.remaining = findings
            return result
        report = repair_io(result.program, finding, strategies, scope, ranges, tests)
        result.repairs.append(report)
        if report.program is None:
            result.remaining = findings
            return result
        repaired.add(finding.key)
        result.program = report.program
