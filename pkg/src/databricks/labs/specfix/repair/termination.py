"""Repairs for non-terminating loops by conditional mutation.

The loop is sliced down to its control variables, each control update must be monotone,
and candidates are then produced by mutating either the update or the loop condition, one
constrained by the shape of the other. Every candidate is first run against the tests and
only handed to the prover when all of them pass.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import time
from collections import Counter
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum

from databricks.labs.specfix.lang.ast import (
    Assign,
    BinOp,
    Compare,
    Cond,
    Const,
    Expr,
    Program,
    Var,
    While,
    make_binary,
    map_atoms,
    strip,
    variables,
    walk,
)
from databricks.labs.specfix.lang.interpreter import compare
from databricks.labs.specfix.lang.printer import pretty_print, print_cond, print_expr
from databricks.labs.specfix.lang.testcases import DEFAULT_TEST_FUEL, TestCase, TestResult, run_tests
from databricks.labs.specfix.overflow.intervals import Interval
from databricks.labs.specfix.repair.patches import PatchRecord
from databricks.labs.specfix.termination.dependence import ControlVarSet, control_variables, slice
from databricks.labs.specfix.termination.monotonicity import (
    Bound,
    Direction,
    Monotonicity,
    MonotonicityTrace,
    Update,
    boundedness,
    classify_monotonic,
    entry_region,
    oriented,
)
from databricks.labs.specfix.termination.prover import (
    Answer,
    BugAnswer,
    Prover,
    ProverVerdict,
    Semantics,
    has_termination_bug,
)

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 5.0
GROWING_OPS = (">", ">=", "==")
SHRINKING_OPS = ("<", "<=", "==")


class DirectionUnachievable(ValueError):
    pass


class EmptyPatchSpace(ValueError):
    pass


class RuleId(str, Enum):
    R1 = "R1-update-decreasing"
    R2 = "R2-update-increasing"
    R3 = "R3-cond-from-update"


@dataclass(frozen=True)
class MutationRule:
    rule: RuleId
    loop: int
    variable: str
    atom: int
    update: int
    direction: Direction | None = None
    operators: tuple[str, ...] = ()

    def __str__(self) -> str:
        if self.rule == RuleId.R3:
            return f"{self.rule.value}: {self.variable} ~ in {{{', '.join(self.operators)}}}"
        assert self.direction is not None
        return f"{self.rule.value}: {self.variable} update {self.direction.value}"


def _ladder(e: Expr, var: str) -> list[int]:
    steps = []
    match strip(e):
        case BinOp(_, Var(name), Const(step)) if name == var and step > 0:
            steps.append(step)
    return list(dict.fromkeys([*steps, 1, 2]))


def monotone_mutate(
    e: Expr,
    direction: Direction,
    var: str,
    region: Interval | None = None,
    stops_at_zero: bool = True,
) -> list[Expr]:
    """Updates `var op b` that move `var` strictly in `direction`.

    Additive candidates come first, then multiplicative ones, each over the step ladder
    {original step, 1, 2}. Multiplying or dividing only moves a positive value, so those
    candidates need `region` to allow positive values only; division also needs the loop to
    stop once `var` sinks to zero.
    """
    if var not in variables(e):
        raise DirectionUnachievable(f"{print_expr(e)} does not update {var}")
    steps = _ladder(e, var)
    multiplicative = region is None or region.positive
    if direction == Direction.INCREASING:
        candidates = [make_binary("+", Var(var), Const(b)) for b in steps]
        if multiplicative:
            candidates += [make_binary("*", Var(var), Const(b)) for b in steps if b > 1]
    else:
        candidates = [make_binary("-", Var(var), Const(b)) for b in steps]
        if multiplicative and stops_at_zero:
            candidates += [make_binary("/", Var(var), Const(b)) for b in steps if b > 1]
    original = print_expr(e)
    out = [c for c in candidates if print_expr(c) != original]
    if not out:
        raise DirectionUnachievable(f"no {direction.value} update for {var} differs from {original}")
    return out


def _cond_operators(update: Update | None, region: Interval | None) -> tuple[str, ...]:
    """Condition operators permitted by an update `x op b`; the sign of `x` must be known."""
    if update is None or region is None:
        return ()
    if update.op in ("+", "-") and not region.non_negative:
        return ()
    if update.op in ("*", "/") and not region.positive:
        return ()
    return GROWING_OPS if update.op in ("+", "*") else SHRINKING_OPS


def consistent(op: str, direction: Direction | None) -> bool:
    """A bound from above needs an increasing update, a bound from below a decreasing one."""
    if direction is None or op in ("==", "!="):
        return True
    if op in ("<", "<="):
        return direction == Direction.INCREASING
    return direction == Direction.DECREASING


def applicable_rules(
    cond: Cond,
    updates: Mapping[str, Assign],
    regions: Mapping[str, Interval] | None = None,
    loop: int = 0,
) -> list[MutationRule]:
    """Rules triggered by the shapes of the condition atoms and of the updates of their variables."""
    regions = regions or {}
    rules = []
    for atom in boundedness(cond).atoms:
        if atom.variable is None or atom.variable not in updates or atom.kind == Bound.UNCLASSIFIED:
            continue
        stmt = updates[atom.variable]
        if atom.kind == Bound.BELOW:
            rules.append(MutationRule(RuleId.R1, loop, atom.variable, atom.index, stmt.sid, Direction.DECREASING))
        else:
            rules.append(MutationRule(RuleId.R2, loop, atom.variable, atom.index, stmt.sid, Direction.INCREASING))
        if atom.negated:
            continue
        operators = _cond_operators(Update.of(stmt), regions.get(atom.variable))
        if operators:
            rules.append(MutationRule(RuleId.R3, loop, atom.variable, atom.index, stmt.sid, operators=operators))
    logger.debug(f"loop {loop}: rules {[str(r) for r in rules]}")
    return rules


class EditKind(str, Enum):
    UPDATE = "update"
    CONDITION = "condition"
    BOTH = "both"


@dataclass(frozen=True)
class TerminationPatch:
    loop: int
    kind: EditKind
    rules: tuple[RuleId, ...]
    program: Program
    update: tuple[int, Expr] | None = None
    cond: Cond | None = None
    description: str = ""

    def apply(self, p: Program) -> Program:
        """Carries the edits over to `p`; statement ids of the slice are those of the program it came from."""
        if self.update is not None:
            sid, expr = self.update
            stmt = p.find(sid)
            assert isinstance(stmt, Assign)
            p = p.replace(sid, dataclasses.replace(stmt, expr=expr))
        if self.cond is not None:
            loop = p.find(self.loop)
            assert isinstance(loop, While)
            p = p.replace(self.loop, dataclasses.replace(loop, cond=self.cond))
        return p

    def __str__(self) -> str:
        return self.description


def _replace_atom(cond: Cond, index: int, new: Compare) -> Cond:
    position = itertools.count()
    return map_atoms(cond, lambda atom: new if next(position) == index else atom)


def _rebound(cond: Cond, index: int, op: str) -> tuple[Cond, str]:
    atom = boundedness(cond).atoms[index]
    shaped = oriented(atom.atom)
    assert shaped is not None
    new = dataclasses.replace(shaped, op=op)
    return _replace_atom(cond, index, new), f"cond {print_cond(atom.atom)} -> {print_cond(new)}"


def _exits_at_zero(cond: Cond, index: int) -> bool:
    atom = boundedness(cond).atoms[index]
    shaped = oriented(atom.atom)
    if shaped is None or not isinstance(shaped.right, Const):
        return False
    return compare(shaped.op, 0, shaped.right.value) == atom.negated


def build_patch_space(
    p_min: Program,
    rules: Sequence[MutationRule],
    regions: Mapping[str, Interval] | None = None,
    directions: Mapping[str, Direction | None] | None = None,
) -> list[TerminationPatch]:
    """Update mutants first, then condition mutants, then both combined.

    `regions` gives the possible entry values used to allow multiplicative updates and
    `directions` the observed direction of every original update. Candidates whose
    condition bound contradicts the direction of their update are never produced.

    Condition mutants take their operators from the update, `< <= ==` for subtraction and
    division and `> >= ==` for addition and multiplication, then drop those inconsistent with
    the update direction. For `while (x < 10) x = x - 1;` only `x == 10` is left; `x > 10`
    and `x >= 10` are never produced.
    """
    if not rules:
        raise EmptyPatchSpace("no conditional-mutation rule applies")
    regions = regions or {}
    directions = directions or {}
    loop_sid = rules[0].loop
    loop = p_min.find(loop_sid)
    assert isinstance(loop, While)
    seen: set[str] = set()
    space: list[TerminationPatch] = []

    def emit(patch: TerminationPatch):
        key = pretty_print(patch.program)
        if key in seen or key == pretty_print(p_min):
            return
        seen.add(key)
        space.append(patch)

    updates: list[tuple[MutationRule, Expr, Direction]] = []
    for rule in rules:
        if rule.direction is None:
            continue
        stmt = p_min.find(rule.update)
        assert isinstance(stmt, Assign)
        zero_exits = _exits_at_zero(loop.cond, rule.atom)
        try:
            mutants = monotone_mutate(stmt.expr, rule.direction, rule.variable, regions.get(rule.variable), zero_exits)
        except DirectionUnachievable as e:
            logger.debug(f"skipping {rule}: {e}")
            continue
        for mutant in mutants:
            updates.append((rule, mutant, rule.direction))
            patch = TerminationPatch(loop_sid, EditKind.UPDATE, (rule.rule,), p_min, (stmt.sid, mutant))
            text = f"update {print_expr(stmt.expr)} -> {print_expr(mutant)}"
            emit(dataclasses.replace(patch, program=patch.apply(p_min), description=text))
    for rule in rules:
        if rule.rule != RuleId.R3:
            continue
        current = oriented(boundedness(loop.cond).atoms[rule.atom].atom)
        assert current is not None
        for op in rule.operators:
            if op == current.op or not consistent(op, directions.get(rule.variable)):
                continue
            cond, text = _rebound(loop.cond, rule.atom, op)
            patch = TerminationPatch(loop_sid, EditKind.CONDITION, (RuleId.R3,), p_min, cond=cond, description=text)
            emit(dataclasses.replace(patch, program=patch.apply(p_min)))
    for rule, mutant, direction in updates:
        atoms = boundedness(loop.cond).atoms
        if atoms[rule.atom].negated:
            continue
        current = oriented(atoms[rule.atom].atom)
        assert current is not None
        for op in _cond_operators(Update.match(rule.variable, mutant), regions.get(rule.variable)):
            if op == current.op or not consistent(op, direction):
                continue
            cond, text = _rebound(loop.cond, rule.atom, op)
            stmt = p_min.find(rule.update)
            assert isinstance(stmt, Assign)
            text = f"update {print_expr(stmt.expr)} -> {print_expr(mutant)}; {text}"
            patch = TerminationPatch(
                loop_sid, EditKind.BOTH, (rule.rule, RuleId.R3), p_min, (rule.update, mutant), cond, text
            )
            emit(dataclasses.replace(patch, program=patch.apply(p_min)))
    logger.debug(f"loop {loop_sid}: {len(space)} candidate patches")
    return space


class Classification(str, Enum):
    VALID = "valid"
    PLAUSIBLE = "plausible"
    INVALID = "invalid"


def validity(results: Sequence[TestResult], answer: Answer | None) -> Classification:
    """Valid when every test passes and the loop is proved to terminate; plausible when the proof is unknown."""
    if not all(r.passed for r in results):
        return Classification.INVALID
    if answer is None:
        raise ValueError("a candidate passing every test needs a prover answer")
    if answer == Answer.TR:
        return Classification.VALID
    if answer == Answer.UN:
        return Classification.PLAUSIBLE
    return Classification.INVALID


@dataclass(frozen=True)
class PatchVerdict:
    classification: Classification
    tests: tuple[TestResult, ...]
    prover: ProverVerdict | None = None

    def as_dict(self) -> dict:
        return {
            "verdict": self.classification.value,
            "tests": [r.status.value for r in self.tests],
            "prover": None if self.prover is None else str(self.prover),
        }


def classify_patch(
    patch: TerminationPatch,
    tests: Sequence[TestCase],
    prover: Prover,
    program: Program | None = None,
    fuel: int = DEFAULT_TEST_FUEL,
) -> PatchVerdict:
    """Runs the tests first and asks the prover only when all of them pass."""
    patched = patch.program if program is None else patch.apply(program)
    results = tuple(run_tests(patched, list(tests), fuel, prover.semantics.mode))
    if not all(r.passed for r in results):
        logger.debug(f"{patch}: {sum(not r.passed for r in results)} tests fail")
        return PatchVerdict(Classification.INVALID, results)
    verdict = prover.prove(patched, patch.loop)
    classification = validity(results, verdict.answer)
    logger.debug(f"{patch}: {classification.value} ({verdict})")
    return PatchVerdict(classification, results, verdict)


class Outcome(str, Enum):
    VALID = "valid"
    PLAUSIBLE = "plausible"
    NO_BUG = "no-termination-bug"
    UNKNOWN = "bug-unknown"
    WRAPPED_ARTIFACT = "wrapped-artifact"
    FALLBACK_UNSUPPORTED = "fallback-unsupported"
    BUDGET_EXPIRED = "budget-expired"
    NO_VALID_PATCH = "no-valid-patch"


@dataclass
class TerminationRepair:
    outcome: Outcome
    loop: int | None = None
    bug: ProverVerdict | None = None
    controls: ControlVarSet | None = None
    p_min: Program | None = None
    traces: list[MonotonicityTrace] = field(default_factory=list)
    rules: list[MutationRule] = field(default_factory=list)
    space: list[TerminationPatch] = field(default_factory=list)
    candidates: list[tuple[TerminationPatch, PatchVerdict]] = field(default_factory=list)
    patch: TerminationPatch | None = None
    verdict: PatchVerdict | None = None
    program: Program | None = None
    passing: int = 0
    failing: int = 0
    reason: str = ""

    @property
    def repaired(self) -> bool:
        return self.outcome in (Outcome.VALID, Outcome.PLAUSIBLE)

    def record(self) -> PatchRecord | None:
        if self.patch is None or self.verdict is None:
            return None
        before, _, after = self.patch.description.partition(" -> ")
        evidence = {"verdict": self.verdict.classification.value}
        if self.verdict.prover is not None:
            evidence["prover"] = str(self.verdict.prover)
        return PatchRecord("termination", f"loop {self.patch.loop}", before, after, evidence)

    def as_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "reason": self.reason,
            "bug": None if self.bug is None else str(self.bug),
            "control_variables": None if self.controls is None else sorted(self.controls.variables),
            "slice": None if self.p_min is None else pretty_print(self.p_min),
            "monotonicity": [str(t) for t in self.traces],
            "rules": [str(r) for r in self.rules],
            "tests": {"passing": self.passing, "failing": self.failing},
            "candidates": [{"edit": str(patch), **verdict.as_dict()} for patch, verdict in self.candidates],
            "patch": None if self.patch is None else str(self.patch),
        }


def _updates(loop: While) -> dict[str, Assign]:
    """Assignments made directly in the loop body, for variables assigned exactly once."""
    assigned = [s for s in loop.body if isinstance(s, Assign)]
    counts = Counter(s.target for s in walk(loop.body) if isinstance(s, Assign))
    return {s.target: s for s in assigned if counts[s.target] == 1}


def repair_termination(
    p: Program,
    tests: Sequence[TestCase],
    budget: float = DEFAULT_BUDGET,
    prover: Prover | None = None,
    clock: Callable[[], float] = time.monotonic,
    fuel: int = DEFAULT_TEST_FUEL,
) -> TerminationRepair:
    """Finds a non-terminating loop and searches its conditional-mutation space for a valid patch.

    Stops at the first valid candidate; when the budget runs out or the space is exhausted, the
    earliest plausible candidate is returned, flagged as such.
    """
    start = clock()
    prover = prover or Prover()
    mode = prover.semantics.mode
    bug = has_termination_bug(p, prover)
    if bug.answer != BugAnswer.YES:
        outcome = Outcome.NO_BUG if bug.answer == BugAnswer.NO else Outcome.UNKNOWN
        return TerminationRepair(outcome, reason=f"termination bug: {bug.answer.value}")
    culprit = bug.culprit
    assert culprit is not None
    report = TerminationRepair(Outcome.NO_VALID_PATCH, culprit.loop, culprit)
    if prover.semantics == Semantics.WRAPPED:
        unbounded = prover.with_semantics(Semantics.MATHEMATICAL).prove(p, culprit.loop)
        if unbounded.answer == Answer.TR:
            report.outcome = Outcome.WRAPPED_ARTIFACT
            report.reason = "the loop only diverges because arithmetic wraps around"
            logger.info(f"loop {culprit.loop}: {report.reason}, not repairing")
            return report
    original = run_tests(p, list(tests), fuel, mode)
    report.passing = sum(r.passed for r in original)
    report.failing = len(original) - report.passing
    report.controls = control_variables(culprit.loop, p)
    report.p_min = slice(p, culprit.loop)
    loop = report.p_min.find(culprit.loop)
    assert isinstance(loop, While)
    probes = [case.inputs for case in tests]
    domain = entry_region(p, culprit.loop, (), prover.ranges, mode)
    observed = entry_region(p, culprit.loop, probes, prover.ranges, mode)
    for stmt in walk(loop.body):
        if isinstance(stmt, Assign) and stmt.target in report.controls:
            trace = classify_monotonic(report.p_min, stmt, loop, probes, mode, domain.get(stmt.target))
            report.traces.append(trace)
    if any(t.classification == Monotonicity.NON_MONOTONIC for t in report.traces):
        report.outcome = Outcome.FALLBACK_UNSUPPORTED
        report.reason = "a control variable is updated non-monotonically"
        return report
    directions = {}
    for trace in report.traces:
        stmt = report.p_min.find(trace.sid)
        assert isinstance(stmt, Assign)
        directions[stmt.target] = trace.direction
    report.rules = applicable_rules(loop.cond, _updates(loop), observed, loop.sid)
    if not report.rules:
        report.outcome = Outcome.FALLBACK_UNSUPPORTED
        report.reason = "no conditional-mutation rule matches the loop"
        return report
    space = build_patch_space(report.p_min, report.rules, {**observed, **domain}, directions)
    report.space = space
    plausible: tuple[TerminationPatch, PatchVerdict] | None = None
    expired = False
    for patch in space:
        if clock() - start >= budget:
            expired = True
            logger.warning(f"loop {culprit.loop}: budget of {budget}s spent after {len(report.candidates)} candidates")
            break
        verdict = classify_patch(patch, tests, prover, p, fuel)
        report.candidates.append((patch, verdict))
        if verdict.classification == Classification.VALID:
            report.outcome, report.patch, report.verdict = Outcome.VALID, patch, verdict
            report.program = patch.apply(p)
            logger.info(f"loop {culprit.loop}: valid patch {patch}")
            return report
        if verdict.classification == Classification.PLAUSIBLE and plausible is None:
            plausible = (patch, verdict)
    if plausible is not None:
        report.outcome, (report.patch, report.verdict) = Outcome.PLAUSIBLE, plausible
        report.program = report.patch.apply(p)
        report.reason = "tests pass but termination could not be proved"
        logger.info(f"loop {culprit.loop}: only a plausible patch {report.patch}")
    elif expired:
        report.outcome = Outcome.BUDGET_EXPIRED
    return report
