import pytest

from databricks.labs.specfix.lang.parser import parse, parse_expr
from databricks.labs.specfix.lang.printer import print_expr
from databricks.labs.specfix.lang.testcases import TestCase, TestResult, TestStatus, parse_tests
from databricks.labs.specfix.overflow.intervals import Interval
from databricks.labs.specfix.repair.termination import (
    Classification,
    DirectionUnachievable,
    EditKind,
    EmptyPatchSpace,
    Outcome,
    RuleId,
    applicable_rules,
    build_patch_space,
    classify_patch,
    consistent,
    monotone_mutate,
    repair_termination,
    validity,
)
from databricks.labs.specfix.termination.monotonicity import Direction
from databricks.labs.specfix.termination.prover import Answer, Prover, ProverVerdict, Semantics

WRONG_WAY = parse("input i8 x;\nwhile (x < 10) x = x - 1;\n")
WRONG_WAY_TESTS = parse_tests("in: x=0 ; out: x=10\nin: x=3 ; out: x=10\nin: x=15 ; out: x=15\n")
RANGES = {"x": Interval(0, 20)}


def _printed(exprs):
    return [print_expr(e) for e in exprs]


def test_monotone_mutations():
    assert _printed(monotone_mutate(parse_expr("x - 1"), Direction.INCREASING, "x")) == ["x + 1", "x + 2", "x * 2"]
    assert _printed(monotone_mutate(parse_expr("x - 1"), Direction.INCREASING, "x", Interval(0, 20))) == [
        "x + 1",
        "x + 2",
    ]
    assert _printed(monotone_mutate(parse_expr("x * 2"), Direction.DECREASING, "x", Interval(1, 20))) == [
        "x - 2",
        "x - 1",
        "x / 2",
    ]
    assert _printed(monotone_mutate(parse_expr("x + 1"), Direction.INCREASING, "x", Interval(0, 20))) == ["x + 2"]


def test_division_needs_the_loop_to_stop_at_zero():
    mutants = monotone_mutate(parse_expr("x * 2"), Direction.DECREASING, "x", Interval(1, 20), stops_at_zero=False)

    assert _printed(mutants) == ["x - 2", "x - 1"]


def test_update_must_mention_the_variable():
    with pytest.raises(DirectionUnachievable):
        monotone_mutate(parse_expr("y + 1"), Direction.INCREASING, "x")


@pytest.mark.parametrize(
    "op, direction, expected",
    [
        ("<", Direction.INCREASING, True),
        ("<=", Direction.DECREASING, False),
        (">", Direction.DECREASING, True),
        (">=", Direction.INCREASING, False),
        ("==", Direction.DECREASING, True),
        ("<", None, True),
    ],
)
def test_consistent(op, direction, expected):
    assert consistent(op, direction) == expected


def _rules(p, regions):
    loop = p.find(1)
    return applicable_rules(loop.cond, {"x": loop.body[0]}, regions, loop.sid)


def test_applicable_rules():
    rules = _rules(WRONG_WAY, {"x": Interval(0, 15)})

    assert [str(r) for r in rules] == [
        "R2-update-increasing: x update increasing",
        "R3-cond-from-update: x ~ in {<, <=, ==}",
    ]


def test_condition_rule_needs_a_known_sign():
    assert [r.rule for r in _rules(WRONG_WAY, {"x": Interval(-5, 15)})] == [RuleId.R2]


def test_negated_atoms_only_mutate_the_update():
    p = parse("input i8 x;\nwhile (!(x >= 10)) x = x - 1;\n")

    assert [r.rule for r in _rules(p, {"x": Interval(0, 15)})] == [RuleId.R2]


def test_inequality_guards_have_no_rules():
    p = parse("input i8 x;\nwhile (x != 7) x = x + 2;\n")

    assert not _rules(p, {"x": Interval(0, 20)})


def test_patch_space_order():
    rules = _rules(WRONG_WAY, {"x": Interval(0, 15)})

    space = build_patch_space(WRONG_WAY, rules, RANGES, {"x": Direction.DECREASING})

    # subtraction allows `< <= ==` and a decreasing x rules out `<=`, so `x > 10` and `x >= 10` never show up
    assert [str(patch) for patch in space] == [
        "update x - 1 -> x + 1",
        "update x - 1 -> x + 2",
        "cond x < 10 -> x == 10",
        "update x - 1 -> x + 1; cond x < 10 -> x == 10",
        "update x - 1 -> x + 2; cond x < 10 -> x == 10",
    ]
    assert [patch.kind for patch in space] == [
        EditKind.UPDATE,
        EditKind.UPDATE,
        EditKind.CONDITION,
        EditKind.BOTH,
        EditKind.BOTH,
    ]


def test_empty_patch_space():
    with pytest.raises(EmptyPatchSpace):
        build_patch_space(WRONG_WAY, [])


def _results(*statuses):
    return [TestResult(TestCase({}, {}), status) for status in statuses]


def test_validity():
    assert validity(_results(TestStatus.PASSED), Answer.TR) == Classification.VALID
    assert validity(_results(TestStatus.PASSED), Answer.UN) == Classification.PLAUSIBLE
    assert validity(_results(TestStatus.PASSED), Answer.NT) == Classification.INVALID
    assert validity(_results(TestStatus.PASSED, TestStatus.HANGING), None) == Classification.INVALID
    with pytest.raises(ValueError):
        validity(_results(TestStatus.PASSED), None)


def test_failing_candidates_never_reach_the_prover(counting_prover):
    prover = counting_prover(ranges=RANGES)
    rules = _rules(WRONG_WAY, {"x": Interval(0, 15)})
    patch = build_patch_space(WRONG_WAY, rules, RANGES, {"x": Direction.DECREASING})[1]

    verdict = classify_patch(patch, WRONG_WAY_TESTS, prover)

    assert verdict.classification == Classification.INVALID
    assert verdict.prover is None
    assert prover.invocations == 0


def test_repairs_a_loop_going_the_wrong_way(counting_prover, mocker):
    prover = counting_prover(ranges=RANGES)
    spy = mocker.spy(prover, "prove")

    report = repair_termination(WRONG_WAY, WRONG_WAY_TESTS, prover=prover)

    assert report.outcome == Outcome.VALID
    assert str(report.patch) == "update x - 1 -> x + 1"
    assert report.program is not None
    assert print_expr(report.program.find(2).expr) == "x + 1"
    assert (report.passing, report.failing) == (1, 2)
    # one call finds the bug, one proves the first candidate
    assert prover.invocations == 2
    assert spy.call_count == 2
    record = report.record()
    assert record is not None
    assert (record.target, record.before, record.after) == ("loop 1", "update x - 1", "x + 1")
    assert record.evidence["verdict"] == "valid"


def test_no_candidate_passes_the_tests(counting_prover):
    prover = counting_prover(ranges=RANGES)
    tests = parse_tests("in: x=0 ; out: x=99\nin: x=15 ; out: x=15\n")

    report = repair_termination(WRONG_WAY, tests, prover=prover)

    assert report.outcome == Outcome.NO_VALID_PATCH
    assert len(report.candidates) == 5
    assert all(verdict.classification == Classification.INVALID for _, verdict in report.candidates)
    assert prover.invocations == 1


def test_unsupported_guard(counting_prover):
    p = parse("input i8 x;\nwhile (x != 7) x = x + 2;\n")
    tests = parse_tests("in: x=1 ; out: x=7\nin: x=7 ; out: x=7\n")

    report = repair_termination(p, tests, prover=counting_prover(ranges=RANGES))

    assert report.outcome == Outcome.FALLBACK_UNSUPPORTED
    assert report.reason == "no conditional-mutation rule matches the loop"


def test_constant_update_is_not_monotonic(counting_prover):
    p = parse("input i8 x;\nwhile (x > 0) x = x;\n")

    report = repair_termination(p, parse_tests("in: x=3 ; out: x=0\n"), prover=counting_prover(ranges=RANGES))

    assert report.outcome == Outcome.FALLBACK_UNSUPPORTED
    assert report.reason == "a control variable is updated non-monotonically"


def test_terminating_program_needs_no_repair(counting_prover):
    p = parse("input i8 x;\nwhile (x < 10) x = x + 1;\n")

    report = repair_termination(p, [], prover=counting_prover(ranges=RANGES))

    assert report.outcome == Outcome.NO_BUG
    assert not report.repaired


def test_unproved_candidate_is_plausible(mocker):
    prover = Prover(ranges=RANGES)
    mocker.patch.object(
        prover,
        "prove",
        side_effect=[ProverVerdict(Answer.NT, 1, {"x": 0}), ProverVerdict(Answer.UN, 1)],
    )

    report = repair_termination(WRONG_WAY, WRONG_WAY_TESTS, prover=prover)

    assert report.outcome == Outcome.PLAUSIBLE
    assert report.repaired
    assert str(report.patch) == "update x - 1 -> x + 1"
    assert report.reason == "tests pass but termination could not be proved"


def test_budget_expiry(mocker):
    clock = mocker.Mock(side_effect=[0.0, 10.0])

    report = repair_termination(WRONG_WAY, WRONG_WAY_TESTS, budget=5, prover=Prover(ranges=RANGES), clock=clock)

    assert report.outcome == Outcome.BUDGET_EXPIRED
    assert not report.candidates


def test_wrapped_divergence_is_not_repaired():
    # the guard compares at i16, so an i8 counter wraps around before reaching it
    p = parse("input i8 x;\nwhile (x < 200) x = x + 1;\n")

    report = repair_termination(p, [], prover=Prover(Semantics.WRAPPED))

    assert report.outcome == Outcome.WRAPPED_ARTIFACT
