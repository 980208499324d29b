import dataclasses

import pytest

from databricks.labs.specfix.lang.parser import parse
from databricks.labs.specfix.overflow.intervals import Interval, parse_ranges
from databricks.labs.specfix.termination.prover import (
    AffineLoop,
    Answer,
    BugAnswer,
    Certificate,
    Prover,
    Semantics,
    affine_shape,
    decide_affine,
    has_termination_bug,
    prove_termination,
)

RANGES = parse_ranges("x=0..20")


def _loop(source: str):
    p = parse(source)
    return p, next(iter(p.loops()))


def test_affine_shape():
    p, loop = _loop("input i8 x;\nwhile (x < 10) x = x + 1;\n")

    assert affine_shape(p, loop) == AffineLoop("x", "<", 10, 1, 1, Interval(-128, 127))
    assert affine_shape(p, loop, RANGES).entry == Interval(0, 20)


def test_affine_shape_takes_a_constant_start():
    p, loop = _loop("input i8 n;\ni8 x;\nx = 3;\nwhile (x > 0) x = 2 * x - 1;\n")

    assert affine_shape(p, loop) == AffineLoop("x", ">", 0, 2, -1, Interval(3, 3))


def test_affine_shape_rejects_other_loops():
    p, loop = _loop("input i8 x, y;\nwhile (x < y) x = x + 1;\n")
    assert affine_shape(p, loop) is None

    p, loop = _loop("input i8 x;\nwhile (x > 0) x = x / 2;\n")
    assert affine_shape(p, loop) is None


@pytest.mark.parametrize(
    "op, bound, a, b, entry, expected",
    [
        ("<", 10, 1, 1, Interval(0, 20), (Answer.TR, None)),
        ("<", 10, 1, -1, Interval(0, 20), (Answer.NT, 0)),
        (">", 0, 1, 1, Interval(-5, 20), (Answer.NT, 1)),
        ("!=", 7, 1, 2, Interval(0, 20), (Answer.NT, 0)),
        ("!=", 7, 1, 2, Interval(1, 1), (Answer.TR, None)),
        ("!=", 7, 1, 1, Interval(0, 20), (Answer.NT, 8)),
        (">", 0, 1, 0, Interval(0, 20), (Answer.NT, 1)),
        ("<", 10, 0, 5, Interval(0, 20), (Answer.NT, 0)),
        ("<", 10, 0, 50, Interval(0, 20), (Answer.TR, None)),
        (">", 0, 2, 0, Interval(0, 20), (Answer.NT, 1)),
        ("<", 100, 2, 0, Interval(1, 20), (Answer.TR, None)),
        ("==", 0, 2, 0, Interval(0, 20), (Answer.NT, 0)),
    ],
)
def test_decide_affine(op, bound, a, b, entry, expected):
    assert decide_affine(AffineLoop("x", op, bound, a, b, entry)) == expected


def test_negative_factors_are_undecided():
    assert decide_affine(AffineLoop("x", "!=", 0, -1, 0, Interval(0, 20))) is None


def test_symbolic_rung():
    p, loop = _loop("input i8 x;\nwhile (x < 10) x = x - 1;\n")

    verdict = Prover(ranges=RANGES).prove(p, loop)

    assert (verdict.answer, verdict.certificate, verdict.rung) == (Answer.NT, Certificate.AFFINE, "symbolic")
    assert verdict.witness == {"x": 0}
    assert str(verdict) == "verdict=NT loop=1 witness=x=0 stem=- cycle=- cert=affine"


def test_lasso_rung():
    p, loop = _loop("input i8 x;\nwhile (x != 0) x = 0 - x;\n")
    prover = Prover(ranges=RANGES)

    verdict = prover.prove(p, loop)

    assert (verdict.answer, verdict.rung) == (Answer.NT, "lasso")
    assert (verdict.witness, verdict.stem, verdict.cycle) == ({"x": 1}, 0, 2)
    assert prover.replays(p, verdict)
    assert not prover.replays(p, dataclasses.replace(verdict, cycle=3))


def test_exhaustive_rung():
    p, loop = _loop("input i8 x;\nwhile (x > 0) x = x / 2;\n")

    verdict = prove_termination(p, loop)

    assert (verdict.answer, verdict.certificate) == (Answer.TR, Certificate.EXHAUSTIVE)


@pytest.mark.parametrize("width", ["i32", "i64"])
def test_sampled_inputs_never_prove_termination(width):
    p, loop = _loop(f"input {width} x;\nwhile (x > 0) x = x / 2;\n")

    verdict = Prover(samples=50).prove(p, loop)

    assert (verdict.answer, verdict.rung) == (Answer.UN, "none")
    assert verdict.witness is None
    assert verdict.detail.startswith("50 inputs")
    assert has_termination_bug(p, Prover(samples=50)).answer == BugAnswer.UNKNOWN


def test_runs_out_of_fuel_without_a_repeat_are_unknown():
    # the slice keeps the first loop, so the second one is not affine on its own
    p = parse("input i8 x;\ni8 y;\ny = 0;\nwhile (y < 3) y = y + 1;\nwhile (x > 0) x = x + 1;\n")

    verdict = Prover(ranges=RANGES, fuel=500).prove(p, 4)

    assert verdict.answer == Answer.UN


def test_semantics_change_the_answer():
    p, loop = _loop("input i8 x;\nwhile (x > 0) x = x + 1;\n")

    assert prove_termination(p, loop).answer == Answer.NT
    wrapped = prove_termination(p, loop, Semantics.WRAPPED)
    assert (wrapped.answer, wrapped.certificate) == (Answer.TR, Certificate.EXHAUSTIVE)


def test_invocations_are_counted():
    p, loop = _loop("input i8 x;\nwhile (x < 10) x = x + 1;\n")
    prover = Prover(ranges=RANGES)

    prover.prove(p, loop)
    prover.prove(p, loop)

    assert prover.invocations == 2
    assert not prover.contradicts(p, loop)


def test_only_loops_are_proved():
    p = parse("input i8 x;\nx = x + 1;\n")

    with pytest.raises(ValueError, match="not a loop"):
        Prover().prove(p, 1)


def test_termination_bug_stops_at_the_first_diverging_loop():
    p = parse("input i8 x;\ni8 y;\ny = 0;\nwhile (y < 3) y = y + 1;\nwhile (x != 0) x = 0 - x;\n")

    bug = has_termination_bug(p, Prover(ranges=RANGES))

    assert bug.answer == BugAnswer.YES
    assert [v.answer for v in bug.verdicts] == [Answer.TR, Answer.NT]
    assert str(bug) == "yes loop=4 witness=x=1"


def test_no_termination_bug():
    p = parse("input i8 x;\nwhile (x < 10) x = x + 1;\nwhile (x > 0) x = x - 1;\n")

    bug = has_termination_bug(p, Prover(ranges=RANGES))

    assert bug.answer == BugAnswer.NO
    assert bug.witness is None
