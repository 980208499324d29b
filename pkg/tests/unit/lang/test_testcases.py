import pytest

from databricks.labs.specfix.lang.domain import (
    InputSpaceTooLarge,
    defaults,
    enumerate_inputs,
    input_domain,
    space_size,
)
from databricks.labs.specfix.lang.parser import parse
from databricks.labs.specfix.lang.testcases import (
    TestCase,
    TestFileError,
    TestStatus,
    load_tests,
    parse_tests,
    run_test,
    run_tests,
)
from databricks.labs.specfix.overflow.intervals import Interval, parse_ranges

COUNT_UP = parse("input i8 x;\nwhile (x < 10) x = x + 1;\n")


def test_parse_tests():
    cases = parse_tests("# header\nin: x=3 ; out: x=10\n\nin: x=-2,y=4 ; out: \n")

    assert cases == [TestCase({"x": 3}, {"x": 10}), TestCase({"x": -2, "y": 4}, {})]
    assert cases[1].line == 4
    assert str(cases[0]) == "in: x=3 ; out: x=10"


@pytest.mark.parametrize(
    "text, message",
    [
        ("x=3 ; out: x=1", "line 1: expected"),
        ("in: x=3", "line 1: expected"),
        ("in: x=three ; out: x=1", "line 1: not an integer"),
        ("in: x ; out: x=1", "line 1: not an assignment"),
    ],
)
def test_malformed_tests(text, message):
    with pytest.raises(TestFileError, match=message):
        parse_tests(text)


def test_load_tests(make_test_file):
    path = make_test_file(cases="in: x=0 ; out: x=10\nin: x=12 ; out: x=12\n")

    assert len(load_tests(path)) == 2


def test_run_tests():
    results = run_tests(
        COUNT_UP,
        [
            TestCase({"x": 0}, {"x": 10}),
            TestCase({"x": 0}, {"x": 11}),
            TestCase({"x": 12}, {"x": 12}),
        ],
    )

    assert [r.status for r in results] == [TestStatus.PASSED, TestStatus.FAILED, TestStatus.PASSED]
    assert results[1].detail == "x=10 (expected 11)"


def test_hanging_test_stops_at_the_first_repeated_state():
    p = parse("input i8 x;\nwhile (x > 0) x = x;\n")

    result = run_test(p, TestCase({"x": 1}, {"x": 0}))

    assert result.status == TestStatus.HANGING
    assert "cycles" in result.detail


def test_diverging_test_runs_out_of_fuel():
    p = parse("input i8 x;\nwhile (x > 0) x = x + 1;\n")

    result = run_test(p, TestCase({"x": 1}, {"x": 0}), fuel=1_000)

    assert result.status == TestStatus.HANGING


def test_erroring_tests():
    p = parse("input i8 a, b;\ni8 c;\nc = a / b;\n")

    assert run_test(p, TestCase({"a": 1, "b": 0}, {})).status == TestStatus.ERROR
    assert run_test(p, TestCase({"a": 1}, {})).status == TestStatus.ERROR


def test_input_domain_and_enumeration():
    p = parse("input i8 a, b;\ni16 c;\nc = a + b;\n")
    domain = input_domain(p, parse_ranges("a=0..2,b=-1..0"))

    assert domain == {"a": Interval(0, 2), "b": Interval(-1, 0)}
    assert space_size(domain) == 6
    assert list(enumerate_inputs(domain))[:3] == [{"a": 0, "b": -1}, {"a": 0, "b": 0}, {"a": 1, "b": -1}]
    assert space_size(input_domain(p)) == 65536


def test_enumeration_refuses_large_spaces():
    p = parse("input i16 a, b;\ni16 c;\nc = a + b;\n")

    with pytest.raises(InputSpaceTooLarge):
        enumerate_inputs(input_domain(p), limit=1000)


def test_ranges_must_fit_the_declared_width():
    p = parse("input i8 a;\ni8 b;\nb = a;\n")

    with pytest.raises(ValueError, match="exceeds i8"):
        input_domain(p, parse_ranges("a=0..300"))


def test_defaults_pick_the_value_closest_to_zero():
    p = parse("input i8 a, b, c;\ni8 d;\nd = a;\n")

    assert defaults(p, {"a": 5}, parse_ranges("b=3..9,c=-9..-2")) == {"a": 5, "b": 3, "c": -2}
