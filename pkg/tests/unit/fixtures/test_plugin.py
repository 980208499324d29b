INLINE = """
from databricks.labs.specfix.lang.parser import parse
from databricks.labs.specfix.lang.printer import pretty_print
from databricks.labs.specfix.lang.testcases import load_tests
from databricks.labs.specfix.overflow.intervals import Interval
from databricks.labs.specfix.repair.termination import Outcome, repair_termination


def test_some(make_program_file, make_test_file, make_random_program, counting_prover):
    program = make_random_program(statements=3)
    path = make_program_file(source=program)
    assert parse(path.read_text()) == parse(pretty_print(program))

    loop = parse("input i8 x;\\nwhile (x < 10) x = x - 1;\\n")
    tests = load_tests(make_test_file(cases="in: x=0 ; out: x=10\\nin: x=3 ; out: x=10\\nin: x=15 ; out: x=15\\n"))
    prover = counting_prover(ranges={"x": Interval(0, 20)})
    assert repair_termination(loop, tests, prover=prover).outcome == Outcome.VALID


def test_seed(specfix_seed):
    assert specfix_seed == 1234
"""


def test_a_thing(pytester):
    pytester.makepyfile(INLINE)
    result = pytester.runpytest("--specfix-seed", "1234")
    result.assert_outcomes(passed=2)
