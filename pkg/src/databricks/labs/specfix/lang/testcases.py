"""Test-case files: one `in: x=3,y=5 ; out: z=8` per line.

`out:` lists the expected final values of a projection of the store; a test passes when
the program halts and every listed variable holds its expected value.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from databricks.labs.specfix.lang.ast import Program
from databricks.labs.specfix.lang.interpreter import LassoTracer, Mode, RunOutcome, StateRevisit, Status, run

logger = logging.getLogger(__name__)

DEFAULT_TEST_FUEL = 100_000


class TestFileError(ValueError):
    __test__ = False


def parse_valuation(text: str) -> dict[str, int]:
    out: dict[str, int] = {}
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise TestFileError(f"not an assignment: {chunk}")
        name, value = chunk.split("=", 1)
        try:
            out[name.strip()] = int(value.strip())
        except ValueError as e:
            raise TestFileError(f"not an integer: {chunk}") from e
    return out


def format_valuation(valuation: Mapping[str, int]) -> str:
    return ",".join(f"{k}={v}" for k, v in valuation.items())


@dataclass(frozen=True)
class TestCase:
    __test__ = False

    inputs: Mapping[str, int]
    expected: Mapping[str, int]
    line: int = field(default=0, compare=False)

    def __str__(self) -> str:
        return f"in: {format_valuation(self.inputs)} ; out: {format_valuation(self.expected)}"


def parse_tests(text: str) -> list[TestCase]:
    cases = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("//"):
            continue
        parts = [part.strip() for part in line.split(";")]
        if len(parts) != 2 or not parts[0].startswith("in:") or not parts[1].startswith("out:"):
            raise TestFileError(f"line {number}: expected `in: ... ; out: ...`, got {line!r}")
        try:
            inputs = parse_valuation(parts[0][3:])
            expected = parse_valuation(parts[1][4:])
        except TestFileError as e:
            raise TestFileError(f"line {number}: {e}") from None
        cases.append(TestCase(inputs, expected, number))
    return cases


def load_tests(path: Path) -> list[TestCase]:
    cases = parse_tests(path.read_text(encoding="utf8"))
    logger.debug(f"loaded {len(cases)} test cases from {path}")
    return cases


class TestStatus(str, Enum):
    __test__ = False

    PASSED = "pass"
    FAILED = "fail"
    HANGING = "hang"
    ERROR = "error"


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    case: TestCase
    status: TestStatus
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == TestStatus.PASSED


def _compare(case: TestCase, outcome: RunOutcome) -> TestResult:
    if outcome.status == Status.FUEL_EXHAUSTED:
        return TestResult(case, TestStatus.HANGING, f"no halt within {outcome.steps} steps")
    if outcome.status == Status.OVERFLOW_TRAP:
        return TestResult(case, TestStatus.ERROR, f"overflow at statement {outcome.trap_site}")
    if outcome.status == Status.RUNTIME_ERROR:
        return TestResult(case, TestStatus.ERROR, outcome.error or "runtime error")
    mismatches = []
    for name, want in case.expected.items():
        got = outcome.store.get(name)
        if got != want:
            mismatches.append(f"{name}={got} (expected {want})")
    if mismatches:
        return TestResult(case, TestStatus.FAILED, ", ".join(mismatches))
    return TestResult(case, TestStatus.PASSED)


def run_test(p: Program, case: TestCase, fuel: int = DEFAULT_TEST_FUEL, mode: Mode = Mode.MATHEMATICAL) -> TestResult:
    """Runs one test, reporting a hang as soon as any loop head repeats a whole-store state."""
    try:
        outcome = run(p, case.inputs, fuel, mode, LassoTracer())
    except StateRevisit as e:
        return TestResult(case, TestStatus.HANGING, f"loop {e.sid} cycles every {e.cycle} iterations")
    except ValueError as e:
        return TestResult(case, TestStatus.ERROR, str(e))
    return _compare(case, outcome)


def run_tests(
    p: Program, cases: list[TestCase], fuel: int = DEFAULT_TEST_FUEL, mode: Mode = Mode.MATHEMATICAL
) -> list[TestResult]:
    return [run_test(p, case, fuel, mode) for case in cases]
