"""Overflow rules for the binary operators `+`, `-` and `*`.

Every rule is a precondition on the operands: it decides whether `x op y` leaves the
range of a width without computing the result. Two rule sets are shipped. The
`paper` set is the textbook formulation, kept verbatim including its gaps for
subtraction and for negative factors; the `corrected` set characterizes overflow
exactly and is the one every other component relies on.
"""

from __future__ import annotations

from collections import Counter
from enum import Enum
from fractions import Fraction

from databricks.labs.specfix.lang.widths import IntWidth

RULE_OPERATORS = ("+", "-", "*")


class OverflowKind(str, Enum):
    IO = "IO"
    IU = "IU"
    NONE = "none"


class RuleMode(str, Enum):
    PAPER = "paper"
    CORRECTED = "corrected"


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _paper(op: str, x: int, y: int, w: IntWidth) -> OverflowKind:
    hi, lo = w.intmax, w.intmin
    match op:
        case "+":
            if x > 0 and y > hi - x:
                return OverflowKind.IO
            if x < 0 and y < lo - x:
                return OverflowKind.IU
        case "-":
            if x > 0 and y < x - hi:
                return OverflowKind.IO
            if x < 0 and y < lo - x:
                return OverflowKind.IU
        case "*":
            if x > 0 and y > Fraction(hi, x):
                return OverflowKind.IO
            if x < 0 and y < Fraction(lo, x):
                return OverflowKind.IU
        case _:
            raise ValueError(f"no overflow rule for operator {op}")
    return OverflowKind.NONE


def _corrected(op: str, x: int, y: int, w: IntWidth) -> OverflowKind:
    hi, lo = w.intmax, w.intmin
    match op:
        case "+":
            if x > 0 and y > hi - x:
                return OverflowKind.IO
            if x < 0 and y < lo - x:
                return OverflowKind.IU
        case "-":
            if y < 0 and x > hi + y:
                return OverflowKind.IO
            if y > 0 and x < lo + y:
                return OverflowKind.IU
        case "*":
            # y > hi/x and friends, compared on integers: y > a/b <=> y > floor(a/b) for b > 0
            if x > 0:
                if y > hi // x:
                    return OverflowKind.IO
                if y < _ceil_div(lo, x):
                    return OverflowKind.IU
            elif x < 0:
                if y < _ceil_div(hi, x):
                    return OverflowKind.IO
                if y > lo // x:
                    return OverflowKind.IU
        case _:
            raise ValueError(f"no overflow rule for operator {op}")
    return OverflowKind.NONE


def check_op(op: str, x: int, y: int, w: IntWidth, rule_mode: RuleMode = RuleMode.CORRECTED) -> OverflowKind:
    """Classifies `x op y` at width `w` before the operation is performed."""
    if rule_mode == RuleMode.PAPER:
        return _paper(op, x, y, w)
    return _corrected(op, x, y, w)


def oracle(op: str, x: int, y: int, w: IntWidth) -> OverflowKind:
    """Computes the exact result and compares it against the bounds of `w`."""
    match op:
        case "+":
            result = x + y
        case "-":
            result = x - y
        case "*":
            result = x * y
        case _:
            raise ValueError(f"no overflow rule for operator {op}")
    if result > w.intmax:
        return OverflowKind.IO
    if result < w.intmin:
        return OverflowKind.IU
    return OverflowKind.NONE


def rule_disagreements(w: IntWidth = IntWidth.I8) -> dict[str, dict[str, int]]:
    """Counts, per operator, the operand pairs at `w` where the rule sets and the oracle disagree.

    `paper:IO` and friends break the paper-vs-corrected count down by the kind the corrected
    rules report, so a missed underflow shows up as `paper:IU`.
    """
    if w > IntWidth.I16:
        raise ValueError(f"refusing to enumerate all operand pairs of {w.keyword}")
    values = range(w.intmin, w.intmax + 1)
    out: dict[str, dict[str, int]] = {}
    for op in RULE_OPERATORS:
        counts: Counter[str] = Counter()
        for x in values:
            for y in values:
                expected = oracle(op, x, y, w)
                corrected = _corrected(op, x, y, w)
                if corrected != expected:
                    counts["corrected-vs-oracle"] += 1
                if _paper(op, x, y, w) != corrected:
                    counts["paper-vs-corrected"] += 1
                    counts[f"paper:{corrected.value}"] += 1
        out[op] = {
            "paper-vs-corrected": counts["paper-vs-corrected"],
            "corrected-vs-oracle": counts["corrected-vs-oracle"],
            "paper:IO": counts["paper:IO"],
            "paper:IU": counts["paper:IU"],
            "paper:none": counts["paper:none"],
        }
    return out
