from __future__ import annotations

import re
from dataclasses import dataclass

from databricks.labs.specfix.lang.interpreter import trunc_div
from databricks.labs.specfix.lang.widths import IntWidth

_RANGE = re.compile(r"^\s*([A-Za-z][A-Za-z0-9_]*)\s*=\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$")


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def of(cls, width: IntWidth) -> Interval:
        return cls(width.intmin, width.intmax)

    @classmethod
    def point(cls, value: int) -> Interval:
        return cls(value, value)

    def __str__(self) -> str:
        return f"{self.lo}..{self.hi}"

    def __contains__(self, value: object) -> bool:
        return isinstance(value, int) and self.lo <= value <= self.hi

    @property
    def size(self) -> int:
        # can exceed sys.maxsize
        return self.hi - self.lo + 1

    def values(self) -> range:
        return range(self.lo, self.hi + 1)

    def hull(self, other: Interval) -> Interval:
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def within(self, width: IntWidth) -> bool:
        return width.intmin <= self.lo and self.hi <= width.intmax

    def clamp(self, width: IntWidth) -> Interval:
        lo = min(max(self.lo, width.intmin), width.intmax)
        hi = max(min(self.hi, width.intmax), width.intmin)
        return Interval(lo, hi)

    @property
    def positive(self) -> bool:
        return self.lo > 0

    @property
    def non_negative(self) -> bool:
        return self.lo >= 0

    def apply(self, op: str, other: Interval) -> Interval:
        """Outward-sound result of `self op other` over unbounded integers.

        Division ignores a zero divisor, which is a runtime error rather than a result.
        """
        if op == "+":
            return Interval(self.lo + other.lo, self.hi + other.hi)
        if op == "-":
            return Interval(self.lo - other.hi, self.hi - other.lo)
        if op == "*":
            corners = [a * b for a in (self.lo, self.hi) for b in (other.lo, other.hi)]
            return Interval(min(corners), max(corners))
        if op == "/":
            parts = []
            if other.lo < 0:
                parts.append((other.lo, min(other.hi, -1)))
            if other.hi > 0:
                parts.append((max(other.lo, 1), other.hi))
            if not parts:
                # only a zero divisor: every run fails before producing a value
                return Interval.point(0)
            corners = [trunc_div(a, b) for lo, hi in parts for a in (self.lo, self.hi) for b in (lo, hi)]
            return Interval(min(corners), max(corners))
        raise ValueError(f"unknown arithmetic operator: {op}")


def parse_ranges(text: str) -> dict[str, Interval]:
    """Parses `a=1..5,b=-3..7`."""
    out: dict[str, Interval] = {}
    for chunk in text.split(","):
        if not chunk.strip():
            continue
        match = _RANGE.match(chunk)
        if match is None:
            raise ValueError(f"not a range: {chunk.strip()}")
        name, lo, hi = match.groups()
        out[name] = Interval(int(lo), int(hi))
    return out


def format_ranges(ranges: dict[str, Interval]) -> str:
    return ",".join(f"{name}={interval}" for name, interval in sorted(ranges.items()))
