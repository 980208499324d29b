from __future__ import annotations

from enum import Enum
from functools import total_ordering


class WidthExhausted(ValueError):
    """Raised when a variable would need to grow past the widest integer type."""


@total_ordering
class IntWidth(Enum):
    """Two's-complement signed integer widths, ordered from narrowest to widest."""

    I8 = 8
    I16 = 16
    I32 = 32
    I64 = 64

    @property
    def bits(self) -> int:
        return self.value

    @property
    def intmax(self) -> int:
        return 2 ** (self.bits - 1) - 1

    @property
    def intmin(self) -> int:
        return -(2 ** (self.bits - 1))

    @property
    def keyword(self) -> str:
        return self.name.lower()

    @property
    def size(self) -> int:
        """Number of distinct values of this width."""
        return 2**self.bits

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, IntWidth):
            return NotImplemented
        return self.bits < other.bits

    def fits(self, value: int) -> bool:
        return self.intmin <= value <= self.intmax

    def wrap(self, value: int) -> int:
        """Reduce an unbounded integer to this width with wraparound."""
        value &= self.size - 1
        if value > self.intmax:
            value -= self.size
        return value

    def wider(self) -> IntWidth:
        """Returns the next wider width, raising WidthExhausted past I64."""
        ordered = list(IntWidth)
        position = ordered.index(self)
        if position + 1 == len(ordered):
            raise WidthExhausted(f"no integer type wider than {self.keyword}")
        return ordered[position + 1]

    @classmethod
    def parse(cls, keyword: str) -> IntWidth:
        try:
            return cls[keyword.strip().upper()]
        except KeyError as e:
            raise ValueError(f"unknown width: {keyword}") from e

    @classmethod
    def smallest_fitting(cls, value: int) -> IntWidth:
        for width in cls:
            if width.fits(value):
                return width
        raise WidthExhausted(f"{value} does not fit any supported integer type")
