from __future__ import annotations

import itertools
import math
from collections.abc import Iterator, Mapping

from databricks.labs.specfix.lang.ast import Program
from databricks.labs.specfix.overflow.intervals import Interval

EXHAUSTIVE_LIMIT = 2**24


class InputSpaceTooLarge(ValueError):
    """Enumerating every input valuation would exceed the configured limit."""


def input_domain(
    p: Program, ranges: Mapping[str, Interval] | None = None, names: tuple[str, ...] | None = None
) -> dict[str, Interval]:
    """Declared range of every input, defaulting to the full range of its width."""
    ranges = ranges or {}
    widths = p.widths
    selected = p.inputs if names is None else tuple(n for n in p.inputs if n in names)
    out = {}
    for name in selected:
        full = Interval.of(widths[name])
        declared = ranges.get(name, full)
        if not (full.lo <= declared.lo and declared.hi <= full.hi):
            raise ValueError(f"range {name}={declared} exceeds {widths[name].keyword}")
        out[name] = declared
    return out


def space_size(domain: Mapping[str, Interval]) -> int:
    return math.prod(interval.size for interval in domain.values())


def enumerate_inputs(domain: Mapping[str, Interval], limit: int = EXHAUSTIVE_LIMIT) -> Iterator[dict[str, int]]:
    """Every valuation of `domain`, lexicographically by declaration order and value; the size check is eager."""
    size = space_size(domain)
    if size > limit:
        raise InputSpaceTooLarge(f"{size} input valuations exceed the limit of {limit}")
    return _product(dict(domain))


def _product(domain: dict[str, Interval]) -> Iterator[dict[str, int]]:
    names = list(domain)
    for values in itertools.product(*(domain[name].values() for name in names)):
        yield dict(zip(names, values))


def defaults(
    p: Program, valuation: Mapping[str, int], domain: Mapping[str, Interval] | None = None
) -> dict[str, int]:
    """Completes a partial valuation, using the in-range value closest to zero for the remaining inputs."""
    full = input_domain(p, domain)
    out = {}
    for name in p.inputs:
        interval = full[name]
        out[name] = valuation.get(name, min(max(0, interval.lo), interval.hi))
    return out
