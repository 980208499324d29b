"""Equivalence of arithmetic expressions over the mathematical integers.

Expressions over `+`, `-` and `*` are polynomials with integer coefficients, and two of
them agree on every integer point exactly when their expanded forms are identical.
Expansion is delegated to sympy; the result is kept as a plain canonical term map so it
can be compared, hashed and printed without sympy objects leaking out.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass
from functools import reduce

import sympy as sp

from databricks.labs.specfix.lang.ast import BinOp, Const, Expr, Group, Var, make_binary, variables
from databricks.labs.specfix.lang.interpreter import evaluate

logger = logging.getLogger(__name__)

GRID_LIMIT = 10**7

Monomial = tuple[tuple[str, int], ...]


class UnsupportedOperator(ValueError):
    """The expression divides, which polynomial normal forms cannot represent."""


class GridTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Polynomial:
    """Canonical term map: monomials sorted by variable, no zero coefficients."""

    terms: tuple[tuple[Monomial, int], ...]

    @classmethod
    def of(cls, terms: Mapping[Monomial, int]) -> Polynomial:
        return cls(tuple(sorted((m, c) for m, c in terms.items() if c != 0)))

    def as_dict(self) -> dict[Monomial, int]:
        return dict(self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def variables(self) -> list[str]:
        return sorted({name for monomial, _ in self.terms for name, _ in monomial})

    def degree(self, name: str) -> int:
        return max((dict(m).get(name, 0) for m, _ in self.terms), default=0)

    def __sub__(self, other: Polynomial) -> Polynomial:
        out = self.as_dict()
        for monomial, coefficient in other.terms:
            out[monomial] = out.get(monomial, 0) - coefficient
        return Polynomial.of(out)

    def evaluate(self, valuation: Mapping[str, int]) -> int:
        return sum(c * math.prod(valuation[n] ** k for n, k in m) for m, c in self.terms)

    def to_expr(self) -> Expr:
        """Sum of products, written with the operators of the language."""
        if self.is_zero:
            return Const(0)
        out: Expr | None = None
        for monomial, coefficient in self.terms:
            factors: list[Expr] = [Var(n) for n, k in monomial for _ in range(k)]
            magnitude = abs(coefficient)
            if magnitude != 1 or not factors:
                factors.insert(0, Const(magnitude))
            term = reduce(lambda left, right: make_binary("*", left, right), factors)
            if out is None:
                out = term if coefficient > 0 else make_binary("-", Const(0), term)
            else:
                out = make_binary("+" if coefficient > 0 else "-", out, term)
        assert out is not None
        return out

    def __str__(self) -> str:
        if self.is_zero:
            return "0"
        parts = []
        for monomial, coefficient in self.terms:
            power = "*".join(n if k == 1 else f"{n}^{k}" for n, k in monomial)
            parts.append(f"{coefficient}*{power}" if power else str(coefficient))
        return " + ".join(parts)


def _to_sympy(e: Expr, symbols: dict[str, sp.Symbol]) -> sp.Expr:
    match e:
        case Const(value):
            return sp.Integer(value)
        case Var(name):
            return symbols[name]
        case Group(inner):
            return _to_sympy(inner, symbols)
        case BinOp("/", _, _):
            raise UnsupportedOperator("division has no polynomial normal form")
        case BinOp(op, left, right):
            x = _to_sympy(left, symbols)
            y = _to_sympy(right, symbols)
            if op == "+":
                return x + y
            if op == "-":
                return x - y
            return x * y
    raise TypeError(f"not an expression: {e!r}")


def normalize(e: Expr) -> Polynomial:
    names = sorted(variables(e))
    symbols = {name: sp.Symbol(name, integer=True) for name in names}
    expanded = sp.expand(_to_sympy(e, symbols))
    if not names:
        return Polynomial.of({(): int(expanded)})
    poly = sp.Poly(expanded, *(symbols[n] for n in names))
    terms: dict[Monomial, int] = {}
    for exponents, coefficient in poly.terms():
        monomial = tuple((n, k) for n, k in zip(names, exponents) if k > 0)
        terms[monomial] = int(coefficient)
    return Polynomial.of(terms)


@dataclass(frozen=True)
class EquivalenceResult:
    equivalent: bool
    witness: Mapping[str, int] | None = None

    def __bool__(self) -> bool:
        return self.equivalent

    def __str__(self) -> str:
        if self.equivalent:
            return "equivalent"
        assert self.witness is not None
        return "inequivalent witness=" + ",".join(f"{k}={v}" for k, v in self.witness.items())


def _first_nonzero(difference: Polynomial, names: list[str]) -> dict[str, int]:
    # a nonzero polynomial cannot vanish on a grid with one more point per variable than its degree
    axes = [range(difference.degree(name) + 1) for name in names]
    for point in itertools.product(*axes):
        valuation = dict(zip(names, point))
        if difference.evaluate(valuation) != 0:
            return valuation
    raise AssertionError(f"nonzero polynomial vanished on its grid: {difference}")


def equivalent(e1: Expr, e2: Expr) -> EquivalenceResult:
    """Compares normal forms; on a difference, returns the first small point where the values differ."""
    difference = normalize(e1) - normalize(e2)
    if difference.is_zero:
        return EquivalenceResult(True)
    names = sorted(variables(e1) | variables(e2))
    witness = _first_nonzero(difference, names)
    logger.debug(f"expressions differ by {difference} at {witness}")
    return EquivalenceResult(False, witness)


def max_degree(e1: Expr, e2: Expr) -> int:
    """Largest per-variable degree of either expression."""
    p1, p2 = normalize(e1), normalize(e2)
    names = set(p1.variables) | set(p2.variables)
    return max((max(p1.degree(n), p2.degree(n)) for n in names), default=0)


@dataclass(frozen=True)
class GridResult:
    agree: bool
    witness: Mapping[str, int] | None = None
    points: int = 0

    def __bool__(self) -> bool:
        return self.agree


def grid_check(e1: Expr, e2: Expr, degree_bound: int, limit: int = GRID_LIMIT) -> GridResult:
    """Evaluates both expressions on every point of {0..degree_bound}^n."""
    names = sorted(variables(e1) | variables(e2))
    points = (degree_bound + 1) ** len(names)
    if points > limit:
        raise GridTooLarge(f"{points} grid points exceed the limit of {limit}")
    for point in itertools.product(range(degree_bound + 1), repeat=len(names)):
        valuation = dict(zip(names, point))
        if evaluate(e1, valuation) != evaluate(e2, valuation):
            return GridResult(False, valuation, points)
    return GridResult(True, None, points)
