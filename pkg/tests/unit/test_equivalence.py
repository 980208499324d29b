import pytest

from databricks.labs.specfix.equivalence import (
    GridTooLarge,
    Polynomial,
    UnsupportedOperator,
    equivalent,
    grid_check,
    max_degree,
    normalize,
)
from databricks.labs.specfix.lang.interpreter import evaluate
from databricks.labs.specfix.lang.parser import parse_expr


@pytest.mark.parametrize(
    "left, right",
    [
        ("a + b", "b + a"),
        ("a + 100 - b", "100 - b + a"),
        ("(a + b) * (a - b)", "a * a - b * b"),
        ("a * (b + c)", "a * b + a * c"),
        ("a - a", "0"),
        ("2 * 3", "6"),
    ],
)
def test_equivalent_pairs(left, right):
    assert equivalent(parse_expr(left), parse_expr(right))


@pytest.mark.parametrize(
    "left, right",
    [
        ("a + b", "a - b"),
        ("a * a", "a"),
        ("a * b", "a + b"),
        ("a", "b"),
    ],
)
def test_inequivalent_pairs_have_a_witness(left, right):
    e1, e2 = parse_expr(left), parse_expr(right)

    result = equivalent(e1, e2)

    assert not result
    assert result.witness is not None
    assert evaluate(e1, result.witness) != evaluate(e2, result.witness)


def test_witness_is_the_first_differing_grid_point():
    result = equivalent(parse_expr("a * a"), parse_expr("a"))

    assert result.witness == {"a": 2}
    assert str(result) == "inequivalent witness=a=2"


def test_normal_form():
    poly = normalize(parse_expr("(a + 1) * (a - 1) + b"))

    assert poly == Polynomial.of({(("a", 2),): 1, (("b", 1),): 1, (): -1})
    assert poly.variables == ["a", "b"]
    assert poly.degree("a") == 2
    assert normalize(poly.to_expr()) == poly
    assert normalize(parse_expr("3 - 3")).is_zero


def test_division_is_unsupported():
    with pytest.raises(UnsupportedOperator):
        normalize(parse_expr("a / 2"))


def test_max_degree():
    assert max_degree(parse_expr("a * a * b"), parse_expr("b * b * b")) == 3
    assert max_degree(parse_expr("4"), parse_expr("5")) == 0


def test_grid_limit():
    with pytest.raises(GridTooLarge):
        grid_check(parse_expr("a + b + c"), parse_expr("c"), 1000, limit=1000)


def test_normal_forms_agree_with_grid_evaluation(make_random_expr):
    for _ in range(500):
        e1, e2 = make_random_expr(variables=3, depth=4)

        result = equivalent(e1, e2)
        grid = grid_check(e1, e2, max_degree(e1, e2))

        assert bool(result) == bool(grid), (e1, e2)
        if not result:
            assert result.witness is not None
            assert evaluate(e1, result.witness) != evaluate(e2, result.witness)
