from databricks.labs.specfix.lang.parser import parse, parse_expr
from databricks.labs.specfix.overflow.split import split, split_stmt


def test_split_lists_operations_in_evaluation_order():
    subs = split(parse_expr("a * (b + c) - 4"))

    assert [str(s) for s in subs] == ["b + c", "a * (b + c)", "a * (b + c) - 4"]
    assert [s.index for s in subs] == [0, 1, 2]
    assert [s.op for s in subs] == ["+", "*", "-"]
    assert subs[2].named.left.name == "_t2"


def test_leaves_have_no_operations():
    assert not split(parse_expr("a"))
    assert not split(parse_expr("(3)"))


def test_split_statement_conditions():
    p = parse("input i8 x;\nwhile (x + 1 < 10 && x * 2 > 0) x = x + 1;\n")

    assert [str(s) for s in split_stmt(p.find(1))] == ["x + 1", "x * 2"]
    assert [str(s) for s in split_stmt(p.find(2))] == ["x + 1"]
