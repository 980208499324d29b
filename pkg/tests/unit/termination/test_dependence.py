from databricks.labs.specfix.lang.interpreter import Mode
from databricks.labs.specfix.lang.parser import parse
from databricks.labs.specfix.termination.dependence import (
    LoopStatus,
    control_variables,
    data_graph,
    loop_program,
    observe_loop,
    slice,
    slice_disagreements,
)

GUARDED = parse(
    """input i8 n;
i8 i, s, k;
i = 0;
s = 0;
k = 1;
while (i < n) {
    s = s + i;
    if (k > 0) i = i + k;
}
s = s + 1;
"""
)


def test_data_graph_edges_run_from_reads_to_writes():
    p = parse("input i8 a, b;\ni8 c, d;\nc = a + b;\nd = c + c;\n")

    graph = data_graph(p)

    assert set(graph.edges) == {("a", "c"), ("b", "c"), ("c", "d")}


def test_control_variables_include_guards():
    controls = control_variables(4, GUARDED)

    assert set(controls) == {"i", "k", "n"}
    assert "s" not in controls
    assert controls.derivation["k"] == ("k", "i")
    assert str(controls) == "{i, k, n}"


def test_slice_keeps_what_the_loop_depends_on():
    sliced = slice(GUARDED, 4)

    assert [s.sid for s in sliced.statements()] == [1, 3, 4, 6, 7]


def test_loop_program_drops_what_follows():
    assert [s.sid for s in loop_program(GUARDED, 4).statements()] == [1, 2, 3, 4, 5, 6, 7]


def test_observe_loop():
    down = parse("input i8 x;\nwhile (x > 0) x = x - 1;\n")
    stuck = parse("input i8 x;\nwhile (x > 0) x = x;\n")
    up = parse("input i8 x;\nwhile (x > 0) x = x + 1;\n")
    guarded = parse("input i8 x;\nif (x > 5) {\n    while (x > 0) x = x - 1;\n}\n")
    failing = parse("input i8 x;\ni8 y;\nwhile (x > 0) x = x - y;\n")

    assert observe_loop(down, 1, {"x": 3}, 100, Mode.MATHEMATICAL).status == LoopStatus.EXITED
    assert observe_loop(guarded, 2, {"x": 0}, 100, Mode.MATHEMATICAL).status == LoopStatus.NOT_REACHED
    revisit = observe_loop(stuck, 1, {"x": 1}, 100, Mode.MATHEMATICAL)
    assert (revisit.status, revisit.stem, revisit.cycle) == (LoopStatus.REVISITED, 0, 1)
    assert observe_loop(up, 1, {"x": 1}, 100, Mode.MATHEMATICAL).status == LoopStatus.FUEL_EXHAUSTED
    assert observe_loop(failing, 1, {"x": 1}, 100, Mode.MATHEMATICAL).status == LoopStatus.ERROR


def test_nested_loops_are_watched_per_activation():
    p = parse("input i8 n;\ni8 i, j;\ni = 0;\nwhile (i < n) {\n    j = 0;\n    while (j < 2) j = j + 1;\n    i = i + 1;\n}\n")

    assert observe_loop(p, 4, {"n": 3}, 1_000, Mode.MATHEMATICAL).status == LoopStatus.EXITED


def test_slice_preserves_termination():
    inputs = [{"n": n} for n in range(-5, 20)]

    assert not slice_disagreements(GUARDED, 4, inputs, 1_000)
