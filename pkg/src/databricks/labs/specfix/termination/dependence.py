"""Control variables and conditioned slices of loops.

A variable controls a loop when its value can change whether the loop condition holds:
it appears in the condition, it feeds an assignment to a control variable inside the loop,
or it guards such an assignment. The slice keeps a loop together with everything its
control variables depend on, and drops the rest.
"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from enum import Enum

import networkx as nx

from databricks.labs.specfix.lang.ast import Assign, If, Program, Return, Stmt, While, filter_body, variables, walk
from databricks.labs.specfix.lang.interpreter import LassoTracer, Mode, StateRevisit, Status, run

logger = logging.getLogger(__name__)

_CONDITION = "<condition>"


def data_graph(p: Program) -> nx.DiGraph:
    """Edges run from every variable an assignment reads to the variable it writes."""
    graph = nx.DiGraph()
    graph.add_nodes_from(d.name for d in p.decls)
    for stmt in p.statements():
        if isinstance(stmt, Assign):
            for name in variables(stmt.expr):
                graph.add_edge(name, stmt.target)
    return graph


@dataclass(frozen=True)
class ControlVarSet:
    loop: int
    variables: frozenset[str]
    # each chain starts at the variable and ends at a variable of the condition
    derivation: Mapping[str, tuple[str, ...]]

    def __contains__(self, name: object) -> bool:
        return name in self.variables

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.variables))

    def __len__(self) -> int:
        return len(self.variables)

    def __str__(self) -> str:
        return "{" + ", ".join(sorted(self.variables)) + "}"


def _guarded(body: Iterable[Stmt], guards: tuple[Stmt, ...] = ()) -> Iterator[tuple[Stmt, tuple[Stmt, ...]]]:
    """Statements with the compound statements enclosing them inside `body`."""
    for stmt in body:
        yield stmt, guards
        if isinstance(stmt, While):
            yield from _guarded(stmt.body, (*guards, stmt))
        elif isinstance(stmt, If):
            yield from _guarded(stmt.then, (*guards, stmt))
            yield from _guarded(stmt.orelse or (), (*guards, stmt))


def _find_loop(p: Program, loop: While | int) -> While:
    sid = loop if isinstance(loop, int) else loop.sid
    stmt = p.find(sid)
    if not isinstance(stmt, While):
        raise ValueError(f"statement {sid} is not a loop")
    return stmt


def control_variables(loop: While | int, p: Program) -> ControlVarSet:
    loop = _find_loop(p, loop)
    graph = nx.DiGraph()
    for name in variables(loop.cond):
        graph.add_edge(name, _CONDITION)
    for stmt, guards in _guarded(loop.body):
        if not isinstance(stmt, Assign):
            continue
        for name in variables(stmt.expr):
            graph.add_edge(name, stmt.target)
        for guard in guards:
            for name in variables(guard.cond):
                graph.add_edge(name, stmt.target)
    found = nx.ancestors(graph, _CONDITION)
    derivation = {name: tuple(nx.shortest_path(graph, name, _CONDITION)[:-1]) for name in sorted(found)}
    logger.debug(f"control variables of loop {loop.sid}: {sorted(found)}")
    return ControlVarSet(loop.sid, frozenset(found), derivation)


def _path_to(body: tuple[Stmt, ...], sid: int) -> list[Stmt] | None:
    for stmt in body:
        if stmt.sid == sid:
            return [stmt]
        children: list[tuple[Stmt, ...]] = []
        if isinstance(stmt, While):
            children = [stmt.body]
        elif isinstance(stmt, If):
            children = [stmt.then, stmt.orelse or ()]
        for child in children:
            path = _path_to(child, sid)
            if path is not None:
                return [stmt, *path]
    return None


def _truncate(body: tuple[Stmt, ...], path: list[Stmt]) -> tuple[Stmt, ...]:
    out: list[Stmt] = []
    for stmt in body:
        if stmt.sid != path[0].sid:
            out.append(stmt)
            continue
        if len(path) > 1 and isinstance(stmt, While):
            stmt = dataclasses.replace(stmt, body=_truncate(stmt.body, path[1:]))
        elif len(path) > 1 and isinstance(stmt, If):
            if _path_to(stmt.then, path[1].sid) is not None:
                stmt = dataclasses.replace(stmt, then=_truncate(stmt.then, path[1:]))
            else:
                stmt = dataclasses.replace(stmt, orelse=_truncate(stmt.orelse or (), path[1:]))
        out.append(stmt)
        break
    return tuple(out)


def loop_program(p: Program, loop: While | int) -> Program:
    """`p` up to the end of `loop`: every statement that can only run after the loop is dropped."""
    loop = _find_loop(p, loop)
    path = _path_to(p.body, loop.sid)
    assert path is not None
    return dataclasses.replace(p, body=_truncate(p.body, path))


def slice(p: Program, loop: While | int) -> Program:  # pylint: disable=redefined-builtin
    """The smallest program, in statement terms, with the same termination behaviour for `loop`.

    Loops and returns are never dropped since either can decide whether the loop is reached
    or left; guards of kept statements are kept with them.
    """
    loop = _find_loop(p, loop)
    prefix = loop_program(p, loop)
    inside = {s.sid for s in walk(loop.body)}
    path = _path_to(prefix.body, loop.sid)
    assert path is not None
    relevant = set(control_variables(loop, p).variables)
    kept = {s.sid for s in path}
    guarded = list(_guarded(prefix.body))
    changed = True
    while changed:
        changed = False
        for stmt, guards in guarded:
            if stmt.sid in kept:
                continue
            keep = isinstance(stmt, (While, Return))
            keep = keep or (isinstance(stmt, Assign) and stmt.target in relevant)
            if not keep:
                continue
            kept.add(stmt.sid)
            kept.update(g.sid for g in guards)
            changed = True
        for stmt, _ in guarded:
            if stmt.sid not in kept:
                continue
            if isinstance(stmt, Assign):
                needed = variables(stmt.expr)
            elif isinstance(stmt, (While, If)):
                needed = variables(stmt.cond)
            else:
                continue
            if not needed <= relevant:
                relevant |= needed
                changed = True
    sliced = dataclasses.replace(prefix, body=filter_body(prefix.body, lambda s: s.sid in kept))
    dropped = sum(1 for s in p.statements() if s.sid not in kept)
    logger.debug(f"slice of loop {loop.sid} keeps {len(kept)} statements and drops {dropped}")
    if not inside & kept:
        logger.debug(f"loop {loop.sid} has no control-relevant body statements")
    return sliced


class LoopExited(Exception):
    """The observed loop was left; nothing after it matters for its termination."""


class LoopObserver(LassoTracer):
    """Watches one loop for state revisits within a single activation.

    A top-level loop runs at most once, so the run stops as soon as it is left. A nested loop
    is watched across all of its activations, forgetting old states whenever it is left.
    """

    def __init__(self, p: Program, loop: While):
        super().__init__(loop.sid)
        self._loop = loop.sid
        self._inside = {s.sid for s in walk(loop.body)} | {loop.sid}
        self._stop_on_exit = any(s.sid == loop.sid for s in p.body)
        self.entered = False
        self.reached = False
        self.steps = 0

    def _left(self) -> None:
        if not self.entered:
            return
        if self._stop_on_exit:
            raise LoopExited()
        self.entered = False
        self.reset()

    def loop_head(self, sid: int, store: Mapping[str, int], steps: int) -> None:
        self.steps = steps
        if sid not in self._inside:
            self._left()
            return
        if sid == self._loop:
            self.entered = self.reached = True
        super().loop_head(sid, store, steps)

    def assigning(self, sid: int, store: Mapping[str, int]) -> None:
        if sid not in self._inside:
            self._left()


class LoopStatus(str, Enum):
    EXITED = "exited"
    NOT_REACHED = "not-reached"
    REVISITED = "revisited"
    FUEL_EXHAUSTED = "fuel-exhausted"
    ERROR = "error"

    @property
    def terminates(self) -> bool:
        return self in (LoopStatus.EXITED, LoopStatus.NOT_REACHED, LoopStatus.ERROR)


@dataclass(frozen=True)
class LoopRun:
    status: LoopStatus
    steps: int = 0
    stem: int | None = None
    cycle: int | None = None


def observe_loop(p: Program, loop: While | int, inputs: Mapping[str, int], fuel: int, mode: Mode) -> LoopRun:
    """Runs `p` and reports what became of `loop`: left, never reached, cycling or still running."""
    loop = _find_loop(p, loop)
    observer = LoopObserver(p, loop)
    try:
        outcome = run(p, inputs, fuel, mode, observer)
    except StateRevisit as e:
        return LoopRun(LoopStatus.REVISITED, observer.steps, e.stem, e.cycle)
    except LoopExited:
        return LoopRun(LoopStatus.EXITED, observer.steps)
    if outcome.status == Status.FUEL_EXHAUSTED:
        return LoopRun(LoopStatus.FUEL_EXHAUSTED, outcome.steps)
    if outcome.status in (Status.RUNTIME_ERROR, Status.OVERFLOW_TRAP):
        return LoopRun(LoopStatus.ERROR, outcome.steps)
    return LoopRun(LoopStatus.EXITED if observer.reached else LoopStatus.NOT_REACHED, outcome.steps)


def slice_disagreements(
    p: Program, loop: While | int, inputs: Iterable[Mapping[str, int]], fuel: int, mode: Mode = Mode.MATHEMATICAL
) -> list[Mapping[str, int]]:
    """Inputs on which the loop terminates in `p` but not in its slice, or the other way round.

    Inputs on which `p` fails at run time are skipped: the slice may not contain the failing statement.
    """
    loop = _find_loop(p, loop)
    sliced = slice(p, loop)
    out = []
    for valuation in inputs:
        original = observe_loop(p, loop, valuation, fuel, mode)
        if original.status == LoopStatus.ERROR:
            continue
        minimal = observe_loop(sliced, loop.sid, valuation, fuel, mode)
        if original.status.terminates != minimal.status.terminates:
            out.append(valuation)
    return out
