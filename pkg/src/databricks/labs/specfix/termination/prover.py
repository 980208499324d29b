"""Built-in termination prover.

Every loop goes through the same ladder and stops at the first rung that decides it:

1. an exact argument for loops that slice down to one variable updated by an affine map;
2. a search for a repeated loop state, over every input when there are few enough, else
   over a seeded sample;
3. when every input was enumerated and the loop was left on each of them, a proof by
   exhaustion;
4. otherwise the answer is unknown.

No rung gives a definite answer it cannot justify, so TR and NT are always right and UN is
the only way the prover admits defeat.
"""

from __future__ import annotations

import logging
import math
import random
import threading
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from databricks.labs.specfix.equivalence import UnsupportedOperator, normalize
from databricks.labs.specfix.lang.ast import Assign, Compare, Const, Program, Var, While
from databricks.labs.specfix.lang.domain import enumerate_inputs, input_domain, space_size
from databricks.labs.specfix.lang.interpreter import Mode, compare
from databricks.labs.specfix.lang.testcases import format_valuation
from databricks.labs.specfix.overflow.intervals import Interval
from databricks.labs.specfix.termination.dependence import LoopStatus, observe_loop, slice
from databricks.labs.specfix.termination.monotonicity import oriented

logger = logging.getLogger(__name__)

PROVER_FUEL = 10_000
LASSO_EXHAUSTIVE_LIMIT = 2**16
SAMPLES = 10_000
STEP_BUDGET = 2_000_000
DEFAULT_SEED = 20_240_101


class Semantics(str, Enum):
    MATHEMATICAL = "mathematical"
    WRAPPED = "wrapped"

    @property
    def mode(self) -> Mode:
        return Mode.MATHEMATICAL if self == Semantics.MATHEMATICAL else Mode.WRAPPED


class Answer(str, Enum):
    TR = "TR"
    NT = "NT"
    UN = "UN"


class Certificate(str, Enum):
    AFFINE = "affine"
    EXHAUSTIVE = "exhaustive"
    NONE = "none"


def _dash(value: object) -> str:
    return "-" if value is None else str(value)


@dataclass(frozen=True)
class ProverVerdict:
    answer: Answer
    loop: int
    witness: Mapping[str, int] | None = None
    stem: int | None = None
    cycle: int | None = None
    certificate: Certificate = Certificate.NONE
    rung: str = ""
    detail: str = field(default="", compare=False)

    def __str__(self) -> str:
        witness = "-" if self.witness is None else format_valuation(self.witness)
        return (
            f"verdict={self.answer.value} loop={self.loop} witness={witness} "
            f"stem={_dash(self.stem)} cycle={_dash(self.cycle)} cert={self.certificate.value}"
        )

    def as_dict(self) -> dict:
        return {
            "verdict": self.answer.value,
            "loop": self.loop,
            "witness": None if self.witness is None else dict(self.witness),
            "stem": self.stem,
            "cycle": self.cycle,
            "cert": self.certificate.value,
            "rung": self.rung,
        }


@dataclass(frozen=True)
class AffineLoop:
    """`while (x ~ c) x = a * x + b;` entered with `x` somewhere in `entry`."""

    variable: str
    op: str
    bound: int
    a: int
    b: int
    entry: Interval


def affine_shape(p: Program, loop: While, ranges: Mapping[str, Interval] | None = None) -> AffineLoop | None:
    """Recognises a loop whose slice is one guard `x ~ c` and one update `x = a*x + b`."""
    *before, last = slice(p, loop).body
    if last.sid != loop.sid or not isinstance(last, While) or not isinstance(loop.cond, Compare):
        return None
    if len(last.body) != 1 or not isinstance(last.body[0], Assign):
        return None
    update = last.body[0]
    name = update.target
    atom = oriented(loop.cond)
    if atom is None or atom.left != Var(name) or not isinstance(atom.right, Const):
        return None
    try:
        poly = normalize(update.expr).as_dict()
    except UnsupportedOperator:
        return None
    if set(poly) - {(), ((name, 1),)}:
        return None
    if not before:
        domain = input_domain(p, ranges)
        if name not in domain:
            return None
        entry = domain[name]
    elif len(before) == 1 and isinstance(before[0], Assign) and isinstance(before[0].expr, Const):
        entry = Interval.point(before[0].expr.value)
    else:
        return None
    return AffineLoop(name, atom.op, atom.right.value, poly.get(((name, 1),), 0), poly.get((), 0), entry)


def _guard_interval(op: str, c: int) -> tuple[float, float] | None:
    match op:
        case "<":
            return -math.inf, c - 1
        case "<=":
            return -math.inf, c
        case ">":
            return c + 1, math.inf
        case ">=":
            return c, math.inf
        case "==":
            return c, c
    return None


def _least(entry: Interval, lo: float = -math.inf, hi: float = math.inf, op: str | None = None, c: int = 0) -> int | None:
    """Least value of `entry` inside [lo, hi] that also satisfies `x op c`."""
    if op is not None:
        if op == "!=":
            for x in (entry.lo, entry.lo + 1):
                if x <= entry.hi and lo <= x <= hi and x != c:
                    return x
            return None
        guard = _guard_interval(op, c)
        assert guard is not None
        lo, hi = max(lo, guard[0]), min(hi, guard[1])
    start = max(entry.lo, lo)
    if start > min(entry.hi, hi):
        return None
    return int(start)


def decide_affine(shape: AffineLoop) -> tuple[Answer, int | None] | None:
    """Exact verdict over unbounded integers, with the least non-terminating entry value, or None when undecided."""
    a, b, c, op, entry = shape.a, shape.b, shape.bound, shape.op, shape.entry
    if a == 1 and b == 0:
        # the variable never changes: every entry value that passes the guard loops
        nt = _least(entry, op=op, c=c)
    elif a == 1:
        nt = _decide_translation(op, b, c, entry)
    elif a == 0:
        nt = _least(entry, op=op, c=c) if compare(op, b, c) else None
    elif a >= 2:
        fixpoint = Fraction(b, 1 - a)
        if op in ("<", "<="):
            nt = _least(entry, hi=math.floor(fixpoint), op=op, c=c)
        elif op in (">", ">="):
            nt = _least(entry, lo=math.ceil(fixpoint), op=op, c=c)
        elif op == "==":
            nt = c if fixpoint == c and c in entry else None
        else:
            return None
    else:
        return None
    return (Answer.TR, None) if nt is None else (Answer.NT, nt)


def _decide_translation(op: str, b: int, c: int, entry: Interval) -> int | None:
    growing = b > 0
    if op == "==":
        return None
    if op != "!=":
        bounded_above = op in ("<", "<=")
        # moving away from the bound never leaves the guard
        return _least(entry, op=op, c=c) if bounded_above != growing else None
    step = abs(b)
    # the orbit hits c exactly when c lies ahead of x0 at a multiple of the step
    for x in range(entry.lo, min(entry.hi, entry.lo + step) + 1):
        ahead = c - x if growing else x - c
        if ahead < 0 or ahead % step != 0:
            return x
    # a unit step from below reaches every c, so only starts past it escape
    if step == 1 and growing and c + 1 <= entry.hi:
        return c + 1
    return None


@dataclass
class LassoSearch:
    witness: Mapping[str, int] | None = None
    stem: int | None = None
    cycle: int | None = None
    enumerated: bool = False
    all_terminate: bool = True
    inputs: int = 0
    steps: int = 0


class Prover:
    """Runs the decision ladder; one instance counts its invocations across threads."""

    def __init__(
        self,
        semantics: Semantics = Semantics.MATHEMATICAL,
        fuel: int = PROVER_FUEL,
        exhaustive_limit: int = LASSO_EXHAUSTIVE_LIMIT,
        samples: int = SAMPLES,
        seed: int = DEFAULT_SEED,
        ranges: Mapping[str, Interval] | None = None,
        step_budget: int = STEP_BUDGET,
    ):
        self.semantics = Semantics(semantics)
        self.fuel = fuel
        self.exhaustive_limit = exhaustive_limit
        self.samples = samples
        self.seed = seed
        self.ranges = dict(ranges or {})
        self.step_budget = step_budget
        self._lock = threading.Lock()
        self._invocations = 0

    @property
    def invocations(self) -> int:
        with self._lock:
            return self._invocations

    def with_semantics(self, semantics: Semantics) -> Prover:
        return Prover(
            semantics, self.fuel, self.exhaustive_limit, self.samples, self.seed, self.ranges, self.step_budget
        )

    def _loop(self, p: Program, loop: While | int) -> While:
        sid = loop if isinstance(loop, int) else loop.sid
        found = p.find(sid)
        if not isinstance(found, While):
            raise ValueError(f"statement {sid} is not a loop")
        return found

    def symbolic(self, p: Program, loop: While | int) -> ProverVerdict | None:
        """First rung: exact for single-variable affine loops over unbounded integers, silent otherwise."""
        loop = self._loop(p, loop)
        if self.semantics != Semantics.MATHEMATICAL:
            return None
        shape = affine_shape(p, loop, self.ranges)
        if shape is None:
            return None
        decided = decide_affine(shape)
        if decided is None:
            return None
        answer, start = decided
        detail = f"{shape.variable} = {shape.a}*{shape.variable} + {shape.b} while {shape.variable} {shape.op} {shape.bound}"
        if answer == Answer.TR:
            return ProverVerdict(Answer.TR, loop.sid, certificate=Certificate.AFFINE, rung="symbolic", detail=detail)
        witness = {name: interval.lo for name, interval in input_domain(p, self.ranges).items()}
        if shape.variable in witness:
            witness[shape.variable] = start  # type: ignore[assignment]
        # statements outside the slice may still fail on the witness before it diverges
        if observe_loop(p, loop, witness, self.fuel, self.semantics.mode).status.terminates:
            logger.debug(f"loop {loop.sid}: witness {witness} does not keep the loop running")
            return None
        return ProverVerdict(
            Answer.NT, loop.sid, witness, certificate=Certificate.AFFINE, rung="symbolic", detail=detail
        )

    def _sample(self, domain: Mapping[str, Interval]) -> list[dict[str, int]]:
        rng = random.Random(self.seed)
        names = list(domain)
        seen = set()
        for _ in range(self.samples):
            seen.add(tuple(rng.randint(domain[n].lo, domain[n].hi) for n in names))
        return [dict(zip(names, values)) for values in sorted(seen)]

    def _inputs(self, p: Program) -> tuple[Iterable[Mapping[str, int]], bool]:
        domain = input_domain(p, self.ranges)
        if space_size(domain) <= self.exhaustive_limit:
            return enumerate_inputs(domain, self.exhaustive_limit), True
        return self._sample(domain), False

    def lasso(self, p: Program, loop: While | int) -> LassoSearch:
        """Second and third rungs: looks for a repeated loop state, in lexicographic input order."""
        loop = self._loop(p, loop)
        inputs, enumerated = self._inputs(p)
        search = LassoSearch(enumerated=enumerated)
        for valuation in inputs:
            if search.steps >= self.step_budget:
                logger.debug(f"loop {loop.sid}: step budget spent after {search.inputs} inputs")
                search.all_terminate = False
                search.enumerated = False
                break
            outcome = observe_loop(p, loop, valuation, self.fuel, self.semantics.mode)
            search.inputs += 1
            search.steps += outcome.steps
            if outcome.status == LoopStatus.REVISITED:
                search.witness, search.stem, search.cycle = dict(valuation), outcome.stem, outcome.cycle
                return search
            if not outcome.status.terminates:
                search.all_terminate = False
        return search

    def prove(self, p: Program, loop: While | int) -> ProverVerdict:
        with self._lock:
            self._invocations += 1
        loop = self._loop(p, loop)
        verdict = self.symbolic(p, loop)
        if verdict is not None:
            logger.debug(f"{verdict} via the affine argument")
            return verdict
        search = self.lasso(p, loop)
        if search.witness is not None:
            verdict = ProverVerdict(Answer.NT, loop.sid, search.witness, search.stem, search.cycle, rung="lasso")
        elif search.enumerated and search.all_terminate:
            verdict = ProverVerdict(Answer.TR, loop.sid, certificate=Certificate.EXHAUSTIVE, rung="exhaustive")
        else:
            detail = f"{search.inputs} inputs, {search.steps} steps"
            verdict = ProverVerdict(Answer.UN, loop.sid, rung="none", detail=detail)
        logger.debug(f"{verdict} after {search.inputs} runs")
        return verdict

    def replays(self, p: Program, verdict: ProverVerdict) -> bool:
        """Re-runs a non-termination witness: a lasso must recur at the same point, a divergence must keep running."""
        if verdict.answer != Answer.NT or verdict.witness is None:
            return False
        outcome = observe_loop(p, verdict.loop, verdict.witness, self.fuel, self.semantics.mode)
        if verdict.stem is None:
            return outcome.status in (LoopStatus.REVISITED, LoopStatus.FUEL_EXHAUSTED)
        return (
            outcome.status == LoopStatus.REVISITED and outcome.stem == verdict.stem and outcome.cycle == verdict.cycle
        )

    def contradicts(self, p: Program, loop: While | int) -> bool:
        """Runs the symbolic and the lasso rungs independently; True when one proves TR and the other NT."""
        symbolic = self.symbolic(p, loop)
        if symbolic is None:
            return False
        search = self.lasso(p, loop)
        if symbolic.answer == Answer.TR:
            return search.witness is not None
        return search.enumerated and search.all_terminate and search.witness is None


def prove_termination(
    p: Program, loop: While | int, semantics: Semantics = Semantics.MATHEMATICAL, **kwargs
) -> ProverVerdict:
    return Prover(semantics, **kwargs).prove(p, loop)


class BugAnswer(str, Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class TerminationBug:
    answer: BugAnswer
    verdicts: tuple[ProverVerdict, ...] = ()

    @property
    def culprit(self) -> ProverVerdict | None:
        return next((v for v in self.verdicts if v.answer == Answer.NT), None)

    @property
    def witness(self) -> Mapping[str, int] | None:
        culprit = self.culprit
        return None if culprit is None else culprit.witness

    def __str__(self) -> str:
        culprit = self.culprit
        if culprit is None:
            return self.answer.value
        assert culprit.witness is not None
        return f"{self.answer.value} loop={culprit.loop} witness={format_valuation(culprit.witness)}"


def _verdicts(p: Program, prover: Prover) -> Iterator[ProverVerdict]:
    for loop in p.loops():
        verdict = prover.prove(p, loop)
        yield verdict
        if verdict.answer == Answer.NT:
            return


def has_termination_bug(p: Program, prover: Prover | None = None) -> TerminationBug:
    """Yes as soon as one loop is NT, no when every loop is TR, unknown otherwise."""
    prover = prover or Prover()
    verdicts = tuple(_verdicts(p, prover))
    if any(v.answer == Answer.NT for v in verdicts):
        return TerminationBug(BugAnswer.YES, verdicts)
    if all(v.answer == Answer.TR for v in verdicts):
        return TerminationBug(BugAnswer.NO, verdicts)
    return TerminationBug(BugAnswer.UNKNOWN, verdicts)
