"""Bundled ground-truth corpus and the batch runner behind `specfix corpus`.

A manifest lists one program per line together with what is known about it:

    io/add.mi ; io-bug ; ranges=a=0..127,b=0..127 ; findings=IO@1.0 ; patch=widen
    loops/down.mi ; termination-bug ; tests=loops/down.tests ; verdicts=NT ; repair=valid

Paths are relative to the manifest. Ground-truth keys are optional; an entry without any is
run and reported, but never counted as a pass or a failure.
"""

from __future__ import annotations

import functools
import json
import logging
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any

from databricks.labs.blueprint.parallel import Threads

from databricks.labs.specfix.__about__ import __version__
from databricks.labs.specfix.config import SpecfixConfig
from databricks.labs.specfix.lang.ast import Assign, Program, While, walk
from databricks.labs.specfix.lang.domain import InputSpaceTooLarge, enumerate_inputs, input_domain, space_size
from databricks.labs.specfix.lang.parser import parse
from databricks.labs.specfix.lang.testcases import TestCase, load_tests
from databricks.labs.specfix.lang.widths import IntWidth
from databricks.labs.specfix.overflow.detection import DetectionMode, OverflowFinding, detect, feasible_mode
from databricks.labs.specfix.overflow.intervals import Interval, parse_ranges
from databricks.labs.specfix.overflow.rules import rule_disagreements
from databricks.labs.specfix.repair.overflow import RewritePatch, Scope, repair_all, validate_rewrite
from databricks.labs.specfix.repair.termination import (
    Classification,
    EditKind,
    RuleId,
    TerminationRepair,
    repair_termination,
)
from databricks.labs.specfix.termination.dependence import control_variables, slice, slice_disagreements
from databricks.labs.specfix.termination.monotonicity import Update, classify_monotonic, entry_region
from databricks.labs.specfix.termination.prover import Answer, Prover, affine_shape

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MANIFEST = "manifest.txt"
BUNDLED = Path(__file__).parent / "resources" / "corpus" / MANIFEST
NO_PATCH = "none"
KEYS = ("tests", "ranges", "findings", "patch", "verdicts", "repair")


class ManifestError(ValueError):
    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class EntryKind(str, Enum):
    IO_BUG = "io-bug"
    TERMINATION_BUG = "termination-bug"
    CLEAN = "clean"


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    path: Path
    kind: EntryKind
    tests: Path | None = None
    ranges: Mapping[str, Interval] = field(default_factory=dict)
    # IO@3.0 style labels of the exhaustive findings
    findings: tuple[str, ...] | None = None
    # strategy of the first accepted IO patch, or `none`
    patch: str | None = None
    # one expected verdict per loop, in source order
    verdicts: tuple[Answer, ...] | None = None
    # expected termination repair outcome
    repair: str | None = None
    line: int = 0

    @property
    def checked(self) -> bool:
        return any(v is not None for v in (self.findings, self.patch, self.verdicts, self.repair))


def finding_label(finding: OverflowFinding) -> str:
    return f"{finding.kind.value}@{finding.sid}.{finding.sub}"


def _labels(text: str) -> tuple[str, ...]:
    if text.strip() in ("", NO_PATCH):
        return ()
    return tuple(sorted(label.strip() for label in text.split(",") if label.strip()))


def _entry(line: str, number: int, base: Path) -> CorpusEntry:
    fields = [f.strip() for f in line.split(";")]
    if len(fields) < 2 or not fields[0]:
        raise ManifestError("expected `path ; kind [; key=value ...]`", number)
    path, kind = fields[0], fields[1]
    try:
        entry_kind = EntryKind(kind)
    except ValueError:
        raise ManifestError(f"unknown kind: {kind}", number) from None
    values: dict[str, str] = {}
    for chunk in fields[2:]:
        if not chunk:
            continue
        if "=" not in chunk:
            raise ManifestError(f"not a key=value field: {chunk}", number)
        key, value = chunk.split("=", 1)
        key = key.strip()
        if key not in KEYS:
            raise ManifestError(f"unknown key: {key}", number)
        values[key] = value.strip()
    source = base / path
    if not source.is_file():
        raise ManifestError(f"no such program: {path}", number)
    tests = None
    if "tests" in values:
        tests = base / values["tests"]
        if not tests.is_file():
            raise ManifestError(f"no such test file: {values['tests']}", number)
    try:
        ranges = parse_ranges(values.get("ranges", ""))
        verdicts = None
        if "verdicts" in values:
            verdicts = tuple(Answer(v.strip()) for v in values["verdicts"].split(","))
    except ValueError as e:
        raise ManifestError(str(e), number) from e
    findings = _labels(values["findings"]) if "findings" in values else None
    return CorpusEntry(
        path, source, entry_kind, tests, ranges, findings, values.get("patch"), verdicts, values.get("repair"), number
    )


def parse_manifest(text: str, base: Path) -> list[CorpusEntry]:
    entries = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        entries.append(_entry(line, number, base))
    return entries


def load_manifest(path: Path) -> list[CorpusEntry]:
    if not path.is_file():
        raise ManifestError(f"no such manifest: {path}")
    entries = parse_manifest(path.read_text(encoding="utf8"), path.parent)
    if not entries:
        logger.warning(f"manifest {path} lists no programs")
    return entries


class EntryStatus(str, Enum):
    PASSED = "pass"
    FAILED = "fail"
    UNCHECKED = "unchecked"
    ERROR = "error"


@dataclass
class EntryResult:
    name: str
    kind: EntryKind
    status: EntryStatus = EntryStatus.UNCHECKED
    mismatches: list[str] = field(default_factory=list)
    findings: list[str] = field(default_factory=list)
    verdicts: list[str] = field(default_factory=list)
    repair: dict[str, Any] | None = None
    counters: Counter[str] = field(default_factory=Counter)
    error: str | None = None

    def mismatch(self, message: str) -> None:
        logger.warning(f"{self.name}: {message}")
        self.mismatches.append(message)

    def as_dict(self) -> dict[str, Any]:
        return {
            "entry": self.name,
            "kind": self.kind.value,
            "status": self.status.value,
            "mismatches": self.mismatches,
            "findings": self.findings,
            "verdicts": self.verdicts,
            "repair": self.repair,
            "counters": dict(sorted(self.counters.items())),
            "error": self.error,
        }


@dataclass
class RunReport:
    entries: list[EntryResult]
    config: dict[str, Any]
    rules: dict[str, dict[str, int]]
    created: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    @property
    def counters(self) -> Counter[str]:
        total: Counter[str] = Counter()
        for entry in self.entries:
            total.update(entry.counters)
            total[f"entries:{entry.status.value}"] += 1
        total["entries"] = len(self.entries)
        return total

    @property
    def passed(self) -> bool:
        return all(e.status in (EntryStatus.PASSED, EntryStatus.UNCHECKED) for e in self.entries)

    def body(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "counters": dict(sorted(self.counters.items())),
            "entries": [e.as_dict() for e in self.entries],
            "rules": self.rules,
        }

    def body_json(self) -> str:
        return json.dumps(self.body(), indent=2, sort_keys=True)

    def to_json(self) -> str:
        header = {"schema": SCHEMA_VERSION, "tool": "specfix", "version": __version__, "created": self.created}
        return json.dumps({"header": header, "body": self.body()}, indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"specfix {__version__} corpus report ({len(self.entries)} entries)"]
        for entry in self.entries:
            lines.append(f"{entry.status.value:9} {entry.kind.value:15} {entry.name}")
            for message in entry.mismatches:
                lines.append(f"          mismatch: {message}")
            if entry.error:
                lines.append(f"          error: {entry.error}")
        for key, value in sorted(self.counters.items()):
            lines.append(f"{key}: {value}")
        return "\n".join(lines)

    def write(self, path: Path) -> None:
        path.write_text(self.to_json() + "\n", encoding="utf8")
        logger.info(f"wrote report to {path}")


class CorpusRunner:
    """Runs every entry through the pipelines its kind calls for and checks the ground truth."""

    def __init__(self, config: SpecfixConfig = SpecfixConfig()):
        self._config = config

    def run(self, entries: Sequence[CorpusEntry]) -> RunReport:
        tasks = [functools.partial(self._guarded, index, entry) for index, entry in enumerate(entries)]
        collected, errors = Threads.gather("corpus", tasks, self._config.jobs)
        for e in errors:
            logger.error(f"corpus task failed: {e}")
        results = [result for _, result in sorted(collected, key=lambda pair: pair[0])]
        rules = rule_disagreements(IntWidth.I8)
        return RunReport(results, self._config.as_dict(), rules)

    def _guarded(self, index: int, entry: CorpusEntry) -> tuple[int, EntryResult]:
        try:
            return index, self.run_entry(entry)
        except Exception as e:  # pylint: disable=broad-exception-caught
            logger.warning(f"{entry.name}: {type(e).__name__}: {e}")
            result = EntryResult(entry.name, entry.kind, EntryStatus.ERROR, error=f"{type(e).__name__}: {e}")
            return index, result

    def run_entry(self, entry: CorpusEntry) -> EntryResult:
        logger.info(f"running {entry.name} ({entry.kind.value})")
        p = parse(entry.path.read_text(encoding="utf8"))
        tests = load_tests(entry.tests) if entry.tests else []
        result = EntryResult(entry.name, entry.kind)
        if entry.kind == EntryKind.IO_BUG or entry.findings is not None:
            self._detect(p, entry, tests, result)
        if p.loops() and (entry.kind != EntryKind.IO_BUG or entry.verdicts is not None):
            prover = self._config.prover(entry.ranges)
            for loop in p.loops():
                self._survey(p, loop, entry, tests, prover, result)
            self._prove(p, entry, prover, result)
        if entry.kind == EntryKind.IO_BUG:
            self._repair_io(p, entry, tests, result)
        if entry.kind == EntryKind.TERMINATION_BUG:
            self._repair_termination(p, entry, tests, result)
        if entry.checked:
            result.status = EntryStatus.FAILED if result.mismatches else EntryStatus.PASSED
        return result

    def _detect(self, p: Program, entry: CorpusEntry, tests: list[TestCase], result: EntryResult) -> None:
        mode = self._config.mode
        try:
            findings = self._findings(p, mode, entry, tests)
        except InputSpaceTooLarge as e:
            logger.warning(f"{entry.name}: {e}, falling back to interval detection")
            findings = self._findings(p, DetectionMode.INTERVAL, entry, tests)
        result.findings = [str(f) for f in findings]
        result.counters["findings"] += len(findings)
        if entry.findings is None:
            return
        found = tuple(sorted({finding_label(f) for f in findings}))
        if found != entry.findings:
            result.mismatch(f"findings {','.join(found) or NO_PATCH}, expected {','.join(entry.findings) or NO_PATCH}")

    def _findings(self, p: Program, mode: DetectionMode, entry: CorpusEntry, tests: list[TestCase]):
        config = self._config
        return detect(p, mode, tests, entry.ranges, config.fuel, config.exhaustive_limit, config.rule_mode)

    def _survey(
        self, p: Program, loop: While, entry: CorpusEntry, tests: list[TestCase], prover: Prover, result: EntryResult
    ) -> None:
        """Monotonicity census, prover cross-check and slice agreement for one loop."""
        mode = prover.semantics.mode
        controls = control_variables(loop, p)
        probes = [case.inputs for case in tests]
        region = entry_region(p, loop, (), entry.ranges, mode)
        sliced = slice(p, loop)
        sliced_loop = sliced.find(loop.sid)
        assert isinstance(sliced_loop, While)
        for stmt in walk(sliced_loop.body):
            if not isinstance(stmt, Assign) or stmt.target not in controls:
                continue
            trace = classify_monotonic(sliced, stmt, sliced_loop, probes, mode, region.get(stmt.target))
            result.counters[f"monotonicity:{trace.classification.value}"] += 1
            update = Update.of(stmt)
            result.counters[f"update-shape:x{update.op}b" if update else "update-shape:other"] += 1
        if prover.contradicts(p, loop):
            result.counters["prover-contradictions"] += 1
            result.mismatch(f"loop {loop.sid}: the affine argument and the lasso search disagree")
        domain = input_domain(p, entry.ranges)
        if space_size(domain) > prover.exhaustive_limit:
            return
        inputs = enumerate_inputs(domain, prover.exhaustive_limit)
        diverging = slice_disagreements(p, loop, inputs, prover.fuel, mode)
        result.counters["slice-checked-loops"] += 1
        if diverging:
            result.counters["slice-disagreements"] += len(diverging)
            result.mismatch(f"loop {loop.sid}: slice changes termination for {len(diverging)} inputs")

    def _prove(self, p: Program, entry: CorpusEntry, prover: Prover, result: EntryResult) -> None:
        loops = p.loops()
        if entry.verdicts is not None and len(entry.verdicts) != len(loops):
            result.mismatch(f"{len(entry.verdicts)} expected verdicts for {len(loops)} loops")
        for index, loop in enumerate(loops):
            verdict = prover.prove(p, loop)
            result.verdicts.append(str(verdict))
            result.counters[f"verdicts:{verdict.answer.value}"] += 1
            if verdict.answer == Answer.NT and not prover.replays(p, verdict):
                result.counters["witness-replay-failures"] += 1
                result.mismatch(f"loop {loop.sid}: witness does not replay")
            if entry.verdicts is None or index >= len(entry.verdicts):
                continue
            expected = entry.verdicts[index]
            if verdict.answer == Answer.UN:
                continue
            if verdict.answer != expected:
                result.counters["wrong-verdicts"] += 1
                result.mismatch(f"loop {loop.sid}: {verdict.answer.value}, expected {expected.value}")

    def _repair_io(self, p: Program, entry: CorpusEntry, tests: list[TestCase], result: EntryResult) -> None:
        config = self._config
        mode = feasible_mode(p, config.mode, entry.ranges, config.exhaustive_limit)
        repaired = repair_all(p, mode, ranges=entry.ranges, tests=tests, fuel=config.fuel)
        result.repair = repaired.as_dict()
        before = p
        for report in repaired.repairs:
            if report.strategy is not None:
                result.counters[f"io-patches:{report.strategy.value}"] += 1
            if isinstance(report.patch, RewritePatch):
                self._revalidate(before, report.patch, entry, result)
            if report.program is not None:
                before = report.program
        if entry.patch is None:
            return
        first = repaired.repairs[0].strategy if repaired.repairs else None
        got = NO_PATCH if first is None else first.value
        if got != entry.patch:
            result.mismatch(f"first patch {got}, expected {entry.patch}")
        if entry.patch != NO_PATCH and repaired.remaining:
            result.mismatch(f"{len(repaired.remaining)} findings left unrepaired")

    def _revalidate(self, p: Program, patch: RewritePatch, entry: CorpusEntry, result: EntryResult) -> None:
        if space_size(input_domain(p, entry.ranges)) > self._config.exhaustive_limit:
            return
        validation = validate_rewrite(p, patch, Scope.EXHAUSTIVE, entry.ranges)
        result.counters["revalidated-rewrites"] += 1
        if not validation.accepted:
            result.counters["revalidation-failures"] += 1
            result.mismatch(f"{patch} fails exhaustive validation: {validation.reason}")

    def _repair_termination(self, p: Program, entry: CorpusEntry, tests: list[TestCase], result: EntryResult) -> None:
        config = self._config
        prover = config.prover(entry.ranges)
        report = repair_termination(p, tests, config.budget, prover, fuel=config.test_fuel)
        result.repair = report.as_dict()
        result.counters[f"termination-repairs:{report.outcome.value}"] += 1
        self._check_classifications(p, report, prover.invocations, result)
        self._check_rule_soundness(p, report, entry, result)
        if entry.repair is not None and report.outcome.value != entry.repair:
            result.mismatch(f"repair outcome {report.outcome.value}, expected {entry.repair}")

    @staticmethod
    def _check_classifications(p: Program, report: TerminationRepair, invocations: int, result: EntryResult) -> None:
        """Recomputes every candidate's class from its raw test results and prover answer."""
        passing_candidates = 0
        for patch, verdict in report.candidates:
            result.counters[f"candidates:{verdict.classification.value}"] += 1
            if not all(r.passed for r in verdict.tests):
                expected = Classification.INVALID
                if verdict.prover is not None:
                    result.counters["prover-on-failing-candidate"] += 1
                    result.mismatch(f"{patch}: proved although a test fails")
            else:
                passing_candidates += 1
                answer = None if verdict.prover is None else verdict.prover.answer
                expected = {Answer.TR: Classification.VALID, Answer.UN: Classification.PLAUSIBLE}.get(
                    answer, Classification.INVALID  # type: ignore[arg-type]
                )
            if expected != verdict.classification:
                result.counters["validity-mismatches"] += 1
                result.mismatch(f"{patch}: classified {verdict.classification.value}, expected {expected.value}")
        loops = [loop.sid for loop in p.loops()]
        bug_checks = loops.index(report.bug.loop) + 1 if report.bug is not None else len(loops)
        if invocations != bug_checks + passing_candidates:
            result.counters["prover-invocation-mismatches"] += 1
            result.mismatch(f"prover ran {invocations} times, expected {bug_checks + passing_candidates}")

    def _check_rule_soundness(
        self, p: Program, report: TerminationRepair, entry: CorpusEntry, result: EntryResult
    ) -> None:
        """Every update mutant of a single-variable affine loop must be proved to terminate."""
        if report.loop is None or not report.space:
            return
        loop = p.find(report.loop)
        assert isinstance(loop, While)
        if affine_shape(p, loop, entry.ranges) is None:
            return
        prover = self._config.prover(entry.ranges)
        for patch in report.space:
            if patch.kind != EditKind.UPDATE or not set(patch.rules) <= {RuleId.R1, RuleId.R2}:
                continue
            verdict = prover.prove(patch.apply(p), patch.loop)
            result.counters["rule-soundness-checked"] += 1
            if verdict.answer != Answer.TR:
                result.counters["rule-soundness-failures"] += 1
                result.mismatch(f"{patch}: {verdict.answer.value} under a decreasing/increasing rule")


def run_corpus(manifest: Path = BUNDLED, config: SpecfixConfig = SpecfixConfig()) -> RunReport:
    entries = load_manifest(manifest)
    report = CorpusRunner(config).run(entries)
    counters = report.counters
    logger.info(f"corpus: {counters['entries:pass']} passed, {counters['entries:fail']} failed, {len(entries)} total")
    return report

