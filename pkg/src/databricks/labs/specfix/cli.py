"""`specfix` command line.

Exit codes are a stable contract:

    0  no findings, valid patch, terminating loop, equivalent, corpus passed
    1  findings, non-terminating loop, inequivalent, corpus mismatch
    2  usage, parse, file or manifest error
    3  only a plausible patch was found
    4  no patch was found
    5  termination unknown
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

from databricks.labs.blueprint.logger import install_logger

from databricks.labs.specfix.__about__ import __version__
from databricks.labs.specfix.config import SpecfixConfig, load_config
from databricks.labs.specfix.corpus import BUNDLED, CorpusRunner, load_manifest
from databricks.labs.specfix.equivalence import equivalent
from databricks.labs.specfix.lang.ast import Program
from databricks.labs.specfix.lang.parser import parse, parse_expr
from databricks.labs.specfix.lang.testcases import TestCase, load_tests
from databricks.labs.specfix.lang.widths import IntWidth
from databricks.labs.specfix.overflow.detection import DetectionMode, detect, feasible_mode
from databricks.labs.specfix.overflow.intervals import Interval, parse_ranges
from databricks.labs.specfix.overflow.rules import RuleMode, rule_disagreements
from databricks.labs.specfix.repair.overflow import repair_all
from databricks.labs.specfix.repair.patches import PatchRecord, unified_diff, write_fixed, write_patches
from databricks.labs.specfix.repair.termination import Outcome, repair_termination
from databricks.labs.specfix.termination.prover import Answer, BugAnswer, Semantics, has_termination_bug

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FOUND = 1
EXIT_USAGE = 2
EXIT_PLAUSIBLE = 3
EXIT_NO_PATCH = 4
EXIT_UNKNOWN = 5

REPAIR_EXIT = {
    Outcome.VALID: EXIT_OK,
    Outcome.NO_BUG: EXIT_OK,
    Outcome.PLAUSIBLE: EXIT_PLAUSIBLE,
}

SEMANTICS_NOTE = (
    "Loops run over unbounded integers unless --semantics wrapped is given, since wrapping makes "
    "diverging loops such as `while (x < 10) x = x - 1;` exit after a wrap-around."
)

# flags that map onto SpecfixConfig fields
CONFIG_FLAGS = ("mode", "rule_mode", "semantics", "budget", "fuel", "jobs", "seed", "report")


class UsageError(ValueError):
    pass


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value file; defaults to the nearest .specfix")
    common.add_argument("--debug", action="store_true", help="debug logging and tracebacks")
    common.add_argument("--log-level", default=None, help="log level of the specfix loggers")
    common.add_argument("--mode", choices=[m.value for m in DetectionMode], help="overflow detection mode")
    common.add_argument("--rule-mode", choices=[m.value for m in RuleMode], help="overflow rule set")
    common.add_argument(
        "--semantics",
        choices=[s.value for s in Semantics],
        help="termination semantics, mathematical by default; under wrapped arithmetic a loop like "
        "`while (x < 10) x = x - 1;` wraps around and exits",
    )
    common.add_argument("--budget", type=float, help="repair budget in seconds")
    common.add_argument("--fuel", type=int, help="step budget per run")
    common.add_argument("--jobs", type=int, help="corpus entries run in parallel")
    common.add_argument("--seed", type=int, help="sampling seed")
    common.add_argument("--report", type=Path, help="write a JSON report to this path")
    common.add_argument("--ranges", default="", help="declared input ranges, e.g. a=0..10,b=-5..5")
    common.add_argument("--tests", type=Path, help="test-case file")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="specfix", description="Rule-driven repair for overflow and termination bugs")
    parser.add_argument("--version", action="version", version=f"specfix {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    detect_cmd = commands.add_parser("detect", parents=[common], help="report integer overflow findings")
    detect_cmd.add_argument("program", type=Path)
    detect_cmd.set_defaults(handler=cmd_detect)
    repair_cmd = commands.add_parser(
        "repair",
        parents=[common],
        help="repair overflow or termination bugs",
        description=f"Repair overflow or termination bugs. {SEMANTICS_NOTE}",
    )
    repair_cmd.add_argument("program", type=Path)
    repair_cmd.add_argument("--kind", choices=("auto", "io", "termination"), default="auto")
    repair_cmd.set_defaults(handler=cmd_repair)
    prove_cmd = commands.add_parser(
        "prove",
        parents=[common],
        help="decide termination of every loop",
        description=f"Decide termination of every loop. {SEMANTICS_NOTE}",
    )
    prove_cmd.add_argument("program", type=Path)
    prove_cmd.set_defaults(handler=cmd_prove)
    equiv_cmd = commands.add_parser("check-equiv", parents=[common], help="compare two expressions")
    equiv_cmd.add_argument("left")
    equiv_cmd.add_argument("right")
    equiv_cmd.set_defaults(handler=cmd_check_equiv)
    corpus_cmd = commands.add_parser("corpus", parents=[common], help="run a ground-truth corpus")
    corpus_cmd.add_argument("manifest", type=Path, nargs="?", default=BUNDLED)
    corpus_cmd.set_defaults(handler=cmd_corpus)
    rules_cmd = commands.add_parser("rules", parents=[common], help="compare the overflow rule sets on i8")
    rules_cmd.set_defaults(handler=cmd_rules)
    return parser


def configure(args: argparse.Namespace) -> SpecfixConfig:
    flags = {name: getattr(args, name, None) for name in CONFIG_FLAGS}
    return load_config(args.config, flags)


def _program(path: Path) -> Program:
    if not path.is_file():
        raise UsageError(f"no such file: {path}")
    return parse(path.read_text(encoding="utf8"))


def _tests(args: argparse.Namespace) -> list[TestCase]:
    if args.tests is None:
        return []
    if not args.tests.is_file():
        raise UsageError(f"no such file: {args.tests}")
    return load_tests(args.tests)


def _ranges(args: argparse.Namespace) -> dict[str, Interval]:
    return parse_ranges(args.ranges)


def _write_report(config: SpecfixConfig, payload: dict[str, Any]) -> None:
    if config.report is None:
        return
    config.report.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf8")
    logger.info(f"wrote report to {config.report}")


def cmd_detect(args: argparse.Namespace, config: SpecfixConfig) -> int:
    p = _program(args.program)
    tests = _tests(args)
    if config.mode == DetectionMode.CONCRETE and not tests:
        raise UsageError("concrete detection needs --tests")
    ranges = _ranges(args)
    mode = feasible_mode(p, config.mode, ranges, config.exhaustive_limit)
    diagnostics: list[str] = []
    findings = detect(p, mode, tests, ranges, config.fuel, config.exhaustive_limit, config.rule_mode, diagnostics)
    for finding in findings:
        print(finding)
    for message in diagnostics:
        logger.warning(f"no verdict: {message}")
    _write_report(config, {"findings": [f.as_dict() for f in findings], "diagnostics": diagnostics})
    return EXIT_FOUND if findings else EXIT_OK


def _repair_termination(args: argparse.Namespace, config: SpecfixConfig, p: Program, tests: list[TestCase]) -> int:
    if not tests:
        raise UsageError("termination repair needs --tests")
    report = repair_termination(p, tests, config.budget, config.prover(_ranges(args)), fuel=config.test_fuel)
    print(f"outcome={report.outcome.value}" + (f" reason={report.reason}" if report.reason else ""))
    _write_report(config, report.as_dict())
    record = report.record()
    if report.program is not None and record is not None:
        print(unified_diff(p, report.program, args.program.name), end="")
        fixed = write_fixed(args.program, report.program)
        write_patches(args.program, [record])
        logger.info(f"wrote {fixed}")
    return REPAIR_EXIT.get(report.outcome, EXIT_NO_PATCH)


def _repair_overflow(args: argparse.Namespace, config: SpecfixConfig, p: Program, tests: list[TestCase]) -> int:
    ranges = _ranges(args)
    mode = feasible_mode(p, config.mode, ranges, config.exhaustive_limit)
    result = repair_all(p, mode, ranges=ranges, tests=tests, fuel=config.fuel)
    print(f"outcome={result.outcome}")
    _write_report(config, result.as_dict())
    records: list[PatchRecord] = []
    before = p
    for repair in result.repairs:
        record = repair.record(before)
        if record is not None and repair.program is not None:
            records.append(record)
            before = repair.program
    if records:
        print(unified_diff(p, result.program, args.program.name), end="")
        fixed = write_fixed(args.program, result.program)
        write_patches(args.program, records)
        logger.info(f"wrote {fixed} with {len(records)} patches")
    if result.remaining:
        for finding in result.remaining[:1]:
            print(f"unrepaired: {finding}")
        return EXIT_NO_PATCH
    return EXIT_OK


def cmd_repair(args: argparse.Namespace, config: SpecfixConfig) -> int:
    """Termination bugs are looked for first: detecting overflow in a diverging program only spends fuel."""
    p = _program(args.program)
    tests = _tests(args)
    if args.kind == "termination":
        return _repair_termination(args, config, p, tests)
    if args.kind == "auto" and p.loops():
        bug = has_termination_bug(p, config.prover(_ranges(args)))
        logger.info(f"termination bug: {bug}")
        if bug.answer == BugAnswer.YES:
            return _repair_termination(args, config, p, tests)
    return _repair_overflow(args, config, p, tests)


def cmd_prove(args: argparse.Namespace, config: SpecfixConfig) -> int:
    p = _program(args.program)
    loops = p.loops()
    if not loops:
        raise UsageError(f"{args.program} has no loop")
    prover = config.prover(_ranges(args))
    verdicts = [prover.prove(p, loop) for loop in loops]
    for verdict in verdicts:
        print(verdict)
    _write_report(config, {"verdicts": [v.as_dict() for v in verdicts]})
    answers = {v.answer for v in verdicts}
    if Answer.NT in answers:
        return EXIT_FOUND
    if Answer.UN in answers:
        return EXIT_UNKNOWN
    return EXIT_OK


def cmd_check_equiv(args: argparse.Namespace, config: SpecfixConfig) -> int:
    result = equivalent(parse_expr(args.left), parse_expr(args.right))
    print(result)
    _write_report(config, {"equivalent": result.equivalent, "witness": result.witness and dict(result.witness)})
    return EXIT_OK if result else EXIT_FOUND


def cmd_corpus(args: argparse.Namespace, config: SpecfixConfig) -> int:
    entries = load_manifest(args.manifest)
    report = CorpusRunner(config).run(entries)
    print(report.to_text())
    if config.report is not None:
        report.write(config.report)
    return EXIT_OK if report.passed else EXIT_FOUND


def cmd_rules(_: argparse.Namespace, config: SpecfixConfig) -> int:
    counts = rule_disagreements(IntWidth.I8)
    for op, row in counts.items():
        print(op + " " + " ".join(f"{key}={value}" for key, value in row.items()))
    _write_report(config, counts)
    mismatches = sum(row["corrected-vs-oracle"] for row in counts.values())
    return EXIT_OK if mismatches == 0 else EXIT_FOUND


def _log_level(args: argparse.Namespace) -> str:
    if args.debug:
        return "DEBUG"
    return (args.log_level or "INFO").upper()


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    install_logger()
    logging.getLogger("databricks.labs.specfix").setLevel(_log_level(args))
    handler: Callable[[argparse.Namespace, SpecfixConfig], int] = args.handler
    try:
        config = configure(args)
        return handler(args, config)
    except (ValueError, OSError) as e:
        if args.debug:
            logger.exception(f"{args.command} failed")
        print(f"specfix {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
